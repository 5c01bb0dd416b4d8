//! JSON run configuration: strict schema, physical validation, default
//! materialization, and a canonical echo for reproducible reports.
//!
//! Three failure classes carry distinct diagnostics under the config exit
//! code: `json:` (the file is not valid JSON), `schema:` (valid JSON that
//! does not match the schema, including unknown keys, which are named), and
//! `invalid value:` (well-formed config whose numbers violate a physical
//! constraint).

use crate::error::{LlabError, Result};
use crate::field::{glue, FockModel, FormFactor, GluedSamples, ModeGrid};
use crate::linalg::CMat;
use crate::liouvillian::{assemble, FullModel};
use crate::particle::ParticleSystem;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const DEFAULT_DIM_CAP: usize = crate::liouvillian::DEFAULT_DIM_CAP;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub particle: ParticleBlock,
    pub field: FieldBlock,
    #[serde(default)]
    pub experiment: ExperimentBlock,
    /// Seed for randomized property sweeps; core computations ignore it.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleBlock {
    pub energies: Vec<f64>,
    /// Hermitian coupling matrix as nested rows of [re, im] pairs.
    pub g: Vec<Vec<[f64; 2]>>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    pub form_factor: FormFactorBlock,
    pub grid: GridBlock,
    pub fock: FockBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormFactorBlock {
    pub p: f64,
    pub q: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_profile")]
    pub profile: String,
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_profile() -> String {
    "power_exp".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub u_max: f64,
    pub n_u: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockBlock {
    pub n_max: usize,
}

/// Command-specific knobs; every field has a default so a config may omit
/// the whole block. Defaults are materialized before the echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentBlock {
    /// Coupling strength for single-coupling commands (mourre, feshbach,
    /// dynamics).
    pub lambda: f64,
    /// Coupling grid for sweep commands (spectrum, resonance); must be
    /// nonnegative and strictly increasing.
    pub lambda_grid: Vec<f64>,
    /// Eigenvalue of L_p under study.
    pub e: f64,
    /// Spectral window for spectrum/mourre; None selects the automatic
    /// window centered at e.
    pub window: Option<[f64; 2]>,
    /// Lorentzian widths for the golden-rule convergence sweep.
    pub epsilon: Vec<f64>,
    /// Smoothing width of the spectral function (resonance).
    pub eta: f64,
    pub t_max: f64,
    pub dt: f64,
    /// Memory guard: model assembly refuses dimensions above this.
    pub dim_cap: usize,
    /// Smallness threshold for the Mourre parameter gate.
    pub gate_s: f64,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        ExperimentBlock {
            lambda: 0.05,
            lambda_grid: vec![0.02, 0.05, 0.1],
            e: 0.0,
            window: None,
            epsilon: vec![1e-1, 1e-2, 1e-3],
            eta: 0.05,
            t_max: 50.0,
            dt: 0.05,
            dim_cap: DEFAULT_DIM_CAP,
            gate_s: crate::commutator::DEFAULT_GATE_S,
        }
    }
}

/// Parse and validate a config file. Defaults are materialized, so the
/// canonical echo of the result is complete.
pub fn parse_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LlabError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    // two-stage parse separates malformed JSON from schema violations
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| LlabError::Config(format!("json: {e}")))?;
    let config: RunConfig = serde_json::from_value(value)
        .map_err(|e| LlabError::Config(format!("schema: {e}")))?;
    config.validate()?;
    Ok(config)
}

/// Canonical form: pretty JSON with the schema's field order and a trailing
/// newline. parse → echo is idempotent on canonical files.
pub fn to_canonical_json(config: &RunConfig) -> String {
    let mut s = serde_json::to_string_pretty(config).expect("config serializes");
    s.push('\n');
    s
}

fn physical(msg: String) -> LlabError {
    LlabError::Config(format!("invalid value: {msg}"))
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.particle.energies.len();
        if n == 0 {
            return Err(physical("particle.energies must be nonempty".into()));
        }
        for &e in &self.particle.energies {
            if !e.is_finite() {
                return Err(physical(format!("particle.energies entry {e} is not finite")));
            }
        }
        if self.particle.g.len() != n || self.particle.g.iter().any(|row| row.len() != n) {
            return Err(physical(format!("particle.g must be a {n}x{n} matrix")));
        }
        for row in &self.particle.g {
            for &[re, im] in row {
                if !re.is_finite() || !im.is_finite() {
                    return Err(physical("particle.g entries must be finite".into()));
                }
            }
        }
        if !(self.particle.beta > 0.0) || !self.particle.beta.is_finite() {
            return Err(physical(format!(
                "particle.beta must be a positive finite number, got {}",
                self.particle.beta
            )));
        }
        let ff = &self.field.form_factor;
        if !(ff.p > 0.0) || !ff.p.is_finite() {
            return Err(physical(format!(
                "infrared violation: field.form_factor.p must be > 0, got {}",
                ff.p
            )));
        }
        if !ff.q.is_finite() || !(ff.amplitude > 0.0) || !ff.amplitude.is_finite() {
            return Err(physical("field.form_factor.q and .amplitude must be finite, amplitude > 0".into()));
        }
        if ff.profile != "power_exp" {
            return Err(physical(format!(
                "field.form_factor.profile must be \"power_exp\", got \"{}\"",
                ff.profile
            )));
        }
        if !(self.field.grid.u_max > 0.0) || !self.field.grid.u_max.is_finite() {
            return Err(physical("field.grid.u_max must be a positive finite number".into()));
        }
        if self.field.grid.n_u == 0 || self.field.grid.n_u % 2 != 0 {
            return Err(physical(format!(
                "field.grid.n_u must be a positive even integer, got {}",
                self.field.grid.n_u
            )));
        }
        if self.field.fock.n_max < 1 {
            return Err(physical("field.fock.n_max must be at least 1".into()));
        }
        let ex = &self.experiment;
        for (name, v) in [
            ("lambda", ex.lambda),
            ("e", ex.e),
            ("eta", ex.eta),
            ("t_max", ex.t_max),
            ("dt", ex.dt),
            ("gate_s", ex.gate_s),
        ] {
            if !v.is_finite() {
                return Err(physical(format!("experiment.{name} must be finite, got {v}")));
            }
        }
        if ex.lambda < 0.0 {
            return Err(physical("experiment.lambda must be nonnegative".into()));
        }
        if ex.lambda_grid.is_empty() {
            return Err(physical("experiment.lambda_grid must be nonempty".into()));
        }
        for w in ex.lambda_grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(physical("experiment.lambda_grid must be strictly increasing".into()));
            }
        }
        if !(ex.lambda_grid[0] >= 0.0) || !ex.lambda_grid.iter().all(|x| x.is_finite()) {
            return Err(physical("experiment.lambda_grid must be nonnegative and finite".into()));
        }
        if let Some([a, b]) = ex.window {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(physical(format!(
                    "experiment.window must be a nonempty finite interval, got [{a}, {b}]"
                )));
            }
        }
        if ex.epsilon.is_empty() || ex.epsilon.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(physical("experiment.epsilon must be a nonempty list of positive numbers".into()));
        }
        if !(ex.eta > 0.0) {
            return Err(physical("experiment.eta must be positive".into()));
        }
        if !(ex.t_max > 0.0) || !(ex.dt > 0.0) {
            return Err(physical("experiment.t_max and experiment.dt must be positive".into()));
        }
        if !(ex.gate_s > 0.0) {
            return Err(physical("experiment.gate_s must be positive".into()));
        }
        Ok(())
    }

    pub fn coupling_matrix(&self) -> CMat {
        let n = self.particle.energies.len();
        CMat::from_fn(n, n, |i, j| {
            let [re, im] = self.particle.g[i][j];
            Complex64::new(re, im)
        })
    }

    pub fn particle_system(&self) -> Result<ParticleSystem> {
        ParticleSystem::new(self.particle.energies.clone(), self.coupling_matrix(), self.particle.beta)
    }

    pub fn form_factor(&self) -> Result<FormFactor> {
        let ff = &self.field.form_factor;
        FormFactor::new(ff.p, ff.q, ff.amplitude)
    }

    pub fn mode_grid(&self) -> Result<ModeGrid> {
        ModeGrid::new(self.field.grid.u_max, self.field.grid.n_u)
    }

    pub fn glued_samples(&self) -> Result<GluedSamples> {
        glue(&self.form_factor()?, self.particle.beta, &self.mode_grid()?)
    }

    /// Assemble the full model at the given coupling, under the configured
    /// dimension cap.
    pub fn build_model(&self, lambda: f64) -> Result<FullModel> {
        let ps = self.particle_system()?;
        let fock = FockModel::new(self.mode_grid()?, self.field.fock.n_max)?;
        let samples = self.glued_samples()?;
        assemble(ps, fock, samples, lambda, self.experiment.dim_cap)
    }
}
