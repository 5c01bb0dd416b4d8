//! Command-line driver: parse a JSON run configuration, dispatch one
//! experiment, and write deterministic JSON + CSV reports.
//!
//! Exit codes: 0 ok, 2 config error, 3 dimension cap, 4 numerical failure,
//! 5 selftest failure.

use clap::Parser;
use llab::commutator::{
    conjugate_pair, feshbach_isospectral, hs_calculus, ims_decompose, mourre_check,
    spectral_calculus, MourreParameters, PlateauBump, HAT_EPSILON, HAT_SIGMA, HAT_THETA,
};
use llab::config::{parse_config, to_canonical_json, RunConfig};
use llab::error::{LlabError, Result};
use llab::fgr::{fgr_condition, gamma_operator};
use llab::linalg::{
    compress, cr, fro_norm, index_basis, min_eig_hermitian, op_norm_hermitian, CMat,
};
use llab::particle::{gibbs_vector, ParticleSystem};
use llab::report::{write_json, write_text, CsvTable};
use llab::spectra::{eigen_scan, embedded_vector, evolve, kms_vector_at, resonance_width};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "llab", about = "numerical laboratory for thermal Liouvillians", version)]
struct Cli {
    /// fgr | spectrum | mourre | feshbach | resonance | dynamics | selftest
    command: String,
    /// Path to the JSON run configuration.
    config: PathBuf,
    /// Output directory for reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed override for randomized sweeps.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (defaults to the machine).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut config = parse_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    // echo the fully materialized config next to the reports
    write_text(&cli.out.join("config.json"), &to_canonical_json(&config))?;
    match cli.command.as_str() {
        "fgr" => cmd_fgr(&config, &cli.out),
        "spectrum" => cmd_spectrum(&config, &cli.out),
        "mourre" => cmd_mourre(&config, &cli.out),
        "feshbach" => cmd_feshbach(&config, &cli.out),
        "resonance" => cmd_resonance(&config, &cli.out),
        "dynamics" => cmd_dynamics(&config, &cli.out),
        "selftest" => cmd_selftest(&config, &cli.out),
        other => Err(LlabError::Config(format!(
            "unknown command \"{other}\"; expected one of fgr, spectrum, mourre, feshbach, \
             resonance, dynamics, selftest"
        ))),
    }
}

fn cmd_fgr(config: &RunConfig, out: &Path) -> Result<()> {
    let ps = config.particle_system()?;
    let ff = config.form_factor()?;
    let report = fgr_condition(&ps, &ff)?;
    write_json(&out.join("fgr.json"), &report)?;
    let mut csv = CsvTable::new(&["e", "multiplicity", "gamma_min", "bound", "pass"]);
    for line in &report.lines {
        csv.push(vec![
            line.e,
            line.multiplicity as f64,
            line.gamma_min,
            line.bound,
            if line.pass { 1.0 } else { 0.0 },
        ]);
    }
    csv.write(&out.join("fgr.csv"))?;
    println!(
        "fgr: {} eigenvalues, all_pass = {}, gap = {:.6e}",
        report.lines.len(),
        report.all_pass,
        report.gap
    );
    Ok(())
}

fn cmd_spectrum(config: &RunConfig, out: &Path) -> Result<()> {
    let model = config.build_model(0.0)?;
    let ex = &config.experiment;
    let window = ex.window.map(|[a, b]| (a, b)).unwrap_or_else(|| {
        let hg = llab::commutator::half_gap(&model, ex.e);
        let h = if hg.is_finite() { 0.9 * hg } else { 0.5 };
        (ex.e - h, ex.e + h)
    });
    let scan = eigen_scan(&model, &ex.lambda_grid, ex.e, window)?;
    write_json(&out.join("spectrum.json"), &scan)?;
    let mut csv = CsvTable::new(&["lambda", "eigenvalue"]);
    for line in &scan.lines {
        for &mu in &line.eigenvalues {
            csv.push(vec![line.lambda, mu]);
        }
    }
    csv.write(&out.join("spectrum.csv"))?;
    println!(
        "spectrum: e = {}, window = ({:.4}, {:.4}), {} couplings",
        ex.e, window.0, window.1, scan.lines.len()
    );
    Ok(())
}

fn cmd_mourre(config: &RunConfig, out: &Path) -> Result<()> {
    let ex = &config.experiment;
    let lambda = ex.lambda;
    let model = config.build_model(lambda)?;
    let params = MourreParameters::with_overrides(
        lambda,
        lambda.powf(HAT_EPSILON / 100.0),
        lambda.powf(-HAT_SIGMA / 100.0),
        lambda.powf(HAT_THETA / 100.0),
        ex.gate_s,
    )?;
    if !params.gate_ok {
        eprintln!("warning: parameter gate failed (reported, not fatal):");
        for v in &params.gate_violations {
            eprintln!("warning:   {v}");
        }
    }
    let gamma_e = gamma_floor(config, &model, ex.e)?;
    let pair = conjugate_pair(&model, ex.e, params)?;
    let report = mourre_check(&model, &pair, ex.window.map(|[a, b]| (a, b)), gamma_e)?;
    write_json(&out.join("mourre.json"), &report)?;
    let mut csv = CsvTable::new(&[
        "e",
        "lambda",
        "theta",
        "epsilon",
        "sigma",
        "gate_ok",
        "gamma_e",
        "bound",
        "min_eig_sharp",
        "margin_sharp",
        "min_eig_smooth",
        "margin_smooth",
    ]);
    csv.push(vec![
        report.e,
        report.lambda,
        report.theta,
        report.epsilon,
        report.sigma,
        if report.gate_ok { 1.0 } else { 0.0 },
        report.gamma_e,
        report.bound,
        report.min_eig_sharp,
        report.margin_sharp,
        report.min_eig_smooth,
        report.margin_smooth,
    ]);
    csv.write(&out.join("mourre.csv"))?;
    println!(
        "mourre: e = {}, lambda = {}, gate_ok = {}, margin_sharp = {:.6e}",
        report.e, report.lambda, report.gate_ok, report.margin_sharp
    );
    Ok(())
}

/// Smallest eigenvalue of the golden-rule operator compressed to the
/// eigenvalue group of e.
fn gamma_floor(config: &RunConfig, model: &llab::liouvillian::FullModel, e: f64) -> Result<f64> {
    let ff = config.form_factor()?;
    let op = gamma_operator(&model.ps, &ff, e)?;
    let idx = model
        .spectrum
        .group_indices(e)
        .ok_or_else(|| LlabError::Config(format!("e = {e} not in the spectrum of L_p")))?;
    let basis = index_basis(model.dim_p(), idx);
    Ok(min_eig_hermitian(&compress(&op.gamma_p, &basis)))
}

#[derive(Serialize)]
struct FeshbachReport {
    lambda: f64,
    /// Eigenvalues of L outside the spectrum of the decimated block.
    probed: usize,
    max_min_singular_value: f64,
    margin: f64,
    all_singular: bool,
}

fn cmd_feshbach(config: &RunConfig, out: &Path) -> Result<()> {
    let ex = &config.experiment;
    let model = config.build_model(ex.lambda)?;
    let l = model.full();
    // decimate onto the field-vacuum sector
    let dim_f = model.dim_f();
    let vac: Vec<usize> = (0..model.dim())
        .filter(|k| model.fock.total_occupation(k % dim_f) == 0)
        .collect();
    let rest: Vec<usize> = (0..model.dim())
        .filter(|k| model.fock.total_occupation(k % dim_f) > 0)
        .collect();
    let v1 = index_basis(model.dim(), &vac);
    let v2 = index_basis(model.dim(), &rest);
    let scale = op_norm_hermitian(&l).max(1.0);
    // eigenvalues closer than this to the decimated block's spectrum are
    // not testable (the inverse degenerates); the singularity threshold
    // below is stricter
    let exclusion = 1e-5 * scale;
    let margin = 1e-8 * scale;
    let lines = feshbach_isospectral(&l, &v1, &v2, exclusion)?;
    let mut csv = CsvTable::new(&["eigenvalue", "min_singular_value"]);
    let mut max_sv: f64 = 0.0;
    for &(mu, sv) in &lines {
        csv.push(vec![mu, sv]);
        max_sv = max_sv.max(sv);
    }
    csv.write(&out.join("feshbach.csv"))?;
    let report = FeshbachReport {
        lambda: ex.lambda,
        probed: lines.len(),
        max_min_singular_value: max_sv,
        margin,
        all_singular: max_sv <= margin,
    };
    write_json(&out.join("feshbach.json"), &report)?;
    println!(
        "feshbach: probed {} eigenvalues, all_singular = {}, max min-sv = {:.3e}",
        report.probed, report.all_singular, report.max_min_singular_value
    );
    Ok(())
}

fn cmd_resonance(config: &RunConfig, out: &Path) -> Result<()> {
    let ex = &config.experiment;
    let model = config.build_model(0.0)?;
    let report = resonance_width(&model, ex.e, &ex.lambda_grid, ex.eta)?;
    write_json(&out.join("resonance.json"), &report)?;
    let mut csv = CsvTable::new(&["lambda", "width", "fit_residual"]);
    for line in &report.lines {
        csv.push(vec![line.lambda, line.width, line.fit_residual]);
    }
    csv.write(&out.join("resonance.csv"))?;
    println!(
        "resonance: e = {}, eta = {}, slope = {:.4}, prefactor = {:.6e}",
        report.e, report.eta, report.slope, report.prefactor
    );
    Ok(())
}

#[derive(Serialize)]
struct DynamicsSummary {
    lambda: f64,
    e: f64,
    t_max: f64,
    dt: f64,
    target: f64,
    cesaro_limit: f64,
    final_running_mean: f64,
    heisenberg_time: f64,
    a_norm: f64,
    unitarity_defect: f64,
}

fn cmd_dynamics(config: &RunConfig, out: &Path) -> Result<()> {
    let ex = &config.experiment;
    let model = config.build_model(ex.lambda)?;
    let psi = embedded_vector(&model, ex.e)?;
    // observable: survival projector of the initial state
    let a = &psi * psi.adjoint();
    let ts = evolve(&model, &psi, &a, ex.t_max, ex.dt)?;
    let mut csv = CsvTable::new(&["t", "value", "running_mean"]);
    for k in 0..ts.times.len() {
        csv.push(vec![ts.times[k], ts.values[k], ts.running_means[k]]);
    }
    csv.write(&out.join("dynamics.csv"))?;
    let summary = DynamicsSummary {
        lambda: ex.lambda,
        e: ex.e,
        t_max: ex.t_max,
        dt: ex.dt,
        target: ts.target,
        cesaro_limit: ts.cesaro_limit,
        final_running_mean: *ts.running_means.last().unwrap(),
        heisenberg_time: ts.heisenberg_time,
        a_norm: ts.a_norm,
        unitarity_defect: ts.unitarity_defect,
    };
    write_json(&out.join("dynamics.json"), &summary)?;
    println!(
        "dynamics: {} steps, cesaro limit = {:.6e}, final mean = {:.6e}",
        ts.times.len(),
        ts.cesaro_limit,
        summary.final_running_mean
    );
    Ok(())
}

#[derive(Serialize)]
struct SelftestLine {
    name: String,
    pass: bool,
    detail: String,
}

fn cmd_selftest(config: &RunConfig, out: &Path) -> Result<()> {
    let mut lines: Vec<SelftestLine> = Vec::new();
    let mut record = |name: &str, result: std::result::Result<String, String>| {
        let (pass, detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        println!("selftest {} ... {}", name, if pass { "ok" } else { "FAIL" });
        if !pass {
            println!("    {detail}");
        }
        lines.push(SelftestLine { name: name.to_string(), pass, detail });
    };

    record("gibbs_zero_mode", check_gibbs_zero_mode(config));
    record("equilibrium_in_kernel", check_equilibrium_kernel(config));
    record("feshbach_isospectral", check_feshbach_random(config.seed));
    record("ims_reconstruction", check_ims(config));
    record("smooth_calculus", check_hs(config.seed));
    record("csv_determinism", check_csv_determinism());
    record("config_echo", check_config_echo(config));

    let all_pass = lines.iter().all(|l| l.pass);
    write_json(&out.join("selftest.json"), &lines)?;
    if all_pass {
        println!("selftest: all {} checks passed", lines.len());
        Ok(())
    } else {
        let failed: Vec<&str> =
            lines.iter().filter(|l| !l.pass).map(|l| l.name.as_str()).collect();
        Err(LlabError::Selftest(format!("failed checks: {}", failed.join(", "))))
    }
}

fn check_gibbs_zero_mode(config: &RunConfig) -> std::result::Result<String, String> {
    let ps = config.particle_system().map_err(|e| e.to_string())?;
    let ff = config.form_factor().map_err(|e| e.to_string())?;
    let op = gamma_operator(&ps, &ff, 0.0).map_err(|e| e.to_string())?;
    let gibbs = gibbs_vector(&ps);
    let scale = op_norm_hermitian(&op.gamma).max(1e-300);
    let resid = (&op.gamma * &gibbs.vector).norm() / scale;
    if resid <= 1e-10 {
        Ok(format!("relative residual {resid:.3e}"))
    } else {
        Err(format!("Gamma(0) does not annihilate the Gibbs vector: {resid:.3e}"))
    }
}

fn check_equilibrium_kernel(config: &RunConfig) -> std::result::Result<String, String> {
    let lambda = config.experiment.lambda;
    let model = config.build_model(lambda).map_err(|e| e.to_string())?;
    let omega0 = model.reference_vector();
    let (_, line) = kms_vector_at(&model, lambda, &omega0).map_err(|e| e.to_string())?;
    if line.residual <= 1e-9 && line.gap > 0.0 {
        Ok(format!("residual {:.3e}, gap {:.3e}", line.residual, line.gap))
    } else {
        Err(format!("residual {:.3e}, gap {:.3e}", line.residual, line.gap))
    }
}

fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> CMat {
    let raw = CMat::from_fn(dim, dim, |_, _| {
        num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    (&raw + raw.adjoint()) * cr(0.5)
}

fn check_feshbach_random(seed: u64) -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfe5b);
    for trial in 0..10 {
        let dim = rng.gen_range(8..=16);
        let split = rng.gen_range(2..dim - 1);
        let b = random_hermitian(&mut rng, dim);
        let v1 = index_basis(dim, &(0..split).collect::<Vec<_>>());
        let v2 = index_basis(dim, &(split..dim).collect::<Vec<_>>());
        let scale = op_norm_hermitian(&b).max(1.0);
        let lines = feshbach_isospectral(&b, &v1, &v2, 1e-8 * scale).map_err(|e| e.to_string())?;
        for (mu, sv) in lines {
            if sv > 1e-8 * scale {
                return Err(format!(
                    "trial {trial}: eigenvalue {mu} not singular for the decimated map (sv {sv:.3e})"
                ));
            }
        }
    }
    Ok("10 random decimations isospectral".to_string())
}

fn check_ims(config: &RunConfig) -> std::result::Result<String, String> {
    let model = config.build_model(config.experiment.lambda).map_err(|e| e.to_string())?;
    let l = model.full();
    let number = model.fock.number_diagonal();
    let full_number: Vec<f64> =
        (0..model.dim()).map(|k| number[k % model.dim_f()]).collect();
    let dec = ims_decompose(&l, &full_number, 4.0).map_err(|e| e.to_string())?;
    let err = dec.residual / fro_norm(&l).max(1e-300);
    if err <= 1e-12 {
        Ok(format!("reconstruction error {err:.3e}"))
    } else {
        Err(format!("reconstruction error {err:.3e}"))
    }
}

fn check_hs(seed: u64) -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x45);
    let a = random_hermitian(&mut rng, 12) * cr(3.0);
    let f = PlateauBump::new(-2.0, -1.0, 1.0, 2.0).map_err(|e| e.to_string())?;
    let hs = hs_calculus(&f, &a, 0, 1e-8).map_err(|e| e.to_string())?;
    let reference = spectral_calculus(&f, &a, 0);
    let err = op_norm_hermitian(&(&hs - &reference));
    if err <= 1e-6 {
        Ok(format!("contour vs spectral discrepancy {err:.3e}"))
    } else {
        Err(format!("contour vs spectral discrepancy {err:.3e}"))
    }
}

fn check_csv_determinism() -> std::result::Result<String, String> {
    let build = || {
        let mut t = CsvTable::new(&["x", "y"]);
        for k in 0..100 {
            let x = (k as f64) * 0.37;
            t.push(vec![x, (x * 1.7).sin() / 3.0]);
        }
        t.render()
    };
    if build() == build() {
        Ok("two renders byte-identical".to_string())
    } else {
        Err("CSV rendering is not deterministic".to_string())
    }
}

fn check_config_echo(config: &RunConfig) -> std::result::Result<String, String> {
    let echo = to_canonical_json(config);
    let reparsed =
        llab::config::parse_config_str(&echo).map_err(|e| format!("echo failed to parse: {e}"))?;
    if &reparsed == config && to_canonical_json(&reparsed) == echo {
        Ok("canonical echo idempotent".to_string())
    } else {
        Err("canonical echo is not idempotent".to_string())
    }
}

// keep the unused-dependency check honest: ParticleSystem is used via config
#[allow(dead_code)]
fn _type_witness(_: Option<ParticleSystem>) {}
