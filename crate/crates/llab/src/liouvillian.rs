//! Assembly of the full Liouvillian L = L₀ + λI on the tensor product of the
//! doubled particle space and the truncated Fock space. Flat index layout is
//! particle-major: (doubled particle index p, Fock state s) ↦ p · dim_f + s.

use crate::error::{LlabError, Result};
use crate::field::{
    field_liouvillian, field_operator, number_operator, translation_generator, FockModel,
    GluedSamples,
};
use crate::linalg::{cr, identity, kron, CMat, CVec};
use crate::particle::{
    doubled_operators, gibbs_vector, particle_liouvillian, GibbsVector,
    LiouvilleParticleSpectrum, ParticleSystem,
};
use num_complex::Complex64;

pub const DEFAULT_DIM_CAP: usize = 20_000;

/// Isotropic coupling: the solid-angle integral over S² contributes 4π to
/// every |g|²-type quantity, so the glued amplitude enters the assembled
/// interaction as √(4π)·g. This keeps the model consistent with the golden-
/// rule operators, which integrate over ℝ×S².
pub const ANGULAR_FACTOR: f64 = 4.0 * std::f64::consts::PI;

/// Interaction I = G_l ⊗ Φ(√(4π)g₁) − G_r ⊗ Φ(√(4π)g₂), Φ(f) = a(f) + a*(f).
pub fn interaction_operator(
    gl: &CMat,
    gr: &CMat,
    g1: &[Complex64],
    g2: &[Complex64],
    fock: &FockModel,
) -> Result<CMat> {
    let s = cr(ANGULAR_FACTOR.sqrt());
    let f1: Vec<Complex64> = g1.iter().map(|&z| z * s).collect();
    let f2: Vec<Complex64> = g2.iter().map(|&z| z * s).collect();
    let phi1 = field_operator(&f1, fock)?;
    let phi2 = field_operator(&f2, fock)?;
    Ok(kron(gl, &phi1) - kron(gr, &phi2))
}

#[derive(Debug, Clone)]
pub struct FullModel {
    pub ps: ParticleSystem,
    pub fock: FockModel,
    pub samples: GluedSamples,
    pub lambda: f64,
    pub spectrum: LiouvilleParticleSpectrum,
    pub gibbs: GibbsVector,
    /// G_l, G_r on the doubled particle space (not lifted).
    pub gl: CMat,
    pub gr: CMat,
    /// Exact diagonal of L₀ = L_p ⊗ 1 + 1 ⊗ dΓ(u).
    pub l0_diag: Vec<f64>,
    pub interaction: CMat,
}

impl FullModel {
    pub fn dim(&self) -> usize {
        self.ps.doubled_dim() * self.fock.dim()
    }

    pub fn dim_p(&self) -> usize {
        self.ps.doubled_dim()
    }

    pub fn dim_f(&self) -> usize {
        self.fock.dim()
    }

    pub fn l0(&self) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(
            self.dim(),
            self.l0_diag.iter().map(|&x| cr(x)),
        ))
    }

    pub fn full(&self) -> CMat {
        let mut l = self.interaction.clone() * cr(self.lambda);
        for k in 0..self.dim() {
            l[(k, k)] += cr(self.l0_diag[k]);
        }
        l
    }

    /// Lift a doubled-particle operator: M ⊗ 1_f.
    pub fn lift_particle(&self, m: &CMat) -> CMat {
        kron(m, &identity(self.dim_f()))
    }

    /// Lift a Fock operator: 1_p ⊗ M.
    pub fn lift_field(&self, m: &CMat) -> CMat {
        kron(&identity(self.dim_p()), m)
    }

    /// Number operator N = 1 ⊗ dΓ(1).
    pub fn number_full(&self) -> CMat {
        self.lift_field(&number_operator(&self.fock))
    }

    /// Translation generator A₀ = 1 ⊗ dΓ(−∂_u).
    pub fn translation_full(&self) -> CMat {
        self.lift_field(&translation_generator(&self.fock))
    }

    /// Ĩ: the interaction built from ∂_u-differentiated glued functions.
    /// On the truncated space it is the exact limit of [I, A₀] under grid
    /// refinement.
    pub fn i_tilde(&self) -> Result<CMat> {
        interaction_operator(&self.gl, &self.gr, &self.samples.dg1, &self.samples.dg2, &self.fock)
    }

    /// Diagonal of R_ε(e)² = ((L₀ − e)² + ε²)^{−1}; exact since L₀ is diagonal.
    pub fn resolvent_sq_diag(&self, e: f64, eps: f64) -> Vec<f64> {
        self.l0_diag.iter().map(|&x| 1.0 / ((x - e).powi(2) + eps * eps)).collect()
    }

    /// Sharp spectral projector E_Δ(L₀) for the closed interval Δ = [a, b].
    pub fn l0_interval_projector(&self, a: f64, b: f64) -> CMat {
        let dim = self.dim();
        let mut p = CMat::zeros(dim, dim);
        for (k, &x) in self.l0_diag.iter().enumerate() {
            if x >= a && x <= b {
                p[(k, k)] = cr(1.0);
            }
        }
        p
    }

    /// Q(e) = P(L_p = e) ⊗ P_Ω, the doubled-particle eigenspace tensored
    /// with the Fock vacuum.
    pub fn q_projector(&self, e: f64) -> Option<CMat> {
        let pp = self.spectrum.projector(e)?;
        let dim_f = self.dim_f();
        let mut pvac = CMat::zeros(dim_f, dim_f);
        pvac[(0, 0)] = cr(1.0);
        Some(kron(&pp, &pvac))
    }

    /// Flat indices spanning Ran Q(e).
    pub fn q_indices(&self, e: f64) -> Option<Vec<usize>> {
        let dim_f = self.dim_f();
        self.spectrum.group_indices(e).map(|g| g.iter().map(|&p| p * dim_f).collect())
    }

    /// Ω_{β,0} = Ω_p ⊗ Ω_vac: the uncoupled equilibrium vector.
    pub fn reference_vector(&self) -> CVec {
        let dim = self.dim();
        let dim_f = self.dim_f();
        let mut v = CVec::zeros(dim);
        for p in 0..self.dim_p() {
            v[p * dim_f] = self.gibbs.vector[p];
        }
        v
    }

    /// Distinct eigenvalues of L₀ with multiplicities, exact enumeration.
    pub fn l0_spectrum(&self) -> Vec<(f64, usize)> {
        let tol = self.ps.tol_e();
        let mut vals = self.l0_diag.clone();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut out: Vec<(f64, usize)> = Vec::new();
        for v in vals {
            match out.last_mut() {
                Some((x, m)) if (v - *x).abs() <= tol => *m += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }
}

/// Build the full model, enforcing the dimension cap before any matrix of
/// size dim² is allocated.
pub fn assemble(
    ps: ParticleSystem,
    fock: FockModel,
    samples: GluedSamples,
    lambda: f64,
    dim_cap: usize,
) -> Result<FullModel> {
    if (samples.beta - ps.beta).abs() > 1e-12 {
        return Err(LlabError::Config("glued samples and particle system disagree on beta".into()));
    }
    if samples.grid.n_u != fock.grid.n_u || (samples.grid.u_max - fock.grid.u_max).abs() > 1e-12 {
        return Err(LlabError::Config("glued samples and Fock space use different grids".into()));
    }
    if !lambda.is_finite() {
        return Err(LlabError::Config("lambda must be finite".into()));
    }
    let dim = ps.doubled_dim() * fock.dim();
    if dim > dim_cap {
        return Err(LlabError::DimensionCap { dim, cap: dim_cap });
    }

    let (_, spectrum) = particle_liouvillian(&ps);
    let gibbs = gibbs_vector(&ps);
    let (gl, gr) = doubled_operators(&ps);

    let dim_f = fock.dim();
    let lf = field_liouvillian(&fock);
    let mut l0_diag = vec![0.0; dim];
    for p in 0..ps.doubled_dim() {
        for s in 0..dim_f {
            l0_diag[p * dim_f + s] = spectrum.eigenvalues[p] + lf[(s, s)].re;
        }
    }

    let interaction = interaction_operator(&gl, &gr, &samples.g1, &samples.g2, &fock)?;
    Ok(FullModel { ps, fock, samples, lambda, spectrum, gibbs, gl, gr, l0_diag, interaction })
}
