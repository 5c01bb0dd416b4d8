//! Golden-rule level-shift operators Γ(e) on the doubled particle space,
//! the strict-positivity conditions, the explicit spectral lower bounds, and
//! an independent Lorentzian-regularization evaluation of Γ(e).
//!
//! Conventions: the angular factor 4π (the surface measure of S², constant
//! because the form factor is isotropic) is applied exactly once, at the
//! point where the u-integral or its delta collapse is evaluated; m(u) never
//! contains it. Radial integrals carry the ω² Jacobian of the spherical
//! measure through the glued functions g₁, g₂ (which contain one factor u
//! each, so |g₁|² supplies u²).

use crate::error::{LlabError, Result};
use crate::field::{glued_g1, glued_g2, FormFactor};
use crate::linalg::{
    adaptive_simpson_matrix, complement_within, compress, cr, eigh, fro_norm, index_basis,
    min_eig_hermitian, CMat,
};
use crate::particle::{doubled_operators, gibbs_vector, particle_liouvillian, ParticleSystem};
use serde::Serialize;

const TAU: f64 = 4.0 * std::f64::consts::PI;

/// m(u) = G_l·g₁(u) − G_r·g₂(u), evaluated analytically from the form
/// factor (never from grid samples).
pub fn coupling_m(ps: &ParticleSystem, ff: &FormFactor, u: f64) -> Result<CMat> {
    if u == 0.0 {
        return Err(LlabError::Numerical("coupling m is undefined at u = 0".into()));
    }
    let g1 = glued_g1(ff, ps.beta, u);
    let g2 = glued_g2(ff, ps.beta, u);
    if !g1.is_finite() || !g2.is_finite() {
        return Err(LlabError::Numerical(format!("glued form factor overflow at u = {u}")));
    }
    let (gl, gr) = doubled_operators(ps);
    Ok(gl * g1 - gr * g2)
}

#[derive(Debug, Clone)]
pub struct FgrOperator {
    pub e: f64,
    /// Γ(e) on the full doubled space, PSD by construction.
    pub gamma: CMat,
    /// Γ_p(e) = P(L_p=e) Γ(e) P(L_p=e).
    pub gamma_p: CMat,
}

/// Γ(e) by the exact spectral sum: the delta in
/// ∫ m*(u) P(L_p≠e) δ(L_p−e+u) m(u) du collapses onto u = e − e_j,
/// so Γ(e) = 4π Σ_{e_j ≠ e} m*(e−e_j) P(L_p=e_j) m(e−e_j).
pub fn gamma_operator(ps: &ParticleSystem, ff: &FormFactor, e: f64) -> Result<FgrOperator> {
    let (_, spec) = particle_liouvillian(ps);
    if spec.group_indices(e).is_none() {
        return Err(LlabError::Numerical(format!("e = {e} is not an eigenvalue of L_p")));
    }
    let dim = ps.doubled_dim();
    let mut gamma = CMat::zeros(dim, dim);
    for &ej in &spec.distinct_values() {
        if (ej - e).abs() <= spec.tol_e {
            continue;
        }
        let u = e - ej;
        let m = coupling_m(ps, ff, u)?;
        let p = spec.projector(ej).unwrap();
        gamma += m.adjoint() * p * m * cr(TAU);
    }
    // symmetrize away rounding; Γ is Hermitian in exact arithmetic
    let gamma = (&gamma + gamma.adjoint()) * cr(0.5);
    let pe = spec.projector(e).unwrap();
    let gamma_p = &pe * &gamma * &pe;
    Ok(FgrOperator { e, gamma, gamma_p })
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenvalueBound {
    pub e: f64,
    pub multiplicity: usize,
    pub delta_0: f64,
    /// δ₀ · inf_{E_ij≠0} 4π·μ(|E_ij|)·E_ij²·|g(|E_ij|)|² with the Planck
    /// weight μ(ω) = 1/(e^{βω}−1): the spectral lower bound for Γ_p(e),
    /// e ≠ 0.  The Planck weight belongs to the emission branch of the
    /// glued form factor, which is always the smaller of the two thermal
    /// branches, so this constant is valid at every β > 0.
    pub part1_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralBounds {
    pub per_e: Vec<EigenvalueBound>,
    /// g₀ computed with energies shifted by E₀ (same shift as the Gibbs
    /// vector); the product gap = 2g₀Z_p is shift-invariant.
    pub g_0: f64,
    pub z_p: f64,
    /// Gap of Γ_p(0) on the complement of the particle Gibbs vector: 2g₀Z_p.
    pub gap: f64,
}

fn approx_in(set: &[usize], _x: usize) -> bool {
    !set.is_empty() && set.contains(&_x)
}

/// Explicit lower bounds: for each distinct e the index-set quantity δ₀ and
/// the induced bound on Γ_p(e); globally g₀ and the zero-eigenvalue gap.
pub fn theorem24_bounds(ps: &ParticleSystem, ff: &FormFactor) -> SpectralBounds {
    let n = ps.n_levels();
    let tol = ps.tol_e();
    let en = &ps.energies;
    let g = &ps.coupling;
    let (_, spec) = particle_liouvillian(ps);

    // inf over nonzero Bohr frequencies of 4π·μ(|E_ij|)·E_ij²·|g(|E_ij|)|².
    // Both gluing branches of the form factor appear in Γ_p; the emission
    // branch carries the Planck weight μ(ω) = 1/(e^{βω}−1) < 1+μ(ω), so it
    // sets the infimum.
    let mut inf_freq = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            let d = (en[i] - en[j]).abs();
            if d > tol {
                let gval = ff.value(d);
                let mu = 1.0 / ((ps.beta * d).exp() - 1.0);
                inf_freq = inf_freq.min(TAU * mu * d * d * gval * gval);
            }
        }
    }
    if !inf_freq.is_finite() {
        inf_freq = 0.0; // fully degenerate H_p: no nonzero frequency exists
    }

    let mut per_e = Vec::new();
    for &e in &spec.distinct_values() {
        // right / left index sets of the resonance pairs E_i − E_j = e
        let mut nr: Vec<usize> = Vec::new();
        let mut nl: Vec<usize> = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if (en[i] - en[j] - e).abs() <= tol {
                    if !nr.contains(&j) {
                        nr.push(j);
                    }
                    if !nl.contains(&i) {
                        nl.push(i);
                    }
                }
            }
        }
        let nr_c: Vec<usize> = (0..n).filter(|k| !approx_in(&nr, *k)).collect();
        let nl_c: Vec<usize> = (0..n).filter(|k| !approx_in(&nl, *k)).collect();

        // G P_c G compressed to an index set; min eigenvalue of the block
        let block_min = |rows: &[usize], mid: &[usize]| -> f64 {
            if mid.is_empty() {
                return 0.0;
            }
            let mut block = CMat::zeros(rows.len(), rows.len());
            for (a, &i) in rows.iter().enumerate() {
                for (b, &j) in rows.iter().enumerate() {
                    let mut acc = cr(0.0);
                    for &k in mid {
                        acc += g[(i, k)] * g[(k, j)];
                    }
                    block[(a, b)] = acc;
                }
            }
            min_eig_hermitian(&block)
        };

        let mut inf_dm = f64::INFINITY;
        for &m in &nl {
            let nr_m: Vec<usize> =
                (0..n).filter(|&j| (en[m] - en[j] - e).abs() <= tol).collect();
            inf_dm = inf_dm.min(block_min(&nr_m, &nr_c));
        }
        let mut inf_dn = f64::INFINITY;
        for &nn in &nr {
            let nl_n: Vec<usize> =
                (0..n).filter(|&i| (en[i] - en[nn] - e).abs() <= tol).collect();
            inf_dn = inf_dn.min(block_min(&nl_n, &nl_c));
        }
        let delta_0 = if inf_dm.is_finite() && inf_dn.is_finite() {
            inf_dm + inf_dn
        } else {
            0.0
        };
        per_e.push(EigenvalueBound {
            e,
            multiplicity: spec.multiplicity(e).unwrap(),
            delta_0,
            part1_bound: delta_0 * inf_freq,
        });
    }

    // g₀: inf over ordered pairs (m, n) with E_mn < 0 of
    // |⟨φ_n, Gφ_m⟩|² · e^{βÊ_n}/(e^{−βE_mn}−1) · E_mn²·4π|g(−E_mn)|²,
    // the radial delta ∫δ(E_mn+ω)|g|² evaluated with the ω²dω dS measure.
    let gv = gibbs_vector(ps);
    let shift = gv.shift;
    let mut g_0 = f64::INFINITY;
    for m in 0..n {
        for nn in 0..n {
            let emn = en[m] - en[nn];
            if emn < -tol {
                let coupling = g[(nn, m)].norm_sqr();
                let boltz = (ps.beta * (en[nn] - shift)).exp() / (-ps.beta * emn).exp_m1();
                let gval = ff.value(-emn);
                g_0 = g_0.min(coupling * boltz * emn * emn * TAU * gval * gval);
            }
        }
    }
    if !g_0.is_finite() {
        g_0 = 0.0;
    }
    let gap = 2.0 * g_0 * gv.z_p;
    SpectralBounds { per_e, g_0, z_p: gv.z_p, gap }
}

#[derive(Debug, Clone, Serialize)]
pub struct FgrLine {
    pub e: f64,
    pub multiplicity: usize,
    /// γ_e for e ≠ 0; γ_0 (on the complement of the Gibbs vector) for e = 0.
    pub gamma_min: f64,
    /// Proven lower bound: part1 value for e ≠ 0, the gap 2g₀Z_p for e = 0.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FgrReport {
    pub lines: Vec<FgrLine>,
    pub g_0: f64,
    pub z_p: f64,
    pub gap: f64,
    pub threshold: f64,
    pub all_pass: bool,
}

pub const FGR_THRESHOLD: f64 = 1e-10;

/// Evaluate the strict-positivity conditions for every distinct eigenvalue
/// of L_p: γ_e = inf σ(Γ_p(e) ↾ Ran P(L_p=e)) for e ≠ 0, and γ_0 computed on
/// the orthogonal complement of the Gibbs vector inside Ran P(L_p=0).
pub fn fgr_condition(ps: &ParticleSystem, ff: &FormFactor) -> Result<FgrReport> {
    let (_, spec) = particle_liouvillian(ps);
    let bounds = theorem24_bounds(ps, ff);
    let gv = gibbs_vector(ps);
    let mut lines = Vec::new();
    for (&e, eb) in spec.distinct_values().iter().zip(&bounds.per_e) {
        let op = gamma_operator(ps, ff, e)?;
        let idx = spec.group_indices(e).unwrap();
        let basis = index_basis(ps.doubled_dim(), idx);
        let gamma_min = if e.abs() <= spec.tol_e {
            // deflate the Gibbs direction before taking the infimum
            let perp = complement_within(&basis, &gv.vector);
            if perp.ncols() == 0 {
                0.0
            } else {
                min_eig_hermitian(&compress(&op.gamma_p, &perp))
            }
        } else {
            min_eig_hermitian(&compress(&op.gamma_p, &basis))
        };
        let bound = if e.abs() <= spec.tol_e { bounds.gap } else { eb.part1_bound };
        lines.push(FgrLine {
            e,
            multiplicity: idx.len(),
            gamma_min,
            bound,
            pass: gamma_min > FGR_THRESHOLD,
        });
    }
    let all_pass = lines.iter().all(|l| l.pass);
    Ok(FgrReport {
        lines,
        g_0: bounds.g_0,
        z_p: bounds.z_p,
        gap: bounds.gap,
        threshold: FGR_THRESHOLD,
        all_pass,
    })
}

/// Independent Lorentzian evaluation (the regularized path):
/// returns (ε/π)·4π ∫ m*(u) P(L_p≠e) ((L_p−e+u)²+ε²)^{−1} m(u) du,
/// compressed to Ran P(L_p=e). Converges to Γ_p(e) as ε → 0.
pub fn lorentzian_gamma(
    ps: &ParticleSystem,
    ff: &FormFactor,
    e: f64,
    epsilon: f64,
    rel_tol: f64,
) -> Result<CMat> {
    if epsilon <= 0.0 {
        return Err(LlabError::Numerical("epsilon must be > 0".into()));
    }
    let (_, spec) = particle_liouvillian(ps);
    let pe = spec
        .projector(e)
        .ok_or_else(|| LlabError::Numerical(format!("e = {e} not in the spectrum of L_p")))?;
    let dim = ps.doubled_dim();
    let (gl, gr) = doubled_operators(ps);
    let tol_e = spec.tol_e;
    let eigs = spec.eigenvalues.clone();
    let beta = ps.beta;

    let integrand = |u: f64| -> CMat {
        if u == 0.0 {
            return CMat::zeros(dim, dim);
        }
        let g1 = glued_g1(ff, beta, u);
        let g2 = glued_g2(ff, beta, u);
        let m = &gl * g1 - &gr * g2;
        // diagonal weight P(L_p≠e)·((L_p−e+u)²+ε²)^{−1}
        let mut out = CMat::zeros(dim, dim);
        for row in 0..dim {
            let ek = eigs[row];
            if (ek - e).abs() <= tol_e {
                continue;
            }
            let w = 1.0 / ((ek - e + u).powi(2) + epsilon * epsilon);
            for col in 0..dim {
                out[(row, col)] = m[(row, col)] * cr(w);
            }
        }
        m.adjoint() * out
    };

    // split at the Lorentzian centers u = e − e_j and at the gluing point 0
    let u_cut = 50.0_f64.max(50.0 / beta)
        + spec.distinct_values().iter().fold(0.0f64, |a, &x| a.max((e - x).abs()));
    let mut cuts: Vec<f64> = vec![-u_cut, 0.0, u_cut];
    for &ej in &spec.distinct_values() {
        let c = e - ej;
        if c.abs() > tol_e && c.abs() < u_cut {
            cuts.push(c);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let scale = fro_norm(&gamma_operator(ps, ff, e)?.gamma_p).max(1e-30);
    let abs_tol = rel_tol * scale;
    let mut total = CMat::zeros(dim, dim);
    let mut achieved: f64 = 0.0;
    for w in cuts.windows(2) {
        let (part, err) =
            adaptive_simpson_matrix(&integrand, w[0], w[1], abs_tol / (cuts.len() - 1) as f64, 48);
        total += part;
        achieved += err;
    }
    if achieved > abs_tol * 10.0 {
        return Err(LlabError::Numerical(format!(
            "quadrature did not converge: achieved {achieved:.3e} vs requested {abs_tol:.3e}"
        )));
    }
    let result = &pe * total * &pe * cr(epsilon / std::f64::consts::PI * TAU);
    Ok((&result + result.adjoint()) * cr(0.5))
}

/// Quadratic form ⟨φ, Γ(0)φ⟩ for φ = Σ c_i φ_i⊗φ_i, via the closed
/// pair-sum over downward transitions. Used as an independent oracle for
/// the spectral-sum construction.
pub fn gamma0_quadratic_form(ps: &ParticleSystem, ff: &FormFactor, c: &[num_complex::Complex64]) -> f64 {
    let n = ps.n_levels();
    assert_eq!(c.len(), n);
    let en = &ps.energies;
    let shift = en[0];
    let beta = ps.beta;
    let tol = ps.tol_e();
    let mut total = 0.0;
    for m in 0..n {
        for nn in 0..n {
            let emn = en[m] - en[nn];
            if emn < -tol {
                let coupling = ps.coupling[(nn, m)].norm_sqr();
                let boltz = (beta * (en[nn] - shift)).exp() / (-beta * emn).exp_m1();
                let amp = (cr((-beta * (en[m] - shift) / 2.0).exp()) * c[nn]
                    - cr((-beta * (en[nn] - shift) / 2.0).exp()) * c[m])
                    .norm_sqr();
                let gval = ff.value(-emn);
                total += 2.0 * coupling * boltz * amp * emn * emn * TAU * gval * gval;
            }
        }
    }
    total
}

/// Eigendecomposition helper: the nonzero eigenvalues of Γ_p(e) on its range.
pub fn gamma_p_eigenvalues(op: &FgrOperator, ps: &ParticleSystem) -> Vec<f64> {
    let (_, spec) = particle_liouvillian(ps);
    let idx = spec.group_indices(op.e).unwrap();
    let basis = index_basis(ps.doubled_dim(), idx);
    eigh(&compress(&op.gamma_p, &basis)).0
}
