//! Spectral scans across the coupling, resonance-width extraction from the
//! smoothed spectral function, the perturbed equilibrium (zero-eigenvector)
//! family, and exact time dynamics with ergodic means.

use crate::error::{LlabError, Result};
use crate::linalg::{cr, eigh, fit_slope, op_norm_hermitian, CMat, CVec};
use crate::liouvillian::FullModel;
use num_complex::Complex64;
use serde::Serialize;

/// The full Liouvillian at a coupling different from the model's own.
pub fn full_at(model: &FullModel, lambda: f64) -> CMat {
    let mut l = &model.interaction * cr(lambda);
    for k in 0..model.dim() {
        l[(k, k)] += cr(model.l0_diag[k]);
    }
    l
}

/// Normalized vacuum-sector eigenvector of L₀ for the particle eigenvalue e:
/// the uniform combination of the basis states in the group, dressed by the
/// field vacuum. At λ = 0 this is an exact eigenvector of L.
pub fn embedded_vector(model: &FullModel, e: f64) -> Result<CVec> {
    let idx = model
        .q_indices(e)
        .ok_or_else(|| LlabError::Config(format!("e = {e} not in the spectrum of L_p")))?;
    let mut v = CVec::zeros(model.dim());
    let w = cr(1.0 / (idx.len() as f64).sqrt());
    for &k in &idx {
        v[k] = w;
    }
    Ok(v)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanLine {
    pub lambda: f64,
    /// Eigenvalues of L inside the window.
    pub eigenvalues: Vec<f64>,
    /// max_k |⟨ψ_e⁰, v_k⟩|² — drops below 1 as the embedded eigenvector
    /// delocalizes.
    pub max_overlap: f64,
    /// Eigenvalue of L closest to zero.
    pub zero_eigenvalue: f64,
    /// Number of eigenvalues within the kernel tolerance of zero. The
    /// spectrum of L is symmetric (an antiunitary conjugation anticommutes
    /// with L), so at even total dimension the equilibrium zero mode carries
    /// an exact partner: 2 is the generic value, not a defect.
    pub kernel_dim: usize,
    /// Distance from the zero group to the nearest eigenvalue outside it.
    pub zero_gap: f64,
    /// ‖Lv − μv‖ for the eigenpair closest to zero.
    pub zero_residual: f64,
}

/// Indices of eigenvalues within the kernel tolerance of zero.
fn kernel_indices(vals: &[f64], scale: f64) -> Vec<usize> {
    let tol = 1e-10 * scale.max(1.0);
    (0..vals.len()).filter(|&k| vals[k].abs() <= tol).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralScan {
    pub e: f64,
    pub window: (f64, f64),
    pub lines: Vec<ScanLine>,
}

pub fn eigen_scan(
    model: &FullModel,
    lambda_grid: &[f64],
    e: f64,
    window: (f64, f64),
) -> Result<SpectralScan> {
    if window.0 >= window.1 {
        return Err(LlabError::Config("window must be a nonempty interval".into()));
    }
    let psi0 = embedded_vector(model, e)?;
    let mut lines = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let l = full_at(model, lambda);
        let (vals, vecs) = eigh(&l);
        let eigenvalues: Vec<f64> =
            vals.iter().copied().filter(|&x| x > window.0 && x < window.1).collect();
        let mut max_overlap: f64 = 0.0;
        for k in 0..vals.len() {
            let ov = psi0.dotc(&vecs.column(k).into_owned()).norm_sqr();
            max_overlap = max_overlap.max(ov);
        }
        let k0 = (0..vals.len())
            .min_by(|&a, &b| vals[a].abs().partial_cmp(&vals[b].abs()).unwrap())
            .unwrap();
        let zero_eigenvalue = vals[k0];
        let scale = op_norm_hermitian(&l);
        let kernel = kernel_indices(vals.as_slice(), scale);
        let kernel_dim = kernel.len().max(1);
        let zero_gap = vals
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != k0 && !kernel.contains(&k))
            .map(|(_, &x)| (x - zero_eigenvalue).abs())
            .fold(f64::INFINITY, f64::min);
        let v0 = vecs.column(k0).into_owned();
        let zero_residual = (&l * &v0 - &v0 * cr(zero_eigenvalue)).norm();
        lines.push(ScanLine {
            lambda,
            eigenvalues,
            max_overlap,
            zero_eigenvalue,
            kernel_dim,
            zero_gap,
            zero_residual,
        });
    }
    Ok(SpectralScan { e, window, lines })
}

/// Smoothed spectral function S(x) = Im⟨ψ⁰, (L − x − iη)^{-1}ψ⁰⟩
/// = Σ_k |⟨v_k,ψ⁰⟩|² η/((μ_k − x)² + η²), evaluated from an eigenpair list.
pub fn spectral_function(weights: &[(f64, f64)], x: f64, eta: f64) -> f64 {
    weights
        .iter()
        .map(|&(mu, w)| w * eta / ((mu - x) * (mu - x) + eta * eta))
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct LorentzianFit {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    /// RMS residual over the fitted points, relative to the peak amplitude.
    pub residual: f64,
}

/// Least-squares Lorentzian a·w²/((x−x₀)²+w²) on the points at or above half
/// maximum; initialized from the discrete peak and interpolated half-width.
pub fn fit_lorentzian(xs: &[f64], ys: &[f64]) -> Result<LorentzianFit> {
    let n = xs.len();
    if n < 5 {
        return Err(LlabError::Numerical("too few samples for a Lorentzian fit".into()));
    }
    let kp = (0..n).max_by(|&a, &b| ys[a].partial_cmp(&ys[b]).unwrap()).unwrap();
    let peak = ys[kp];
    if !(peak > 0.0) {
        return Err(LlabError::Numerical("spectral function has no positive peak".into()));
    }
    let half = peak / 2.0;
    let cross = |mut k: usize, step: i64| -> Option<f64> {
        loop {
            let next = k as i64 + step;
            if next < 0 || next as usize >= n {
                return None;
            }
            let j = next as usize;
            if ys[j] < half {
                let t = (ys[k] - half) / (ys[k] - ys[j]);
                return Some(xs[k] + t * (xs[j] - xs[k]));
            }
            k = j;
        }
    };
    let left = cross(kp, -1).ok_or_else(|| {
        LlabError::Numerical("half-maximum level not reached on the left".into())
    })?;
    let right = cross(kp, 1).ok_or_else(|| {
        LlabError::Numerical("half-maximum level not reached on the right".into())
    })?;
    let mut a = peak;
    let mut x0 = xs[kp];
    let mut w = 0.5 * (right - left);

    // Gauss-Newton on the central (>= half max) points
    let sel: Vec<usize> = (0..n).filter(|&k| ys[k] >= half).collect();
    for _ in 0..50 {
        let mut jt_j = [[0.0f64; 3]; 3];
        let mut jt_r = [0.0f64; 3];
        for &k in &sel {
            let dx = xs[k] - x0;
            let den = dx * dx + w * w;
            let model = a * w * w / den;
            let r = ys[k] - model;
            let da = w * w / den;
            let dx0 = a * w * w * 2.0 * dx / (den * den);
            let dw = 2.0 * a * w * dx * dx / (den * den);
            let grad = [da, dx0, dw];
            for i in 0..3 {
                jt_r[i] += grad[i] * r;
                for j in 0..3 {
                    jt_j[i][j] += grad[i] * grad[j];
                }
            }
        }
        let m = nalgebra::Matrix3::from_fn(|i, j| jt_j[i][j]);
        let rhs = nalgebra::Vector3::from_row_slice(&jt_r);
        let step = match m.lu().solve(&rhs) {
            Some(s) => s,
            None => break,
        };
        a += step[0];
        x0 += step[1];
        w += step[2];
        if step.norm() < 1e-14 * (a.abs() + w.abs() + 1.0) {
            break;
        }
    }
    if !(w > 0.0 && a > 0.0) {
        return Err(LlabError::Numerical("Lorentzian fit diverged".into()));
    }
    let mut ss = 0.0;
    for &k in &sel {
        let dx = xs[k] - x0;
        let r = ys[k] - a * w * w / (dx * dx + w * w);
        ss += r * r;
    }
    let residual = (ss / sel.len() as f64).sqrt() / a;
    Ok(LorentzianFit { amplitude: a, center: x0, width: w, residual })
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceLine {
    pub lambda: f64,
    pub width: f64,
    /// width − η baseline.
    pub excess: f64,
    pub fit_residual: f64,
    pub center: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceReport {
    pub e: f64,
    pub eta: f64,
    pub lines: Vec<ResonanceLine>,
    /// Log-log slope of (width − η) against λ.
    pub slope: f64,
    /// Median of (width − η)/λ², for comparison against π·γ_e.
    pub prefactor: f64,
}

pub fn resonance_width(
    model: &FullModel,
    e: f64,
    lambda_grid: &[f64],
    eta: f64,
) -> Result<ResonanceReport> {
    if eta <= 0.0 {
        return Err(LlabError::Config("eta must be positive".into()));
    }
    let psi0 = embedded_vector(model, e)?;
    let span = 12.0 * eta;
    let n_x = 801;
    let mut lines = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let l = full_at(model, lambda);
        let (vals, vecs) = eigh(&l);
        let weights: Vec<(f64, f64)> = (0..vals.len())
            .map(|k| (vals[k], psi0.dotc(&vecs.column(k).into_owned()).norm_sqr()))
            .collect();
        // center the scan on the weighted mean near e rather than e itself:
        // the level shift is also O(λ²) and would bias the width otherwise
        let xs: Vec<f64> = (0..n_x)
            .map(|k| e - span + 2.0 * span * (k as f64) / ((n_x - 1) as f64))
            .collect();
        let ys: Vec<f64> = xs.iter().map(|&x| spectral_function(&weights, x, eta)).collect();
        let fit = fit_lorentzian(&xs, &ys)?;
        lines.push(ResonanceLine {
            lambda,
            width: fit.width,
            excess: fit.width - eta,
            fit_residual: fit.residual,
            center: fit.center,
        });
    }
    let positive: Vec<&ResonanceLine> =
        lines.iter().filter(|l| l.lambda > 0.0 && l.excess > 0.0).collect();
    let (slope, prefactor) = if positive.len() >= 2 {
        let lx: Vec<f64> = positive.iter().map(|l| l.lambda.ln()).collect();
        let ly: Vec<f64> = positive.iter().map(|l| l.excess.ln()).collect();
        let slope = fit_slope(&lx, &ly);
        let mut pref: Vec<f64> =
            positive.iter().map(|l| l.excess / (l.lambda * l.lambda)).collect();
        pref.sort_by(|a, b| a.partial_cmp(b).unwrap());
        (slope, pref[pref.len() / 2])
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(ResonanceReport { e, eta, lines, slope, prefactor })
}

#[derive(Debug, Clone, Serialize)]
pub struct KmsVectorLine {
    pub lambda: f64,
    pub eigenvalue: f64,
    pub residual: f64,
    pub distance: f64,
    /// Distance from zero to the nearest eigenvalue outside the kernel group.
    pub gap: f64,
    /// Dimension of the numerical kernel (generically 2, see [`ScanLine`]).
    pub kernel_dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct KmsFamily {
    pub beta: f64,
    pub lines: Vec<KmsVectorLine>,
    /// Log-log slope of distance against λ over the nonzero couplings.
    pub slope: f64,
}

/// Zero-eigenvector family across the coupling grid. The phase is fixed by a
/// positive overlap with the uncoupled equilibrium vector Ω_{β,0}.
pub fn kms_vectors(model: &FullModel, lambda_grid: &[f64]) -> Result<KmsFamily> {
    let omega0 = model.reference_vector();
    let mut lines = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let (vec, line) = kms_vector_at(model, lambda, &omega0)?;
        let _ = vec;
        lines.push(line);
    }
    let nz: Vec<&KmsVectorLine> =
        lines.iter().filter(|l| l.lambda > 0.0 && l.distance > 0.0).collect();
    let slope = if nz.len() >= 2 {
        let lx: Vec<f64> = nz.iter().map(|l| l.lambda.ln()).collect();
        let ly: Vec<f64> = nz.iter().map(|l| l.distance.ln()).collect();
        fit_slope(&lx, &ly)
    } else {
        f64::NAN
    };
    Ok(KmsFamily { beta: model.ps.beta, lines, slope })
}

/// Equilibrium zero-mode of L at the given coupling: the normalized
/// projection of the uncoupled equilibrium vector Ω_{β,0} onto the numerical
/// kernel of L. The spectrum of L is symmetric under an antiunitary
/// conjugation that anticommutes with it, so at even dimension the
/// equilibrium zero eigenvalue carries an exact partner; projecting Ω_{β,0}
/// selects the equilibrium direction in a basis-independent, deterministic
/// way instead of relying on an (arbitrary) eigenvector basis of the
/// degenerate pair.
pub fn kms_vector_at(
    model: &FullModel,
    lambda: f64,
    omega0: &CVec,
) -> Result<(CVec, KmsVectorLine)> {
    let l = full_at(model, lambda);
    let (vals, vecs) = eigh(&l);
    let scale = op_norm_hermitian(&l);
    let kernel = kernel_indices(vals.as_slice(), scale);
    if kernel.is_empty() {
        let closest = vals.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        return Err(LlabError::Numerical(format!(
            "no zero eigenvalue of L at lambda = {lambda} (closest eigenvalue {closest:.3e})"
        )));
    }
    let gap = vals
        .iter()
        .enumerate()
        .filter(|(k, _)| !kernel.contains(k))
        .map(|(_, &x)| x.abs())
        .fold(f64::INFINITY, f64::min);
    let mut v = CVec::zeros(vals.len());
    for &k in &kernel {
        let col = vecs.column(k).into_owned();
        let c = col.dotc(omega0);
        v += col * c;
    }
    let nv = v.norm();
    if nv < 1e-6 {
        return Err(LlabError::Numerical(format!(
            "equilibrium vector has no component in the kernel of L at lambda = {lambda} \
             (projection norm {nv:.3e})"
        )));
    }
    v /= cr(nv);
    let lv = &l * &v;
    let eigenvalue = v.dotc(&lv).re;
    let residual = (&lv - &v * cr(eigenvalue)).norm();
    let distance = (&v - omega0).norm();
    let line = KmsVectorLine {
        lambda,
        eigenvalue,
        residual,
        distance,
        gap,
        kernel_dim: kernel.len(),
    };
    Ok((v, line))
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub running_means: Vec<f64>,
    /// Equilibrium expectation ⟨Ω_λ, A Ω_λ⟩ (zero-eigenvector state).
    pub target: f64,
    /// Σ over distinct eigenvalues μ of ⟨P_μψ, A P_μψ⟩ — the exact infinite-
    /// time Cesàro limit for the finite model.
    pub cesaro_limit: f64,
    pub heisenberg_time: f64,
    pub a_norm: f64,
    /// Max deviation of ‖e^{−itL}ψ‖ from 1 over the grid.
    pub unitarity_defect: f64,
}

/// Exact time evolution ⟨ψ, e^{itL} A e^{−itL} ψ⟩ by eigendecomposition.
pub fn evolve(model: &FullModel, psi: &CVec, a: &CMat, t_max: f64, dt: f64) -> Result<TimeSeries> {
    if (psi.norm() - 1.0).abs() > 1e-10 {
        return Err(LlabError::Config("initial state must be a unit vector".into()));
    }
    let herm = crate::linalg::hermiticity_defect(a);
    if herm > 1e-10 * op_norm_hermitian(a).max(1.0) {
        return Err(LlabError::Config("observable must be Hermitian".into()));
    }
    let l = model.full();
    let l_norm = op_norm_hermitian(&l);
    if dt <= 0.0 || (l_norm > 0.0 && dt > std::f64::consts::PI / l_norm) {
        return Err(LlabError::Config(format!(
            "dt must lie in (0, pi/||L||] = (0, {:.6}]",
            std::f64::consts::PI / l_norm
        )));
    }
    let (vals, vecs) = eigh(&l);
    let c = vecs.adjoint() * psi;
    let a_norm = op_norm_hermitian(a);

    // Heisenberg time from the minimal spacing of distinct eigenvalues
    let mut sorted = vals.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let tol = 1e-10 * (sorted.last().unwrap() - sorted[0]).abs().max(1.0);
    let mut min_gap = f64::INFINITY;
    for w in sorted.windows(2) {
        let g = w[1] - w[0];
        if g > tol {
            min_gap = min_gap.min(g);
        }
    }
    let heisenberg_time =
        if min_gap.is_finite() { 2.0 * std::f64::consts::PI / min_gap } else { f64::INFINITY };

    // Cesàro limit grouped by distinct eigenvalues
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    let mut cesaro = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && vals[order[end]] - vals[order[start]] <= tol {
            end += 1;
        }
        let mut proj = CVec::zeros(psi.len());
        for &k in &order[start..end] {
            proj += vecs.column(k) * c[k];
        }
        cesaro += proj.dotc(&(a * &proj)).re;
        start = end;
    }

    let n_steps = (t_max / dt).floor() as usize + 1;
    let mut times = Vec::with_capacity(n_steps);
    let mut values = Vec::with_capacity(n_steps);
    let mut running_means = Vec::with_capacity(n_steps);
    let mut unitarity_defect: f64 = 0.0;
    let mut integral = 0.0;
    let mut prev_value = 0.0;
    for step in 0..n_steps {
        let t = step as f64 * dt;
        let mut phased = c.clone();
        for k in 0..vals.len() {
            phased[k] *= Complex64::from_polar(1.0, -vals[k] * t);
        }
        let psi_t = &vecs * phased;
        unitarity_defect = unitarity_defect.max((psi_t.norm() - 1.0).abs());
        let value = psi_t.dotc(&(a * &psi_t)).re;
        times.push(t);
        values.push(value);
        if step == 0 {
            running_means.push(value);
        } else {
            integral += 0.5 * dt * (prev_value + value);
            running_means.push(integral / t);
        }
        prev_value = value;
    }

    // equilibrium target from the kernel projection of Ω_{β,0} at this
    // coupling (same convention as kms_vector_at)
    let omega0 = model.reference_vector();
    let kernel = kernel_indices(vals.as_slice(), l_norm);
    let mut omega = CVec::zeros(vals.len());
    for &k in &kernel {
        let col = vecs.column(k).into_owned();
        let cf = col.dotc(&omega0);
        omega += col * cf;
    }
    let target = if omega.norm() > 1e-8 {
        omega /= cr(omega.norm());
        omega.dotc(&(a * &omega)).re
    } else {
        f64::NAN
    };

    Ok(TimeSeries {
        times,
        values,
        running_means,
        target,
        cesaro_limit: cesaro,
        heisenberg_time,
        a_norm,
        unitarity_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{glue, FockModel, FormFactor, ModeGrid};
    use crate::liouvillian::{assemble, DEFAULT_DIM_CAP};
    use crate::particle::ParticleSystem;

    fn model(lambda: f64, n_u: usize, u_max: f64, n_max: usize, beta: f64) -> FullModel {
        let g = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)]);
        let ps = ParticleSystem::new(vec![0.0, 1.0], g, beta).unwrap();
        let ff = FormFactor::new(0.5, 3.0, 1.0).unwrap();
        let grid = ModeGrid::new(u_max, n_u).unwrap();
        let fock = FockModel::new(grid.clone(), n_max).unwrap();
        let samples = glue(&ff, beta, &grid).unwrap();
        assemble(ps, fock, samples, lambda, DEFAULT_DIM_CAP).unwrap()
    }

    // the pure sigma_x coupling additionally conserves the parity
    // (−1)^{i+j+N}; diagonal entries in G break that extra symmetry and keep
    // the kernel of L at its generic dimension
    fn model_pb(lambda: f64, n_u: usize, u_max: f64, n_max: usize, beta: f64) -> FullModel {
        let g = CMat::from_row_slice(2, 2, &[cr(0.25), cr(1.0), cr(1.0), cr(-0.35)]);
        let ps = ParticleSystem::new(vec![0.0, 1.0], g, beta).unwrap();
        let ff = FormFactor::new(0.5, 3.0, 1.0).unwrap();
        let grid = ModeGrid::new(u_max, n_u).unwrap();
        let fock = FockModel::new(grid.clone(), n_max).unwrap();
        let samples = glue(&ff, beta, &grid).unwrap();
        assemble(ps, fock, samples, lambda, DEFAULT_DIM_CAP).unwrap()
    }

    #[test]
    fn overlap_is_one_uncoupled_and_decreases() {
        let m = model(0.0, 10, 3.0, 2, 1.0);
        let scan = eigen_scan(&m, &[0.0, 0.02, 0.05, 0.1], 1.0, (0.5, 1.5)).unwrap();
        let ov: Vec<f64> = scan.lines.iter().map(|l| l.max_overlap).collect();
        assert!((ov[0] - 1.0).abs() < 1e-12);
        assert!(ov[1] < ov[0] && ov[2] < ov[1] && ov[3] < ov[2], "{ov:?}");
    }

    #[test]
    fn zero_eigenvalue_persists() {
        let m = model_pb(0.0, 10, 3.0, 2, 1.0);
        let scan = eigen_scan(&m, &[0.02, 0.05, 0.1], 0.0, (-0.5, 0.5)).unwrap();
        for line in &scan.lines {
            assert!(
                line.zero_eigenvalue.abs() <= 1e-9,
                "lambda {}: zero eigenvalue {}",
                line.lambda,
                line.zero_eigenvalue
            );
            assert!(line.zero_residual <= 1e-9);
            assert!(line.zero_gap > 1e-6);
        }
    }

    #[test]
    fn lorentzian_fit_recovers_parameters() {
        let xs: Vec<f64> = (0..401).map(|k| -2.0 + 4.0 * k as f64 / 400.0).collect();
        let (a, x0, w) = (3.0, 0.3, 0.25);
        let ys: Vec<f64> =
            xs.iter().map(|&x| a * w * w / ((x - x0) * (x - x0) + w * w)).collect();
        let fit = fit_lorentzian(&xs, &ys).unwrap();
        assert!((fit.amplitude - a).abs() < 1e-10);
        assert!((fit.center - x0).abs() < 1e-10);
        assert!((fit.width - w).abs() < 1e-10);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn resonance_baseline_at_zero_coupling() {
        let m = model(0.0, 10, 3.0, 2, 1.0);
        let eta = 0.05;
        let rep = resonance_width(&m, 1.0, &[0.0], eta).unwrap();
        assert!((rep.lines[0].width - eta).abs() < 1e-10 * eta.max(1.0));
    }

    #[test]
    fn resonance_width_scaling() {
        let m = model(0.0, 16, 3.0, 2, 1.0);
        let eta = 0.05;
        let lambdas = [0.02, 0.03, 0.05, 0.08, 0.12];
        let rep = resonance_width(&m, 1.0, &lambdas, eta).unwrap();
        assert!(rep.slope > 1.7 && rep.slope < 2.3, "slope {}", rep.slope);
        // prefactor against the golden-rule eigenvalue at e = 1
        let ff = FormFactor::new(0.5, 3.0, 1.0).unwrap();
        let gamma = crate::fgr::gamma_operator(&m.ps, &ff, 1.0).unwrap();
        let idx = m.spectrum.group_indices(1.0).unwrap();
        let basis = crate::linalg::index_basis(m.dim_p(), idx);
        let gamma_e =
            crate::linalg::min_eig_hermitian(&crate::linalg::compress(&gamma.gamma_p, &basis));
        let expect = std::f64::consts::PI * gamma_e;
        assert!(
            rep.prefactor > expect / 3.0 && rep.prefactor < expect * 3.0,
            "prefactor {} vs pi*gamma_e {}",
            rep.prefactor,
            expect
        );
    }

    #[test]
    fn kms_distance_zero_at_zero_coupling() {
        let m = model_pb(0.0, 10, 3.0, 2, 1.0);
        let fam = kms_vectors(&m, &[0.0]).unwrap();
        assert!(fam.lines[0].distance < 1e-10);
        assert!(fam.lines[0].residual < 1e-10);
    }

    #[test]
    fn kms_distance_linear_in_lambda() {
        let m = model_pb(0.0, 10, 3.0, 2, 1.0);
        let lambdas = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1];
        let fam = kms_vectors(&m, &lambdas).unwrap();
        assert!(
            fam.slope > 0.85 && fam.slope < 1.15,
            "slope {} distances {:?}",
            fam.slope,
            fam.lines.iter().map(|l| l.distance).collect::<Vec<_>>()
        );
    }

    #[test]
    fn kms_distance_grows_with_beta() {
        let lambda = 0.05;
        let mut prev = 0.0;
        for &beta in &[1.0, 2.0, 4.0] {
            let m = model_pb(lambda, 10, 3.0, 2, beta);
            let fam = kms_vectors(&m, &[lambda]).unwrap();
            let d = fam.lines[0].distance;
            assert!(d > prev, "beta {beta}: distance {d} vs previous {prev}");
            prev = d;
        }
    }

    #[test]
    fn evolve_stationary_on_equilibrium() {
        let m = model_pb(0.1, 8, 3.0, 1, 1.0);
        let omega0 = m.reference_vector();
        let (omega, _) = kms_vector_at(&m, 0.1, &omega0).unwrap();
        let a = m.lift_particle(&m.gl);
        let ts = evolve(&m, &omega, &a, 5.0, 0.05).unwrap();
        for &v in &ts.values {
            assert!((v - ts.target).abs() < 1e-10);
        }
        assert!(ts.unitarity_defect < 1e-12);
    }

    #[test]
    fn evolve_identity_is_constant_one() {
        let m = model(0.1, 8, 3.0, 1, 1.0);
        let mut psi = CVec::zeros(m.dim());
        psi[3] = cr(1.0);
        let a = CMat::identity(m.dim(), m.dim());
        let ts = evolve(&m, &psi, &a, 2.0, 0.05).unwrap();
        for &v in &ts.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ergodic_mean_approaches_cesaro_limit() {
        let m = model_pb(0.1, 10, 3.0, 1, 1.0);
        let psi = embedded_vector(&m, 1.0).unwrap();
        // survival probability of the embedded state: decays and has a
        // nontrivial ergodic mean
        let a = &psi * psi.adjoint();
        let l_norm = op_norm_hermitian(&m.full());
        let dt = (std::f64::consts::PI / l_norm).min(0.05);
        let t_h = {
            let probe = evolve(&m, &psi, &a, dt, dt).unwrap();
            probe.heisenberg_time
        };
        let ts = evolve(&m, &psi, &a, t_h / 2.0, dt).unwrap();
        let at = |frac: f64| {
            let t = t_h * frac;
            let k = ts.times.iter().position(|&x| x >= t).unwrap_or(ts.times.len() - 1);
            (ts.running_means[k] - ts.cesaro_limit).abs()
        };
        let early = at(1.0 / 20.0);
        let late = at(0.499);
        assert!(late <= early / 5.0, "early {early}, late {late}");
        for &mean in &ts.running_means {
            assert!(mean.abs() <= ts.a_norm + 1e-10);
        }
    }



}
