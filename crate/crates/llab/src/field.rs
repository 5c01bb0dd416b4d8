//! Thermal field data: form factor, Planck density, glued functions on a
//! symmetric u-grid, truncated Fock space and second-quantized operators.

use crate::error::{LlabError, Result};
use crate::linalg::{cr, CMat};
use num_complex::Complex64;

/// Radial form factor g(ω) = amplitude · ω^p · e^{−ω} for ω > 0.
///
/// The power-exponential family satisfies the IR envelope ω^p and any UV
/// envelope ω^{−q}; `q` is recorded but not sharp for this profile.
#[derive(Debug, Clone, Copy)]
pub struct FormFactor {
    pub ir_exponent: f64,
    pub uv_exponent: f64,
    pub amplitude: f64,
}

impl FormFactor {
    pub fn new(p: f64, q: f64, amplitude: f64) -> Result<Self> {
        if p <= 0.0 {
            return Err(LlabError::Config(format!(
                "infrared violation: ir_exponent p must be > 0, got {p}"
            )));
        }
        if amplitude <= 0.0 {
            return Err(LlabError::Config("form factor amplitude must be > 0".into()));
        }
        Ok(FormFactor { ir_exponent: p, uv_exponent: q, amplitude })
    }

    pub fn value(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return 0.0;
        }
        self.amplitude * omega.powf(self.ir_exponent) * (-omega).exp()
    }

    /// Analytic ∂_ω g.
    pub fn deriv(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return 0.0;
        }
        let p = self.ir_exponent;
        self.amplitude * (-omega).exp() * (p * omega.powf(p - 1.0) - omega.powf(p))
    }
}

/// Planck density μ(ω) = 1/(e^{βω} − 1), stable for small βω via expm1.
pub fn planck_density(beta: f64, omega: f64) -> Result<f64> {
    if omega <= 0.0 {
        return Err(LlabError::Numerical(format!("planck density needs omega > 0, got {omega}")));
    }
    Ok(1.0 / (beta * omega).exp_m1())
}

/// Symmetric midpoint grid on [−u_max, u_max] with u = 0 excluded: even n_u
/// nodes straddle zero at half-step offsets, uniform weights.
#[derive(Debug, Clone)]
pub struct ModeGrid {
    pub u_max: f64,
    pub n_u: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ModeGrid {
    pub fn new(u_max: f64, n_u: usize) -> Result<Self> {
        if u_max <= 0.0 {
            return Err(LlabError::Config("u_max must be > 0".into()));
        }
        if n_u == 0 || n_u % 2 != 0 {
            return Err(LlabError::Config("n_u must be a positive even integer".into()));
        }
        let h = 2.0 * u_max / n_u as f64;
        // build the positive half and mirror so symmetry is exact
        let half = n_u / 2;
        let mut nodes = vec![0.0; n_u];
        for k in 0..half {
            let u = (k as f64 + 0.5) * h;
            nodes[half + k] = u;
            nodes[half - 1 - k] = -u;
        }
        let weights = vec![h; n_u];
        Ok(ModeGrid { u_max, n_u, nodes, weights })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.u_max / self.n_u as f64
    }

    /// Quadrature inner product ⟨f, h⟩ = Σ w_j conj(f_j) h_j.
    pub fn inner(&self, f: &[Complex64], h: &[Complex64]) -> Complex64 {
        self.weights
            .iter()
            .zip(f.iter().zip(h))
            .map(|(&w, (a, b))| cr(w) * a.conj() * b)
            .sum()
    }

    pub fn norm_sq(&self, f: &[Complex64]) -> f64 {
        self.weights.iter().zip(f).map(|(&w, a)| w * a.norm_sqr()).sum()
    }
}

/// Glued function g₁ of the Jakšić–Pillet doubling, evaluated pointwise:
///   g₁(u) = √(1+μ(u)) · u · g(u)        for u ≥ 0,
///   g₁(u) = √(μ(−u)) · u · ḡ(−u)        for u < 0.
pub fn glued_g1(ff: &FormFactor, beta: f64, u: f64) -> Complex64 {
    if u == 0.0 {
        return cr(0.0);
    }
    if u > 0.0 {
        let mu = 1.0 / (beta * u).exp_m1();
        cr((1.0 + mu).sqrt() * u * ff.value(u))
    } else {
        let s = -u;
        // √μ(s)·u computed as a sign-stable product: for large βs the factor
        // e^{−βs/2} decays without intermediate overflow of μ.
        let mu = 1.0 / (beta * s).exp_m1();
        cr(mu.sqrt() * u * ff.value(s))
    }
}

/// g₂(u) = −g₁(−u).
pub fn glued_g2(ff: &FormFactor, beta: f64, u: f64) -> Complex64 {
    -glued_g1(ff, beta, -u)
}

/// Analytic ∂_u g₁ for the canonical profile.
pub fn glued_dg1(ff: &FormFactor, beta: f64, u: f64) -> Complex64 {
    if u == 0.0 {
        return cr(0.0);
    }
    if u > 0.0 {
        let mu = 1.0 / (beta * u).exp_m1();
        // μ' = −β μ (1 + μ)
        let dmu = -beta * mu * (1.0 + mu);
        let root = (1.0 + mu).sqrt();
        let g = ff.value(u);
        let dg = ff.deriv(u);
        cr(dmu / (2.0 * root) * u * g + root * (g + u * dg))
    } else {
        let s = -u;
        let mu = 1.0 / (beta * s).exp_m1();
        let dmu = -beta * mu * (1.0 + mu);
        let root = mu.sqrt();
        let g = ff.value(s);
        let dg = ff.deriv(s);
        // d/du [√μ(−u) · u · g(−u)] with s = −u
        cr(root * g + u * (-dmu / (2.0 * root) * g - root * dg))
    }
}

pub fn glued_dg2(ff: &FormFactor, beta: f64, u: f64) -> Complex64 {
    glued_dg1(ff, beta, -u)
}

/// Samples of the glued functions and their derivatives on a mode grid.
#[derive(Debug, Clone)]
pub struct GluedSamples {
    pub grid: ModeGrid,
    pub beta: f64,
    pub g1: Vec<Complex64>,
    pub g2: Vec<Complex64>,
    pub dg1: Vec<Complex64>,
    pub dg2: Vec<Complex64>,
    /// u · ∂_u g₁ on the grid.
    pub u_dg1: Vec<Complex64>,
}

pub fn glue(ff: &FormFactor, beta: f64, grid: &ModeGrid) -> Result<GluedSamples> {
    if ff.ir_exponent <= 0.0 {
        return Err(LlabError::Config("infrared violation: p <= 0 makes ||g1/u|| diverge".into()));
    }
    if beta <= 0.0 {
        return Err(LlabError::Config("beta must be positive".into()));
    }
    let g1: Vec<Complex64> = grid.nodes.iter().map(|&u| glued_g1(ff, beta, u)).collect();
    let g2: Vec<Complex64> = grid.nodes.iter().map(|&u| glued_g2(ff, beta, u)).collect();
    let dg1: Vec<Complex64> = grid.nodes.iter().map(|&u| glued_dg1(ff, beta, u)).collect();
    let dg2: Vec<Complex64> = grid.nodes.iter().map(|&u| glued_dg2(ff, beta, u)).collect();
    let u_dg1: Vec<Complex64> =
        grid.nodes.iter().zip(&dg1).map(|(&u, d)| cr(u) * d).collect();
    Ok(GluedSamples { grid: grid.clone(), beta, g1, g2, dg1, dg2, u_dg1 })
}

/// Truncated bosonic Fock space over the grid modes: all occupation tuples
/// with total photon number ≤ n_max, lexicographically ordered, vacuum first.
#[derive(Debug, Clone)]
pub struct FockModel {
    pub grid: ModeGrid,
    pub n_max: usize,
    pub basis: Vec<Vec<u8>>,
    index: std::collections::HashMap<Vec<u8>, usize>,
}

impl FockModel {
    pub fn new(grid: ModeGrid, n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(LlabError::Config("n_max must be >= 1".into()));
        }
        let n_modes = grid.n_u;
        let mut basis: Vec<Vec<u8>> = Vec::new();
        let mut current = vec![0u8; n_modes];
        enumerate(&mut basis, &mut current, 0, n_max);
        basis.sort();
        // vacuum must land first under lexicographic order
        debug_assert!(basis[0].iter().all(|&n| n == 0));
        let index = basis.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect();
        Ok(FockModel { grid, n_max, basis, index })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn total_occupation(&self, state: usize) -> usize {
        self.basis[state].iter().map(|&n| n as usize).sum()
    }

    pub fn lookup(&self, occ: &[u8]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    /// Diagonal of the number operator N = dΓ(1).
    pub fn number_diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|s| self.total_occupation(s) as f64).collect()
    }
}

fn enumerate(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, mode: usize, budget: usize) {
    if mode == current.len() {
        out.push(current.clone());
        return;
    }
    for n in 0..=budget {
        current[mode] = n as u8;
        enumerate(out, current, mode + 1, budget - n);
    }
    current[mode] = 0;
}

/// Matrix of the smeared annihilation operator
/// a(f) = Σ_j √w_j · conj(f(u_j)) · a_j in the occupation basis.
pub fn annihilation(f_samples: &[Complex64], fock: &FockModel) -> Result<CMat> {
    if f_samples.len() != fock.grid.n_u {
        return Err(LlabError::Numerical(format!(
            "sample length {} does not match n_u {}",
            f_samples.len(),
            fock.grid.n_u
        )));
    }
    let dim = fock.dim();
    let mut m = CMat::zeros(dim, dim);
    for (col, occ) in fock.basis.iter().enumerate() {
        for j in 0..fock.grid.n_u {
            if occ[j] == 0 {
                continue;
            }
            let mut lowered = occ.clone();
            lowered[j] -= 1;
            let row = fock.lookup(&lowered).expect("lowered state in basis");
            let amp = (occ[j] as f64).sqrt() * fock.grid.weights[j].sqrt();
            m[(row, col)] += cr(amp) * f_samples[j].conj();
        }
    }
    Ok(m)
}

pub fn creation(f_samples: &[Complex64], fock: &FockModel) -> Result<CMat> {
    Ok(annihilation(f_samples, fock)?.adjoint())
}

/// a(f) + a*(f), the field part of the interaction.
pub fn field_operator(f_samples: &[Complex64], fock: &FockModel) -> Result<CMat> {
    let a = annihilation(f_samples, fock)?;
    let ad = a.adjoint();
    Ok(a + ad)
}

/// Second quantization of a diagonal one-particle multiplier:
/// dΓ(M) |n⟩ = (Σ_j n_j M_j) |n⟩.
pub fn second_quantize_diagonal(multiplier: &[f64], fock: &FockModel) -> Result<CMat> {
    if multiplier.len() != fock.grid.n_u {
        return Err(LlabError::Numerical("multiplier length mismatch".into()));
    }
    let dim = fock.dim();
    let mut m = CMat::zeros(dim, dim);
    for (s, occ) in fock.basis.iter().enumerate() {
        let val: f64 = occ.iter().zip(multiplier).map(|(&n, &x)| n as f64 * x).sum();
        m[(s, s)] = cr(val);
    }
    Ok(m)
}

/// Second quantization of a general one-particle matrix:
/// dΓ(M) = Σ_{jk} M_jk a_j† a_k.
pub fn second_quantize_matrix(one_particle: &CMat, fock: &FockModel) -> Result<CMat> {
    let n_modes = fock.grid.n_u;
    if one_particle.nrows() != n_modes || one_particle.ncols() != n_modes {
        return Err(LlabError::Numerical("one-particle matrix dimension mismatch".into()));
    }
    let dim = fock.dim();
    let mut m = CMat::zeros(dim, dim);
    for (col, occ) in fock.basis.iter().enumerate() {
        for k in 0..n_modes {
            if occ[k] == 0 {
                continue;
            }
            let lower_amp = (occ[k] as f64).sqrt();
            let mut mid = occ.clone();
            mid[k] -= 1;
            for j in 0..n_modes {
                let el = one_particle[(j, k)];
                if el == cr(0.0) {
                    continue;
                }
                let mut raised = mid.clone();
                raised[j] += 1;
                if let Some(row) = fock.lookup(&raised) {
                    let raise_amp = (raised[j] as f64).sqrt();
                    m[(row, col)] += el * cr(lower_amp * raise_amp);
                }
            }
        }
    }
    Ok(m)
}

/// Number operator N = dΓ(1).
pub fn number_operator(fock: &FockModel) -> CMat {
    second_quantize_diagonal(&vec![1.0; fock.grid.n_u], fock).unwrap()
}

/// Field Liouvillian L_f = dΓ(u).
pub fn field_liouvillian(fock: &FockModel) -> CMat {
    second_quantize_diagonal(&fock.grid.nodes.clone(), fock).unwrap()
}

/// Λ = dΓ(|u|).
pub fn lambda_operator(fock: &FockModel) -> CMat {
    let abs: Vec<f64> = fock.grid.nodes.iter().map(|u| u.abs()).collect();
    second_quantize_diagonal(&abs, fock).unwrap()
}

/// Antisymmetrized central-difference derivative on the grid: zero Dirichlet
/// boundary rows, then D ← (D − Dᵀ)/2 so dΓ(−D) is exactly anti-selfadjoint.
pub fn derivative_matrix(grid: &ModeGrid) -> CMat {
    let n = grid.n_u;
    let h = grid.spacing();
    let mut d = CMat::zeros(n, n);
    for j in 1..n - 1 {
        d[(j, j + 1)] = cr(1.0 / (2.0 * h));
        d[(j, j - 1)] = cr(-1.0 / (2.0 * h));
    }
    let dt = d.transpose();
    (d - dt) / cr(2.0)
}

/// Translation generator A₀ = dΓ(−D).
pub fn translation_generator(fock: &FockModel) -> CMat {
    let d = derivative_matrix(&fock.grid);
    second_quantize_matrix(&(-d), fock).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{anti_hermiticity_defect, fro_norm, CVec};

    fn ff() -> FormFactor {
        FormFactor::new(0.5, 3.0, 1.0).unwrap()
    }

    proptest::proptest! {
        /// Detailed balance of the thermal gluing: the emission branch is the
        /// e^{−βu}-weighted absorption branch, |g₂(u)|² = e^{−βu}|g₁(u)|².
        #[test]
        fn gluing_satisfies_detailed_balance(
            u in 1e-3f64..20.0,
            beta in 0.1f64..10.0,
            p in 0.3f64..3.0,
        ) {
            let ff = FormFactor::new(p, 3.0, 1.0).unwrap();
            let g1 = glued_g1(&ff, beta, u).norm_sqr();
            let g2 = glued_g2(&ff, beta, u).norm_sqr();
            let expected = (-beta * u).exp() * g1;
            proptest::prop_assert!(
                (g2 - expected).abs() <= 1e-12 * g1.max(1e-300),
                "u={u} beta={beta}: g2^2={g2:e}, e^-bu g1^2={expected:e}"
            );
        }
    }

    #[test]
    fn planck_values() {
        assert!((planck_density(1.0, 2.0f64.ln()).unwrap() - 1.0).abs() < 1e-12);
        assert!(planck_density(1.0, 50.0).unwrap() < 1e-21);
        // extended-precision oracle for small argument: expm1 is exact enough
        // that 1/expm1(2e-8) agrees with the series 1/x - 1/2 + x/12
        let x = 2e-8;
        let series = 1.0 / x - 0.5 + x / 12.0;
        let got = planck_density(2.0, 1e-8).unwrap();
        assert!(((got - series) / series).abs() < 1e-6);
        assert!(planck_density(1.0, 0.0).is_err());
    }

    #[test]
    fn grid_is_symmetric_and_complete() {
        let grid = ModeGrid::new(5.0, 14).unwrap();
        let total: f64 = grid.weights.iter().sum();
        assert!((total - 10.0).abs() < 1e-12);
        for k in 0..grid.n_u {
            assert_eq!(grid.nodes[k], -grid.nodes[grid.n_u - 1 - k]);
            assert!(grid.nodes[k] != 0.0);
        }
        assert!(ModeGrid::new(5.0, 13).is_err());
    }

    #[test]
    fn glue_substitution_at_unit() {
        let f = ff();
        let g1 = glued_g1(&f, 1.0, 1.0);
        let mu = 1.0 / (1.0f64.exp() - 1.0);
        let expect = (1.0 + mu).sqrt() * f.value(1.0);
        assert!((g1.re - expect).abs() < 1e-13);
    }

    #[test]
    fn g2_is_reflected_negated_g1() {
        let f = ff();
        let grid = ModeGrid::new(6.0, 24).unwrap();
        let s = glue(&f, 1.3, &grid).unwrap();
        for k in 0..grid.n_u {
            let mirrored = -s.g1[grid.n_u - 1 - k];
            assert_eq!(s.g2[k], mirrored);
        }
    }

    #[test]
    fn analytic_derivative_matches_finite_differences() {
        let f = ff();
        let beta = 1.7;
        for &u in &[0.35, 1.2, -0.6, -2.4] {
            let h = 1e-5;
            let fd = (glued_g1(&f, beta, u + h) - glued_g1(&f, beta, u - h)) / cr(2.0 * h);
            let an = glued_dg1(&f, beta, u);
            assert!(
                (fd - an).norm() < 1e-7,
                "u={u}: fd={fd} analytic={an}"
            );
        }
    }

    #[test]
    fn glued_norm_matches_quadrature_oracle() {
        // ‖g₁‖² over the glued line equals ∫_0^∞ (1 + 2μ) ω² g(ω)² dω; the
        // angular 4π lives outside both sides. Oracle: adaptive Simpson.
        let f = ff();
        let beta = 1.0;
        let grid = ModeGrid::new(20.0, 400).unwrap();
        let s = glue(&f, beta, &grid).unwrap();
        let lhs = grid.norm_sq(&s.g1);
        let integrand = |w: f64| {
            let mu = 1.0 / (beta * w).exp_m1();
            (1.0 + 2.0 * mu) * w * w * f.value(w) * f.value(w)
        };
        let rhs = adaptive_simpson(&integrand, 1e-9, 20.0, 1e-12, 30);
        assert!(((lhs - rhs) / rhs).abs() < 1e-4, "lhs={lhs} rhs={rhs}");
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        let whole = simpson(f, a, b);
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            adaptive_simpson(f, a, m, tol / 2.0, depth - 1)
                + adaptive_simpson(f, m, b, tol / 2.0, depth - 1)
        }
    }

    #[test]
    fn glued_norm_uniform_in_beta() {
        // Σ w |g₁|² ≤ 2∫(1 + β₀⁻¹ω⁻¹)|g|² ω² dω for β ≥ β₀ = 1.
        let f = ff();
        let grid = ModeGrid::new(20.0, 400).unwrap();
        let bound_integrand =
            |w: f64| 2.0 * (1.0 + 1.0 / w) * w * w * f.value(w) * f.value(w);
        let bound = adaptive_simpson(&bound_integrand, 1e-9, 20.0, 1e-12, 30);
        for beta in [1.0, 2.0, 10.0] {
            let s = glue(&f, beta, &grid).unwrap();
            assert!(grid.norm_sq(&s.g1) <= bound);
        }
    }

    #[test]
    fn fock_dimension_formula() {
        let grid = ModeGrid::new(1.0, 4).unwrap();
        let fock = FockModel::new(grid, 3).unwrap();
        // Σ_{k=0}^{3} C(4+k−1, k) = 1 + 4 + 10 + 20
        assert_eq!(fock.dim(), 35);
        assert!(fock.basis[0].iter().all(|&n| n == 0));
    }

    #[test]
    fn annihilation_kills_vacuum() {
        let grid = ModeGrid::new(2.0, 4).unwrap();
        let fock = FockModel::new(grid, 2).unwrap();
        let f: Vec<Complex64> = (0..4).map(|k| cr(1.0 + k as f64)).collect();
        let a = annihilation(&f, &fock).unwrap();
        let mut vac = CVec::zeros(fock.dim());
        vac[0] = cr(1.0);
        assert!((a * vac).norm() < 1e-15);
    }

    #[test]
    fn single_photon_matrix_element() {
        let grid = ModeGrid::new(2.0, 4).unwrap();
        let fock = FockModel::new(grid.clone(), 2).unwrap();
        let f: Vec<Complex64> = vec![cr(0.3), cr(-1.2), cr(2.0), cr(0.7)];
        let ad = creation(&f, &fock).unwrap();
        for j in 0..4 {
            let mut occ = vec![0u8; 4];
            occ[j] = 1;
            let row = fock.lookup(&occ).unwrap();
            let got = ad[(row, 0)];
            let expect = cr(grid.weights[j].sqrt()) * f[j];
            assert!((got - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn ccr_on_guarded_sector() {
        // [a(f), a*(h)] = ⟨f,h⟩ on states with total occupation ≤ n_max − 1
        let grid = ModeGrid::new(2.0, 4).unwrap();
        let fock = FockModel::new(grid.clone(), 3).unwrap();
        let f: Vec<Complex64> = vec![
            Complex64::new(0.3, 0.1),
            cr(-1.2),
            Complex64::new(0.0, 2.0),
            cr(0.7),
        ];
        let h: Vec<Complex64> = vec![cr(1.0), Complex64::new(0.5, -0.5), cr(0.0), cr(-0.3)];
        let a = annihilation(&f, &fock).unwrap();
        let adh = creation(&h, &fock).unwrap();
        let comm = &a * &adh - &adh * &a;
        let expect = grid.inner(&f, &h);
        let dim = fock.dim();
        let mut defect: f64 = 0.0;
        for (s, occ) in fock.basis.iter().enumerate() {
            let total: usize = occ.iter().map(|&n| n as usize).sum();
            if total <= 2 {
                let mut v = CVec::zeros(dim);
                v[s] = cr(1.0);
                let out = &comm * &v - &v * expect;
                defect = defect.max(out.norm());
            }
        }
        assert!(defect < 1e-13, "defect {defect}");
    }

    #[test]
    fn number_operator_counts() {
        let grid = ModeGrid::new(2.0, 4).unwrap();
        let fock = FockModel::new(grid, 3).unwrap();
        let n = number_operator(&fock);
        let occ = vec![2u8, 0, 1, 0];
        let s = fock.lookup(&occ).unwrap();
        assert!((n[(s, s)].re - 3.0).abs() < 1e-15);
        let lf = field_liouvillian(&fock);
        assert_eq!(lf[(0, 0)], cr(0.0));
    }

    #[test]
    fn translation_generator_anti_selfadjoint() {
        let grid = ModeGrid::new(3.0, 6).unwrap();
        let fock = FockModel::new(grid, 2).unwrap();
        let a0 = translation_generator(&fock);
        assert!(anti_hermiticity_defect(&a0) < 1e-13);
    }

    #[test]
    fn one_photon_field_spectrum_is_grid() {
        let grid = ModeGrid::new(3.0, 6).unwrap();
        let fock = FockModel::new(grid.clone(), 1).unwrap();
        let lf = field_liouvillian(&fock);
        let mut diag: Vec<f64> = (1..fock.dim()).map(|s| lf[(s, s)].re).collect();
        diag.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut nodes = grid.nodes.clone();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(diag, nodes);
    }

    #[test]
    fn relative_bound_number_operator() {
        // ‖a(f) Ñ^{−1/2}‖ ≤ ‖f‖ on Ran(N ≥ 1)
        let grid = ModeGrid::new(3.0, 6).unwrap();
        let fock = FockModel::new(grid.clone(), 3).unwrap();
        let f: Vec<Complex64> =
            grid.nodes.iter().map(|&u| Complex64::new(u.cos(), 0.3 * u)).collect();
        let a = annihilation(&f, &fock).unwrap();
        let dim = fock.dim();
        let mut ninv = CMat::zeros(dim, dim);
        for s in 0..dim {
            let n = fock.total_occupation(s);
            if n >= 1 {
                ninv[(s, s)] = cr(1.0 / (n as f64).sqrt());
            }
        }
        let prod = &a * ninv;
        let sv = prod.singular_values();
        let norm = sv.iter().cloned().fold(0.0f64, f64::max);
        assert!(norm <= grid.norm_sq(&f).sqrt() + 1e-12);
    }

    #[test]
    fn relative_bound_lambda_operator() {
        let grid = ModeGrid::new(3.0, 6).unwrap();
        let fock = FockModel::new(grid.clone(), 3).unwrap();
        let f: Vec<Complex64> = grid.nodes.iter().map(|&u| cr(u * (-u.abs()).exp())).collect();
        let a = annihilation(&f, &fock).unwrap();
        let lam = lambda_operator(&fock);
        let dim = fock.dim();
        let mut linv = CMat::zeros(dim, dim);
        for s in 0..dim {
            let v = lam[(s, s)].re;
            if v > 1e-12 {
                linv[(s, s)] = cr(1.0 / v.sqrt());
            }
        }
        let prod = &a * linv;
        let norm = prod.singular_values().iter().cloned().fold(0.0f64, f64::max);
        let weighted: f64 = grid
            .weights
            .iter()
            .zip(grid.nodes.iter().zip(&f))
            .map(|(&w, (&u, c))| w * c.norm_sqr() / u.abs())
            .sum();
        assert!(norm <= weighted.sqrt() + 1e-12);
    }

    #[test]
    fn second_quantize_rejects_bad_shapes() {
        let grid = ModeGrid::new(2.0, 4).unwrap();
        let fock = FockModel::new(grid, 1).unwrap();
        assert!(second_quantize_diagonal(&[1.0; 3], &fock).is_err());
        let bad = CMat::zeros(3, 3);
        assert!(second_quantize_matrix(&bad, &fock).is_err());
        assert!(annihilation(&[cr(1.0); 3], &fock).is_err());
    }

    #[test]
    fn fro_norm_sanity() {
        let m = CMat::identity(3, 3);
        assert!((fro_norm(&m) - 3.0f64.sqrt()).abs() < 1e-15);
    }
}
