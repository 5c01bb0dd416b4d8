//! Dense complex linear algebra helpers shared by all modules.
//!
//! Everything here operates on `DMatrix<Complex64>`. Models stay small
//! (a few thousand rows at most), so dense storage and `symmetric_eigen`
//! are adequate throughout.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Kronecker product a ⊗ b.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Largest entrywise deviation from Hermiticity, ‖M − M*‖_max.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    hermiticity_defect(m) <= tol
}

/// Largest entrywise deviation from anti-Hermiticity, ‖M + M*‖_max.
pub fn anti_hermiticity_defect(m: &CMat) -> f64 {
    let adj = m.adjoint();
    (m + adj).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Operator (spectral) norm of a Hermitian matrix.
pub fn op_norm_hermitian(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Frobenius norm.
pub fn fro_norm(m: &CMat) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigendecomposition of a Hermitian matrix: eigenvalues sorted ascending,
/// eigenvectors as the columns of the returned matrix (same order).
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let se = m.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let vals: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eig_hermitian(m: &CMat) -> f64 {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Smallest singular value.
pub fn min_singular_value(m: &CMat) -> f64 {
    let sv = m.clone().singular_values();
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Compression V* M V of `m` onto the subspace spanned by the orthonormal
/// columns of `v`.
pub fn compress(m: &CMat, v: &CMat) -> CMat {
    v.adjoint() * m * v
}

/// Orthonormal basis (columns) of the subspace spanned by the standard basis
/// vectors with the given indices.
pub fn index_basis(dim: usize, indices: &[usize]) -> CMat {
    let mut v = CMat::zeros(dim, indices.len());
    for (k, &i) in indices.iter().enumerate() {
        v[(i, k)] = C_ONE;
    }
    v
}

/// Orthonormal basis of the orthogonal complement of `w` inside the span of
/// the orthonormal columns of `v` (Gram-Schmidt; `w` need not be normalized).
pub fn complement_within(v: &CMat, w: &CVec) -> CMat {
    let k = v.ncols();
    // coordinates of w in the subspace basis
    let coeff = v.adjoint() * w;
    let nrm = coeff.norm();
    if nrm < 1e-14 {
        return v.clone();
    }
    let unit = coeff / cr(nrm);
    // Householder-style complement: columns orthogonal to `unit` inside C^k
    let mut cols: Vec<CVec> = Vec::with_capacity(k - 1);
    for j in 0..k {
        let mut e = CVec::zeros(k);
        e[j] = C_ONE;
        let proj = unit.dotc(&e);
        let mut cand = e - &unit * proj;
        for c in &cols {
            let p = c.dotc(&cand);
            cand -= c * p;
        }
        let n = cand.norm();
        if n > 1e-8 {
            cols.push(cand / cr(n));
        }
        if cols.len() == k - 1 {
            break;
        }
    }
    let mut basis = CMat::zeros(k, cols.len());
    for (j, c) in cols.iter().enumerate() {
        basis.set_column(j, c);
    }
    v * basis
}

/// Solve (M − z) X = I by LU, returning the resolvent matrix.
pub fn resolvent(m: &CMat, z: Complex64) -> Option<CMat> {
    let n = m.nrows();
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] -= z;
    }
    shifted.lu().try_inverse()
}

/// Composite Simpson step for matrix-valued integrands.
pub fn simpson_matrix(f: &dyn Fn(f64) -> CMat, a: f64, b: f64) -> CMat {
    (f(a) + f(0.5 * (a + b)) * cr(4.0) + f(b)) * cr((b - a) / 6.0)
}

/// Adaptive Simpson quadrature for matrix-valued integrands; the error
/// control is on the Frobenius norm of the Richardson correction. Returns
/// the integral and the accumulated error estimate.
pub fn adaptive_simpson_matrix(
    f: &dyn Fn(f64) -> CMat,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
) -> (CMat, f64) {
    let whole = simpson_matrix(f, a, b);
    let m = 0.5 * (a + b);
    let left = simpson_matrix(f, a, m);
    let right = simpson_matrix(f, m, b);
    let richardson = &left + &right - &whole;
    let err = fro_norm(&richardson) / 15.0;
    if depth == 0 || err < tol {
        (left + right + richardson * cr(1.0 / 15.0), err)
    } else {
        let (l, el) = adaptive_simpson_matrix(f, a, m, tol / 2.0, depth - 1);
        let (r, er) = adaptive_simpson_matrix(f, m, b, tol / 2.0, depth - 1);
        (l + r, el + er)
    }
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Log-log slope of y against x (all entries must be positive).
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_slope(&lx, &ly)
}
