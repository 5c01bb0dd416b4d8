//! Finite N-level particle system on the doubled (Liouville) space.
//!
//! The Hamiltonian is given already diagonalized by its energy list; the
//! doubled space carries the product basis φ_i ⊗ φ_j at flat index i*N + j.

use crate::error::{LlabError, Result};
use crate::linalg::{cr, identity, kron, CMat, CVec};

#[derive(Debug, Clone)]
pub struct ParticleSystem {
    pub energies: Vec<f64>,
    /// Hermitian coupling matrix in the energy eigenbasis.
    pub coupling: CMat,
    pub beta: f64,
}

impl ParticleSystem {
    pub fn new(energies: Vec<f64>, coupling: CMat, beta: f64) -> Result<Self> {
        let n = energies.len();
        if n < 2 {
            return Err(LlabError::Config("particle system needs N >= 2 levels".into()));
        }
        if !energies.iter().all(|e| e.is_finite()) {
            return Err(LlabError::Config("non-finite energy".into()));
        }
        if energies.windows(2).any(|w| w[0] > w[1]) {
            return Err(LlabError::Config("energies must be sorted ascending".into()));
        }
        if beta <= 0.0 || !beta.is_finite() {
            return Err(LlabError::Config("beta must be positive and finite".into()));
        }
        if coupling.nrows() != n || coupling.ncols() != n {
            return Err(LlabError::Config(format!(
                "coupling matrix must be {n}x{n}, got {}x{}",
                coupling.nrows(),
                coupling.ncols()
            )));
        }
        if crate::linalg::hermiticity_defect(&coupling) > 1e-12 {
            return Err(LlabError::Config("coupling matrix is not Hermitian (tol 1e-12)".into()));
        }
        Ok(ParticleSystem { energies, coupling, beta })
    }

    pub fn n_levels(&self) -> usize {
        self.energies.len()
    }

    /// Dimension of the doubled space, N².
    pub fn doubled_dim(&self) -> usize {
        let n = self.n_levels();
        n * n
    }

    /// Absolute tolerance used to group eigenvalues of L_p.
    pub fn tol_e(&self) -> f64 {
        let spread = self.energies.last().unwrap() - self.energies.first().unwrap();
        1e-9 * spread.max(1.0)
    }
}

/// Normalized particle Gibbs vector on the doubled space together with the
/// partition function. Energies are shifted by E_0 before exponentiation;
/// the shift cancels in the normalized vector and is recorded alongside the
/// (shifted-energy) partition function.
#[derive(Debug, Clone)]
pub struct GibbsVector {
    pub vector: CVec,
    /// Z_p for the shifted energies Ê_i = E_i − E_0.
    pub z_p: f64,
    pub shift: f64,
}

pub fn gibbs_vector(ps: &ParticleSystem) -> GibbsVector {
    let n = ps.n_levels();
    let shift = ps.energies[0];
    let z_p: f64 = ps.energies.iter().map(|e| (-ps.beta * (e - shift)).exp()).sum();
    let mut v = CVec::zeros(n * n);
    for i in 0..n {
        v[i * n + i] = cr((-ps.beta * (ps.energies[i] - shift) / 2.0).exp() / z_p.sqrt());
    }
    GibbsVector { vector: v, z_p, shift }
}

/// Spectrum of L_p with eigenvalues grouped into distinct values and the
/// corresponding orthogonal projectors on the doubled space.
#[derive(Debug, Clone)]
pub struct LiouvilleParticleSpectrum {
    /// e = E_i − E_j per flat index i*N + j.
    pub eigenvalues: Vec<f64>,
    /// Distinct values of e with their flat-index groups, sorted ascending.
    pub groups: Vec<(f64, Vec<usize>)>,
    pub tol_e: f64,
}

impl LiouvilleParticleSpectrum {
    pub fn distinct_values(&self) -> Vec<f64> {
        self.groups.iter().map(|(e, _)| *e).collect()
    }

    pub fn multiplicity(&self, e: f64) -> Option<usize> {
        self.group_indices(e).map(|g| g.len())
    }

    pub fn group_indices(&self, e: f64) -> Option<&[usize]> {
        self.groups
            .iter()
            .find(|(v, _)| (v - e).abs() <= self.tol_e)
            .map(|(_, g)| g.as_slice())
    }

    /// Projector P(L_p = e) as a diagonal 0/1 matrix.
    pub fn projector(&self, e: f64) -> Option<CMat> {
        let dim = self.eigenvalues.len();
        self.group_indices(e).map(|g| {
            let mut p = CMat::zeros(dim, dim);
            for &i in g {
                p[(i, i)] = cr(1.0);
            }
            p
        })
    }
}

/// L_p = H_p ⊗ 1 − 1 ⊗ H_p as a diagonal matrix on the doubled space,
/// together with its grouped spectrum.
pub fn particle_liouvillian(ps: &ParticleSystem) -> (CMat, LiouvilleParticleSpectrum) {
    let n = ps.n_levels();
    let mut eigenvalues = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            eigenvalues.push(ps.energies[i] - ps.energies[j]);
        }
    }
    let lp = CMat::from_diagonal(&CVec::from_iterator(n * n, eigenvalues.iter().map(|&e| cr(e))));

    let tol_e = ps.tol_e();
    let mut order: Vec<usize> = (0..n * n).collect();
    order.sort_by(|&a, &b| eigenvalues[a].partial_cmp(&eigenvalues[b]).unwrap());
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for &idx in &order {
        let e = eigenvalues[idx];
        match groups.last_mut() {
            Some((v, g)) if (e - *v).abs() <= tol_e => g.push(idx),
            _ => groups.push((e, vec![idx])),
        }
    }
    (lp, LiouvilleParticleSpectrum { eigenvalues, groups, tol_e })
}

/// Doubled coupling operators G_l = G ⊗ 1 and G_r = 1 ⊗ Ḡ, where Ḡ is the
/// entrywise complex conjugate of G (realizing C G C in the energy basis).
pub fn doubled_operators(ps: &ParticleSystem) -> (CMat, CMat) {
    let n = ps.n_levels();
    let gl = kron(&ps.coupling, &identity(n));
    let g_conj = ps.coupling.map(|c| c.conj());
    let gr = kron(&identity(n), &g_conj);
    (gl, gr)
}

pub fn coupling_conj(g: &CMat) -> CMat {
    g.map(|z| z.conj())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fro_norm, is_hermitian};
    use num_complex::Complex64;

    fn two_level(beta: f64) -> ParticleSystem {
        let g = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)]);
        ParticleSystem::new(vec![0.0, 1.0], g, beta).unwrap()
    }

    proptest::proptest! {
        /// The Gibbs vector is a unit vector annihilated by L_p for any
        /// level structure and temperature.
        #[test]
        fn gibbs_vector_is_normalized_and_stationary(
            mut energies in proptest::collection::vec(-3.0f64..3.0, 2..6),
            beta in 0.1f64..5.0,
        ) {
            energies.sort_by(f64::total_cmp);
            let n = energies.len();
            let ps = ParticleSystem::new(energies, identity(n), beta).unwrap();
            let gv = gibbs_vector(&ps);
            proptest::prop_assert!((gv.vector.norm() - 1.0).abs() < 1e-12);
            let (lp, _) = particle_liouvillian(&ps);
            proptest::prop_assert!((&lp * &gv.vector).norm() <= 1e-12 * fro_norm(&lp).max(1.0));
        }
    }

    #[test]
    fn gibbs_two_level() {
        let ps = two_level(1.0);
        let gv = gibbs_vector(&ps);
        let z = 1.0 + (-1.0f64).exp();
        assert!((gv.z_p - z).abs() < 1e-12);
        assert!((gv.vector[0].re - 1.0 / z.sqrt()).abs() < 1e-12);
        assert!((gv.vector[3].re - (-0.5f64).exp() / z.sqrt()).abs() < 1e-12);
        assert!((gv.vector.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_degenerate_levels() {
        let g = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)]);
        let ps = ParticleSystem::new(vec![3.0, 3.0], g, 2.5).unwrap();
        let gv = gibbs_vector(&ps);
        assert!((gv.vector[0].re - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
        assert!((gv.vector[3].re - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
        assert!((gv.shift - 3.0).abs() < 1e-15);
    }

    #[test]
    fn gibbs_matches_brute_force_sum() {
        // direct summation oracle (f64 suffices; sums are tiny and benign)
        let g = CMat::from_row_slice(
            3,
            3,
            &[cr(0.0), cr(0.3), cr(0.0), cr(0.3), cr(0.0), cr(0.1), cr(0.0), cr(0.1), cr(0.0)],
        );
        let ps = ParticleSystem::new(vec![0.0, 1.0, 2.0], g, 2.0).unwrap();
        let gv = gibbs_vector(&ps);
        let z_oracle: f64 = [0.0f64, 1.0, 2.0].iter().map(|e| (-2.0 * e).exp()).sum();
        assert!((gv.z_p - z_oracle).abs() < 1e-14);
        for (i, &e) in [0.0f64, 1.0, 2.0].iter().enumerate() {
            let expect = (-2.0 * e / 2.0).exp() / z_oracle.sqrt();
            assert!((gv.vector[i * 3 + i].re - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn liouvillian_two_level() {
        let ps = two_level(1.0);
        let (lp, spec) = particle_liouvillian(&ps);
        let diag: Vec<f64> = (0..4).map(|i| lp[(i, i)].re).collect();
        assert_eq!(diag, vec![0.0, -1.0, 1.0, 0.0]);
        assert_eq!(spec.distinct_values(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(spec.multiplicity(0.0), Some(2));
    }

    #[test]
    fn liouvillian_degenerate_is_zero() {
        let g = CMat::zeros(2, 2);
        let ps = ParticleSystem::new(vec![1.0, 1.0], g, 1.0).unwrap();
        let (lp, spec) = particle_liouvillian(&ps);
        assert!(fro_norm(&lp) < 1e-15);
        assert_eq!(spec.groups.len(), 1);
    }

    #[test]
    fn liouvillian_three_level_distinct_values() {
        let g = CMat::zeros(3, 3);
        let ps = ParticleSystem::new(vec![0.0, 1.0, 3.0], g, 1.0).unwrap();
        let (_, spec) = particle_liouvillian(&ps);
        // oracle: enumerate all pairwise differences
        let mut oracle: Vec<f64> = Vec::new();
        for a in [0.0f64, 1.0, 3.0] {
            for b in [0.0f64, 1.0, 3.0] {
                let d = a - b;
                if !oracle.iter().any(|x| (x - d).abs() < 1e-12) {
                    oracle.push(d);
                }
            }
        }
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(spec.distinct_values(), oracle);
    }

    #[test]
    fn projectors_resolve_identity() {
        let ps = two_level(1.0);
        let (_, spec) = particle_liouvillian(&ps);
        let mut acc = CMat::zeros(4, 4);
        for e in spec.distinct_values() {
            acc += spec.projector(e).unwrap();
        }
        assert!(fro_norm(&(acc - identity(4))) < 1e-14);
        let p0 = spec.projector(0.0).unwrap();
        let p1 = spec.projector(1.0).unwrap();
        assert!(fro_norm(&(&p0 * &p1)) < 1e-14);
    }

    #[test]
    fn spectrum_symmetric_under_negation() {
        let g = CMat::zeros(3, 3);
        let ps = ParticleSystem::new(vec![0.0, 0.7, 1.9], g, 1.0).unwrap();
        let (_, spec) = particle_liouvillian(&ps);
        for (e, grp) in &spec.groups {
            let m = spec.multiplicity(-e);
            assert_eq!(m, Some(grp.len()));
        }
    }

    #[test]
    fn doubled_operators_commute() {
        let g = CMat::from_row_slice(
            2,
            2,
            &[cr(0.2), Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0), cr(-0.4)],
        );
        let ps = ParticleSystem::new(vec![0.0, 1.0], g, 1.0).unwrap();
        let (gl, gr) = doubled_operators(&ps);
        assert!(is_hermitian(&gl, 1e-13));
        assert!(is_hermitian(&gr, 1e-13));
        let comm = &gl * &gr - &gr * &gl;
        assert!(fro_norm(&comm) < 1e-14);
    }

    #[test]
    fn real_symmetric_coupling_fixes_conjugation() {
        let ps = two_level(1.0);
        let (_, gr) = doubled_operators(&ps);
        let expect = kron(&identity(2), &ps.coupling);
        assert!(fro_norm(&(gr - expect)) < 1e-14);
    }

    #[test]
    fn lp_annihilates_gibbs() {
        let ps = two_level(0.7);
        let (lp, _) = particle_liouvillian(&ps);
        let gv = gibbs_vector(&ps);
        assert!((lp * &gv.vector).norm() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let g = CMat::zeros(2, 2);
        assert!(ParticleSystem::new(vec![1.0], g.clone(), 1.0).is_err());
        assert!(ParticleSystem::new(vec![1.0, 0.0], g.clone(), 1.0).is_err());
        assert!(ParticleSystem::new(vec![0.0, 1.0], g.clone(), -1.0).is_err());
        let bad = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(2.0), cr(0.0)]);
        assert!(ParticleSystem::new(vec![0.0, 1.0], bad, 1.0).is_err());
    }
}
