//! Slater states, one-particle reduced density matrices, and exact
//! propagation ψ(t) = exp(−itH/ħ)ψ.

use ndarray::{Array1, Array2};
use ndarray_linalg::Determinant;

use crate::error::{LabError, Result};
use crate::linalg::{self, C64};
use crate::spectra::DensityMatrix;

use super::fock::{self, FockBasis};
use super::ModeBasis;

const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ManyBodyState {
    coefficients: Array1<C64>,
}

impl ManyBodyState {
    pub fn new(coefficients: Array1<C64>) -> Result<Self> {
        let state = Self { coefficients };
        if (state.norm() - 1.0).abs() > NORM_TOLERANCE {
            return Err(LabError::InvalidParameter {
                name: "state",
                reason: format!("norm {} is not 1", state.norm()),
            });
        }
        Ok(state)
    }

    pub fn coefficients(&self) -> &Array1<C64> {
        &self.coefficients
    }

    pub fn norm(&self) -> f64 {
        self.coefficients.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ⟨self, other⟩
    pub fn overlap(&self, other: &ManyBodyState) -> C64 {
        self.coefficients.iter().zip(other.coefficients.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// ⟨ψ, Hψ⟩
    pub fn expectation(&self, h: &Array2<C64>) -> f64 {
        let hpsi = h.dot(&self.coefficients);
        self.coefficients.iter().zip(hpsi.iter()).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// The occupation basis vector for the listed modes.
pub fn slater_from_modes(basis: &FockBasis, modes: &[usize]) -> Result<ManyBodyState> {
    let mut c = Array1::<C64>::zeros(basis.dim());
    c[basis.position_of(modes)?] = C64::new(1.0, 0.0);
    ManyBodyState::new(c)
}

/// Slater determinant of orthonormal grid orbitals (columns) expanded in
/// the mode space: the amplitude on occupation S is det C[S, :].
pub fn slater_state(modes: &ModeBasis, orbitals: &Array2<C64>, basis: &FockBasis) -> Result<ManyBodyState> {
    if orbitals.ncols() != basis.particles() || modes.len() != basis.modes() {
        return Err(LabError::SizeMismatch {
            left: (modes.len(), orbitals.ncols()),
            right: (basis.modes(), basis.particles()),
        });
    }
    let c = modes.project(orbitals)?;
    let n = basis.particles();
    let mut amplitudes = Array1::<C64>::zeros(basis.dim());
    for (pos, &mask) in basis.masks().iter().enumerate() {
        let rows = fock::occupied(mask);
        let sub = Array2::from_shape_fn((n, n), |(r, col)| c[[rows[r], col]]);
        amplitudes[pos] = sub.det().map_err(|e| LabError::Svd(e.to_string()))?;
    }
    ManyBodyState::new(amplitudes)
}

/// γ_ij = ⟨ψ, a†_j a_i ψ⟩, a K×K matrix of trace N.
pub fn one_particle_rdm(psi: &ManyBodyState, basis: &FockBasis) -> DensityMatrix {
    let k = basis.modes();
    let c = psi.coefficients();
    let mut gamma = Array2::<C64>::zeros((k, k));
    for (col, &mask) in basis.masks().iter().enumerate() {
        if c[col] == C64::new(0.0, 0.0) {
            continue;
        }
        for i in fock::occupied(mask) {
            for j in 0..k {
                if let Some((m, s)) = fock::hop(mask, j, i) {
                    let row = basis.position(m).expect("number-conserving");
                    gamma[[i, j]] += c[row].conj() * c[col] * s;
                }
            }
        }
    }
    linalg::symmetrize(&mut gamma);
    DensityMatrix::trusted(gamma)
}

#[derive(Debug, Clone)]
pub struct ManyBodyTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ManyBodyState>,
}

/// ψ(t) = V e^{−iΛt/ħ} V† ψ at each requested time.
pub fn evolve_many_body(psi: &ManyBodyState, h: &Array2<C64>, times: &[f64], hbar: f64) -> Result<ManyBodyTrajectory> {
    if h.nrows() > super::DIMENSION_CAP {
        return Err(LabError::DimensionCap {
            dimension: h.nrows(),
            cap: super::DIMENSION_CAP,
        });
    }
    let (lambda, v) = linalg::eigh(h)?;
    let weights = linalg::dagger(&v).dot(psi.coefficients());
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        let rotated: Array1<C64> = weights
            .iter()
            .zip(lambda.iter())
            .map(|(w, e)| w * C64::from_polar(1.0, -e * t / hbar))
            .collect();
        states.push(ManyBodyState::new(v.dot(&rotated))?);
    }
    Ok(ManyBodyTrajectory {
        times: times.to_vec(),
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_grid, FieldSpec, Interaction};
    use crate::linalg::{dagger, max_abs};
    use crate::many_body::{assemble_many_body_hamiltonian, build_mode_basis, ModeIntegrals};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn modes(k: usize) -> (ModeBasis, ModeIntegrals) {
        let grid = build_grid(1, 121, 4.0).unwrap();
        let fields = FieldSpec::harmonic().with_interaction(Interaction::gaussian(1.0, 0.5));
        let basis = build_mode_basis(&grid, &fields, 0.25, 0.0, k).unwrap();
        let ints = ModeIntegrals::from_grid(&basis, &grid, &fields, 0.25, 0.0).unwrap();
        (basis, ints)
    }

    fn random_state(basis: &FockBasis, seed: u64) -> ManyBodyState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c: Array1<C64> = (0..basis.dim()).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        c.mapv_inplace(|z| z / norm);
        ManyBodyState::new(c).unwrap()
    }

    #[test]
    fn slater_examples() {
        let (modes, _) = modes(5);
        let fock = FockBasis::new(5, 2).unwrap();
        let lowest = slater_state(&modes, &modes.vectors().slice(ndarray::s![.., 0..2]).to_owned(), &fock).unwrap();
        assert!((lowest.coefficients()[0].norm() - 1.0).abs() < 1e-10);
        // unitary mixing of the occupied orbitals is a phase
        let theta = 0.4f64;
        let u = ndarray::array![
            [C64::new(theta.cos(), 0.0), C64::new(0.0, theta.sin())],
            [C64::new(0.0, theta.sin()), C64::new(theta.cos(), 0.0)]
        ];
        let picked = modes.vectors().select(ndarray::Axis(1), &[1, 3]);
        let a = slater_state(&modes, &picked, &fock).unwrap();
        let b = slater_state(&modes, &picked.dot(&u), &fock).unwrap();
        assert!((a.overlap(&b).norm() - 1.0).abs() < 1e-10);
        // RDM of a Slater state projects onto the occupied modes
        let gamma = one_particle_rdm(&a, &fock);
        let mut expected = Array2::<C64>::zeros((5, 5));
        expected[[1, 1]] = C64::new(1.0, 0.0);
        expected[[3, 3]] = C64::new(1.0, 0.0);
        assert!(max_abs(&(gamma.entries() - &expected)) < 1e-10);
        let outside = Array2::from_shape_fn((121, 2), |(r, c)| C64::new(if r == 60 + c { 1.0 } else { 0.0 }, 0.0));
        assert!(matches!(slater_state(&modes, &outside, &fock), Err(LabError::OrbitalProjection { .. })));
    }

    #[test]
    fn orthogonal_superposition_rdm() {
        let fock = FockBasis::new(4, 2).unwrap();
        let mut c = Array1::<C64>::zeros(6);
        let s = 0.5f64.sqrt();
        c[fock.position_of(&[0, 1]).unwrap()] = C64::new(s, 0.0);
        c[fock.position_of(&[2, 3]).unwrap()] = C64::new(s, 0.0);
        let gamma = one_particle_rdm(&ManyBodyState::new(c).unwrap(), &fock);
        let expected = Array2::from_diag(&Array1::from_elem(4, C64::new(0.5, 0.0)));
        assert!(max_abs(&(gamma.entries() - &expected)) < 1e-15);
    }

    #[test]
    fn rdm_matches_orbital_projector() {
        let (modes, _) = modes(6);
        let fock = FockBasis::new(6, 3).unwrap();
        let theta = 0.3f64;
        let mut phi = modes.vectors().select(ndarray::Axis(1), &[0, 1, 2]);
        // rotate orbital 2 partly into mode 4
        let extra = modes.vectors().column(4).to_owned();
        let mut col = phi.column_mut(2);
        col.mapv_inplace(|z| z * theta.cos());
        col.scaled_add(C64::new(0.0, theta.sin()), &extra);
        let psi = slater_state(&modes, &phi, &fock).unwrap();
        let c = modes.project(&phi).unwrap();
        let gamma = one_particle_rdm(&psi, &fock);
        assert!(max_abs(&(gamma.entries() - c.dot(&dagger(&c)))) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn random_state_rdm_is_physical(seed in 0u64..10_000, n in 1usize..4) {
            let fock = FockBasis::new(6, n).unwrap();
            let gamma = one_particle_rdm(&random_state(&fock, seed), &fock);
            let (lo, hi) = gamma.spectral_range().unwrap();
            prop_assert!(lo >= -1e-12 && hi <= 1.0 + 1e-12);
            prop_assert!((gamma.particle_count() - n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_evolution_examples() {
        let (_, ints) = modes(6);
        let fock = FockBasis::new(6, 2).unwrap();
        let h = assemble_many_body_hamiltonian(&ints, &fock, 0.5).unwrap();
        let (_, v) = linalg::eigh(&h).unwrap();
        let eigen = ManyBodyState::new(v.column(3).to_owned()).unwrap();
        let traj = evolve_many_body(&eigen, &h, &[0.0, 0.7, 2.0], 0.25).unwrap();
        for s in &traj.states {
            assert!((eigen.overlap(s).norm() - 1.0).abs() < 1e-10);
        }
        let psi = random_state(&fock, 7);
        let traj = evolve_many_body(&psi, &h, &[0.0, 0.5, 1.0], 0.25).unwrap();
        let e0 = psi.expectation(&h);
        for s in &traj.states {
            assert!((s.norm() - 1.0).abs() < 1e-10);
            assert!((s.expectation(&h) - e0).abs() < 1e-10);
        }
    }
}
