//! Exact N-fermion dynamics in a truncated one-body mode space and its
//! comparison with Hartree–Fock run in the same space.

mod compare;
pub mod fock;
mod state;

use ndarray::Array2;

use crate::error::{LabError, Result};
use crate::hartree_fock::pair_matrix;
use crate::lattice::{assemble_hamiltonian, FieldSpec, Grid, HermitianOperator};
use crate::linalg::{self, dagger, C64};
use crate::spectra::eigendecompose;

pub use compare::{compare_hf_vs_exact, ComparisonRow, ComparisonSetup, ComparisonTable};
pub use fock::{FockBasis, DIMENSION_CAP};
pub use state::{evolve_many_body, one_particle_rdm, slater_from_modes, slater_state, ManyBodyState, ManyBodyTrajectory};

const GAP_TOLERANCE: f64 = 1e-9;

/// Lowest-K eigenvectors of the one-body Hamiltonian as grid columns.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    vectors: Array2<C64>,
    energies: Vec<f64>,
}

impl ModeBasis {
    pub fn vectors(&self) -> &Array2<C64> {
        &self.vectors
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// ‖Φ†Φ − I‖_max
    pub fn gram_defect(&self) -> f64 {
        linalg::max_abs(&(dagger(&self.vectors).dot(&self.vectors) - linalg::identity(self.len())))
    }

    /// Grid orbitals → mode coefficients, rejecting orbitals that leave the span.
    pub fn project(&self, orbitals: &Array2<C64>) -> Result<Array2<C64>> {
        let coefficients = dagger(&self.vectors).dot(orbitals);
        let residual = orbitals - &self.vectors.dot(&coefficients);
        let error = residual.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if error > 1e-6 {
            return Err(LabError::OrbitalProjection { error });
        }
        Ok(coefficients)
    }
}

pub fn build_mode_basis(grid: &Grid, fields: &FieldSpec, hbar: f64, b: f64, modes: usize) -> Result<ModeBasis> {
    let h = assemble_hamiltonian(grid, fields, hbar, b)?;
    mode_basis_from(&h, modes)
}

pub fn mode_basis_from(h: &HermitianOperator, modes: usize) -> Result<ModeBasis> {
    let d = eigendecompose(h)?;
    if modes == 0 || modes > d.len() {
        return Err(LabError::LevelOutOfRange {
            requested: modes,
            available: d.len(),
        });
    }
    let e = d.eigenvalues();
    if modes < d.len() && e[modes] - e[modes - 1] <= GAP_TOLERANCE {
        return Err(LabError::DegenerateLevel {
            level: modes,
            lower: e[modes - 1],
            upper: e[modes],
        });
    }
    Ok(ModeBasis {
        vectors: d.lowest_vectors(modes),
        energies: e.iter().take(modes).copied().collect(),
    })
}

/// One-body matrix h_ij and pair elements ⟨ij|W|kl⟩ stored at (iK + j, kK + l).
#[derive(Debug, Clone)]
pub struct ModeIntegrals {
    pub one_body: Array2<C64>,
    pub two_body: Array2<C64>,
}

impl ModeIntegrals {
    pub fn modes(&self) -> usize {
        self.one_body.nrows()
    }

    /// ⟨ij|W|kl⟩ = Σ_{a,b} c̄_i(a) c̄_j(b) W(x_a − x_b) c_k(a) c_l(b), from the pair
    /// densities D_(ik)(a) = c̄_i(a) c_k(a) as Dᵀ W D.
    pub fn from_grid(basis: &ModeBasis, grid: &Grid, fields: &FieldSpec, hbar: f64, b: f64) -> Result<Self> {
        let h = assemble_hamiltonian(grid, fields, hbar, b)?;
        let c = basis.vectors();
        let one_body = dagger(c).dot(&h.matrix().dot(c));
        let k = basis.len();
        let n = grid.len();
        let mut two_body = Array2::<C64>::zeros((k * k, k * k));
        if !fields.interaction.is_zero() {
            let pairs = pair_matrix(grid, &fields.interaction)?.mapv(|w| C64::new(w, 0.0));
            let densities = Array2::from_shape_fn((n, k * k), |(a, col)| c[[a, col / k]].conj() * c[[a, col % k]]);
            let t = densities.t().dot(&pairs.dot(&densities));
            for i in 0..k {
                for j in 0..k {
                    for kk in 0..k {
                        for l in 0..k {
                            two_body[[i * k + j, kk * k + l]] = t[[i * k + kk, j * k + l]];
                        }
                    }
                }
            }
        }
        Ok(Self { one_body, two_body })
    }
}

/// H = Σ h_ij a†_i a_j + (λ/2) Σ ⟨ij|W|kl⟩ a†_i a†_j a_l a_k, which equals the
/// antisymmetrized form (λ/4) Σ (⟨ij|W|kl⟩ − ⟨ij|W|lk⟩) a†_i a†_j a_l a_k.
pub fn assemble_many_body_hamiltonian(integrals: &ModeIntegrals, basis: &FockBasis, coupling: f64) -> Result<Array2<C64>> {
    let k = integrals.modes();
    if basis.modes() != k {
        return Err(LabError::Config(format!(
            "Fock basis has {} modes but the integrals have {k}",
            basis.modes()
        )));
    }
    let dim = basis.dim();
    let mut h = Array2::<C64>::zeros((dim, dim));
    for (col, &mask) in basis.masks().iter().enumerate() {
        let occ = fock::occupied(mask);
        for &j in &occ {
            for i in 0..k {
                if let Some((m, s)) = fock::hop(mask, i, j) {
                    let row = basis.position(m).expect("number-conserving");
                    h[[row, col]] += integrals.one_body[[i, j]] * s;
                }
            }
        }
        if coupling == 0.0 {
            continue;
        }
        for &kk in &occ {
            for &l in &occ {
                if kk == l {
                    continue;
                }
                for i in 0..k {
                    for j in 0..k {
                        if i == j {
                            continue;
                        }
                        let v = integrals.two_body[[i * k + j, kk * k + l]];
                        if v == C64::new(0.0, 0.0) {
                            continue;
                        }
                        if let Some((m, s)) = fock::pair_hop(mask, i, j, kk, l) {
                            let row = basis.position(m).expect("number-conserving");
                            h[[row, col]] += v * (0.5 * coupling * s);
                        }
                    }
                }
            }
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_grid, Interaction};
    use crate::linalg::{eigvalsh, max_abs};

    fn oscillator_modes(k: usize, hbar: f64) -> (Grid, FieldSpec, ModeBasis) {
        let grid = build_grid(1, 161, 5.0).unwrap();
        let fields = FieldSpec::harmonic().with_interaction(Interaction::gaussian(1.0, 0.5));
        let basis = build_mode_basis(&grid, &fields, hbar, 0.0, k).unwrap();
        (grid, fields, basis)
    }

    #[test]
    fn mode_basis_examples() {
        let (_, _, one) = oscillator_modes(1, 0.2);
        let v = one.vectors().column(0).mapv(|z| z.re);
        let sign = v[80].signum();
        assert!(v.iter().all(|x| x * sign >= -1e-12));
        let fine = build_grid(1, 321, 4.0).unwrap();
        let basis = build_mode_basis(&fine, &FieldSpec::harmonic(), 0.2, 0.0, 12).unwrap();
        assert!(basis.gram_defect() < 1e-10);
        for (n, e) in basis.energies().iter().enumerate() {
            let exact = 0.2 * (2 * n + 1) as f64;
            assert!((e - exact).abs() / exact < 1e-2, "level {n}: {e}");
        }
        let grid = build_grid(2, 7, 1.0).unwrap();
        assert!(matches!(
            build_mode_basis(&grid, &FieldSpec::harmonic(), 0.5, 0.0, 2),
            Err(LabError::DegenerateLevel { .. })
        ));
    }

    #[test]
    fn noninteracting_spectrum_is_additive() {
        let (grid, fields, basis) = oscillator_modes(6, 0.2);
        let ints = ModeIntegrals::from_grid(&basis, &grid, &fields, 0.2, 0.0).unwrap();
        let fock = FockBasis::new(6, 2).unwrap();
        let h = assemble_many_body_hamiltonian(&ints, &fock, 0.0).unwrap();
        let got = eigvalsh(&h).unwrap();
        let e = basis.energies();
        let mut expected: Vec<f64> = Vec::new();
        for i in 0..6 {
            for j in i + 1..6 {
                expected.push(e[i] + e[j]);
            }
        }
        expected.sort_by(f64::total_cmp);
        for (g, x) in got.iter().zip(&expected) {
            assert!((g - x).abs() < 1e-10);
        }
    }

    #[test]
    fn single_particle_sector_is_one_body() {
        let (grid, fields, basis) = oscillator_modes(5, 0.2);
        let ints = ModeIntegrals::from_grid(&basis, &grid, &fields, 0.2, 0.0).unwrap();
        let h = assemble_many_body_hamiltonian(&ints, &FockBasis::new(5, 1).unwrap(), 1.0).unwrap();
        assert!(max_abs(&(h - &ints.one_body)) < 1e-14);
    }

    #[test]
    fn single_pair_element_by_hand() {
        // only ⟨01|W|01⟩ = ⟨10|W|10⟩ = w: a direct energy w·λ on the |01⟩ state
        let k = 4;
        let w = C64::new(0.7, 0.0);
        let mut two = Array2::<C64>::zeros((k * k, k * k));
        two[[1, 1]] = w;
        two[[k, k]] = w;
        let ints = ModeIntegrals {
            one_body: Array2::zeros((k, k)),
            two_body: two,
        };
        let fock = FockBasis::new(k, 2).unwrap();
        let h = assemble_many_body_hamiltonian(&ints, &fock, 0.5).unwrap();
        let mut expected = Array2::<C64>::zeros((6, 6));
        expected[[0, 0]] = w * 0.5;
        assert!(max_abs(&(h - expected)) < 1e-15);
        // exchange-type element ⟨01|W|10⟩ flips the sign
        let mut two = Array2::<C64>::zeros((k * k, k * k));
        two[[1, k]] = w;
        two[[k, 1]] = w;
        let ints = ModeIntegrals {
            one_body: Array2::zeros((k, k)),
            two_body: two,
        };
        let h = assemble_many_body_hamiltonian(&ints, &fock, 0.5).unwrap();
        assert!((h[[0, 0]] + w * 0.5).norm() < 1e-15);
    }

    #[test]
    fn interacting_hamiltonian_is_hermitian() {
        let (grid, fields, basis) = oscillator_modes(6, 0.2);
        let ints = ModeIntegrals::from_grid(&basis, &grid, &fields, 0.2, 0.0).unwrap();
        let h = assemble_many_body_hamiltonian(&ints, &FockBasis::new(6, 3).unwrap(), 1.0 / 3.0).unwrap();
        assert!(linalg::hermitian_defect(&h) < 1e-12);
    }
}
