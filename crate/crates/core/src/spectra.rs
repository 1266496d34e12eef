//! Eigendecompositions, spectral projectors, Schatten norms and the
//! spectral-theory diagnostics (Weyl counts, CLR bound, Agmon decay,
//! diamagnetic ordering).

use std::sync::Arc;

use ndarray::{s, Array1, Array2, Axis};
use statrs::function::gamma::gamma;

use crate::error::{LabError, Result};
use crate::lattice::{assemble_hamiltonian, potential_samples, FieldSpec, Grid, HermitianOperator, Point};
use crate::linalg::{self, dagger, C64};

/// Minimum distance between a threshold and any eigenvalue.
pub const THRESHOLD_TOLERANCE: f64 = 1e-9;
pub const EIGEN_RESIDUAL_TOLERANCE: f64 = 1e-8;
pub const PROJECTOR_TOLERANCE: f64 = 1e-10;

/// Ascending eigenvalues with orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<C64>,
}

pub fn eigendecompose(h: &HermitianOperator) -> Result<SpectralDecomposition> {
    let (eigenvalues, eigenvectors) = linalg::eigh(h.matrix())?;
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Array2<C64> {
        &self.eigenvectors
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// #{n : λ_n ≤ μ}.
    pub fn count_below(&self, mu: f64) -> usize {
        self.eigenvalues.iter().take_while(|&&l| l <= mu).count()
    }

    /// First `k` eigenvector columns.
    pub fn lowest_vectors(&self, k: usize) -> Array2<C64> {
        self.eigenvectors.slice(s![.., ..k]).to_owned()
    }

    /// Largest of ‖H v_n − λ_n v_n‖ / (|λ_n| + ‖H‖_op).
    pub fn max_relative_residual(&self, h: &HermitianOperator) -> f64 {
        let scale = self
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, l| m.max(l.abs()));
        let hv = linalg::product(h.matrix(), &self.eigenvectors);
        let mut worst: f64 = 0.0;
        for (n, (col_hv, col_v)) in hv.axis_iter(Axis(1)).zip(self.eigenvectors.axis_iter(Axis(1))).enumerate() {
            let lambda = self.eigenvalues[n];
            let r: f64 = col_hv
                .iter()
                .zip(col_v.iter())
                .map(|(a, v)| (a - v * lambda).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r / (lambda.abs() + scale).max(f64::MIN_POSITIVE));
        }
        worst
    }

    /// max |V†V − I| entry.
    pub fn unitarity_defect(&self) -> f64 {
        let g = dagger(&self.eigenvectors).dot(&self.eigenvectors);
        linalg::max_abs(&(g - linalg::identity(self.len())))
    }

    fn check_threshold(&self, mu: f64) -> Result<()> {
        if !mu.is_finite() {
            return Err(LabError::InvalidParameter {
                name: "mu",
                reason: format!("must be finite, got {mu}"),
            });
        }
        let hit = self
            .eigenvalues
            .iter()
            .enumerate()
            .find(|(_, l)| (**l - mu).abs() <= THRESHOLD_TOLERANCE);
        match hit {
            Some((index, &eigenvalue)) => Err(LabError::DegenerateThreshold {
                mu,
                index: index + 1,
                eigenvalue,
                tolerance: THRESHOLD_TOLERANCE,
            }),
            None => Ok(()),
        }
    }

    /// Eigenvector columns with λ_n ≤ μ.
    pub fn occupied_vectors(&self, mu: f64) -> Result<Array2<C64>> {
        self.check_threshold(mu)?;
        Ok(self.lowest_vectors(self.count_below(mu)))
    }
}

/// Supplies decompositions of H_{ħ,b}; implementations may cache.
pub trait DecompositionSource: Sync {
    fn decomposition(&self, grid: &Grid, fields: &FieldSpec, hbar: f64, b: f64) -> Result<Arc<SpectralDecomposition>>;
}

/// Assembles and decomposes on every request.
#[derive(Debug, Clone, Copy, Default)]
pub struct DirectSource;

impl DecompositionSource for DirectSource {
    fn decomposition(&self, grid: &Grid, fields: &FieldSpec, hbar: f64, b: f64) -> Result<Arc<SpectralDecomposition>> {
        Ok(Arc::new(eigendecompose(&assemble_hamiltonian(grid, fields, hbar, b)?)?))
    }
}

/// Hermitian matrix with spectrum in [0, 1]. When the state is a projector
/// built from orthonormal columns Φ, the factor is kept so that
/// commutator norms can use the rank-2N route.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    entries: Array2<C64>,
    particle_count: f64,
    orbitals: Option<Array2<C64>>,
}

impl DensityMatrix {
    /// Validates 0 ≤ γ ≤ 1 within 1e-10.
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        let defect = linalg::hermitian_defect(&entries);
        if defect > 1e-10 {
            return Err(LabError::StateCorruption(format!(
                "density matrix not Hermitian (defect {defect:.3e})"
            )));
        }
        let w = linalg::eigvalsh(&entries)?;
        if let (Some(lo), Some(hi)) = (w.first(), w.last()) {
            if *lo < -PROJECTOR_TOLERANCE || *hi > 1.0 + PROJECTOR_TOLERANCE {
                return Err(LabError::StateCorruption(format!(
                    "density matrix spectrum [{lo:.3e}, {hi:.3e}] leaves [0, 1]"
                )));
            }
        }
        Ok(Self::trusted(entries))
    }

    /// Skips validation; used for matrices that are correct by construction.
    pub fn trusted(entries: Array2<C64>) -> Self {
        let particle_count = entries.diag().iter().map(|z| z.re).sum();
        Self {
            entries,
            particle_count,
            orbitals: None,
        }
    }

    /// ω = Φ Φ† for orthonormal columns Φ.
    pub fn from_orbitals(orbitals: Array2<C64>) -> Self {
        let entries = orbitals.dot(&dagger(&orbitals));
        let particle_count = orbitals.iter().map(|z| z.norm_sqr()).sum();
        Self {
            entries,
            particle_count,
            orbitals: Some(orbitals),
        }
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn orbitals(&self) -> Option<&Array2<C64>> {
        self.orbitals.as_ref()
    }

    /// tr γ.
    pub fn particle_count(&self) -> f64 {
        self.particle_count
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    /// ‖γ² − γ‖_op.
    pub fn projector_defect(&self) -> Result<f64> {
        let w = match &self.orbitals {
            // nonzero spectrum of ΦΦ† equals that of Φ†Φ
            Some(phi) => linalg::eigvalsh(&dagger(phi).dot(phi))?,
            None => linalg::eigvalsh(&self.entries)?,
        };
        Ok(w.iter().fold(0.0f64, |m, g| m.max((g * g - g).abs())))
    }

    /// (min, max) eigenvalue.
    pub fn spectral_range(&self) -> Result<(f64, f64)> {
        let w = linalg::eigvalsh(&self.entries)?;
        Ok((w[0], w[w.len() - 1]))
    }
}

/// Π = Σ_{λ_n ≤ μ} v_n v_n†.
pub fn spectral_projector(decomp: &SpectralDecomposition, mu: f64) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_orbitals(decomp.occupied_vectors(mu)?))
}

/// Gap midpoint (λ_N + λ_{N+1})/2; λ_M + 1 when N = M.
pub fn chemical_potential_for_rank(decomp: &SpectralDecomposition, n: usize) -> Result<f64> {
    let m = decomp.len();
    if n == 0 || n > m {
        return Err(LabError::LevelOutOfRange {
            requested: n,
            available: m,
        });
    }
    let w = decomp.eigenvalues();
    if n == m {
        return Ok(w[m - 1] + 1.0);
    }
    let (lower, upper) = (w[n - 1], w[n]);
    if upper - lower <= 2.0 * THRESHOLD_TOLERANCE {
        return Err(LabError::DegenerateLevel { level: n, lower, upper });
    }
    Ok(0.5 * (lower + upper))
}

/// Σ f(λ_n) v_n v_n†.
pub fn operator_function(decomp: &SpectralDecomposition, f: impl Fn(f64) -> f64) -> HermitianOperator {
    let v = decomp.eigenvectors();
    let mut scaled = v.clone();
    for (mut col, &l) in scaled.axis_iter_mut(Axis(1)).zip(decomp.eigenvalues().iter()) {
        let fl = f(l);
        col.mapv_inplace(|z| z * fl);
    }
    HermitianOperator::from_symmetrized(scaled.dot(&dagger(v)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schatten {
    Trace,
    HilbertSchmidt,
    Operator,
}

/// Trace, Hilbert-Schmidt and operator norm of one matrix (or the ℓ²
/// combination over a tuple).
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct SchattenNorms {
    pub trace: f64,
    pub hs: f64,
    pub op: f64,
}

impl SchattenNorms {
    pub fn from_singular_values(s: impl IntoIterator<Item = f64>) -> Self {
        let mut out = Self::default();
        let mut sq = 0.0;
        for v in s {
            let v = v.abs();
            out.trace += v;
            sq += v * v;
            out.op = out.op.max(v);
        }
        out.hs = sq.sqrt();
        out
    }

    /// ‖(A_1, …, A_n)‖ = (Σ ‖A_j‖²)^{1/2}, separately per norm.
    pub fn combine_l2(parts: &[SchattenNorms]) -> Self {
        let comb = |f: fn(&SchattenNorms) -> f64| parts.iter().map(|p| f(p).powi(2)).sum::<f64>().sqrt();
        Self {
            trace: comb(|p| p.trace),
            hs: comb(|p| p.hs),
            op: comb(|p| p.op),
        }
    }

    pub fn get(&self, p: Schatten) -> f64 {
        match p {
            Schatten::Trace => self.trace,
            Schatten::HilbertSchmidt => self.hs,
            Schatten::Operator => self.op,
        }
    }

    /// op ≤ hs ≤ trace up to relative slack.
    pub fn ordered(&self, slack: f64) -> bool {
        self.op <= self.hs * (1.0 + slack) + slack && self.hs <= self.trace * (1.0 + slack) + slack
    }
}

/// All three norms of a general square matrix via singular values.
pub fn schatten_norms(a: &Array2<C64>) -> Result<SchattenNorms> {
    Ok(SchattenNorms::from_singular_values(linalg::singular_values(a.view())?))
}

/// Norms of a normal matrix iA with A Hermitian or anti-Hermitian; the
/// singular values are the eigenvalue moduli.
pub fn schatten_norms_normal(a: &Array2<C64>, anti_hermitian: bool) -> Result<SchattenNorms> {
    let w = if anti_hermitian {
        let mut h = a.mapv(|z| z * linalg::I);
        linalg::symmetrize(&mut h);
        linalg::eigvalsh(&h)?
    } else {
        let mut h = a.clone();
        linalg::symmetrize(&mut h);
        linalg::eigvalsh(&h)?
    };
    Ok(SchattenNorms::from_singular_values(w))
}

pub fn schatten_norm(a: &Array2<C64>, p: Schatten) -> Result<f64> {
    if p == Schatten::HilbertSchmidt {
        return Ok(a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
    }
    Ok(schatten_norms(a)?.get(p))
}

/// Volume of the unit ball in R^d.
pub fn unit_ball_volume(dim: usize) -> f64 {
    let d = dim as f64;
    std::f64::consts::PI.powf(d / 2.0) / gamma(d / 2.0 + 1.0)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct WeylReport {
    pub quantum_count: f64,
    pub classical_count: f64,
    pub hbar: f64,
    pub b: f64,
    pub mu: f64,
    pub relative_error: f64,
    /// The classical region {V ≤ μ} reaches the box boundary.
    pub touches_boundary: bool,
}

/// (2πħ)^{-d} ω_d ∫ φ (μ − V)_+^{d/2} dx by trapezoidal quadrature.
pub fn classical_count(grid: &Grid, potential: &[f64], hbar: f64, mu: f64, phi: &[f64]) -> f64 {
    let d = grid.dim() as f64;
    let integrand: Vec<f64> = potential
        .iter()
        .zip(phi)
        .map(|(v, p)| p * (mu - v).max(0.0).powf(d / 2.0))
        .collect();
    (2.0 * std::f64::consts::PI * hbar).powf(-d) * unit_ball_volume(grid.dim()) * grid.integrate(&integrand)
}

/// tr(φ Π_μ) against the classical phase-space count.
pub fn weyl_law_compare_with(
    decomp: &SpectralDecomposition,
    grid: &Grid,
    fields: &FieldSpec,
    hbar: f64,
    b: f64,
    mu: f64,
    phi: &[f64],
) -> Result<WeylReport> {
    if phi.len() != grid.len() {
        return Err(LabError::SizeMismatch {
            left: (phi.len(), 1),
            right: (grid.len(), 1),
        });
    }
    if phi.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(LabError::InvalidParameter {
            name: "phi",
            reason: "weight must be finite and non-negative".into(),
        });
    }
    let occupied = decomp.occupied_vectors(mu)?;
    let quantum_count: f64 = occupied
        .axis_iter(Axis(0))
        .zip(phi)
        .map(|(row, p)| p * row.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    let potential = potential_samples(grid, fields)?;
    let classical = classical_count(grid, &potential, hbar, mu, phi);
    let touches_boundary = (0..grid.len()).any(|k| grid.is_boundary(k) && potential[k] <= mu);
    Ok(WeylReport {
        quantum_count,
        classical_count: classical,
        hbar,
        b,
        mu,
        relative_error: (quantum_count - classical).abs() / classical.max(1.0),
        touches_boundary,
    })
}

pub fn weyl_law_compare(grid: &Grid, fields: &FieldSpec, hbar: f64, b: f64, mu: f64, phi: &[f64]) -> Result<WeylReport> {
    let decomp = eigendecompose(&assemble_hamiltonian(grid, fields, hbar, b)?)?;
    weyl_law_compare_with(&decomp, grid, fields, hbar, b, mu, phi)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ClrReport {
    /// #{λ_n ≤ μ + ε/4}
    pub lhs: usize,
    pub rhs: f64,
    pub holds: bool,
    pub hbar: f64,
    pub b: f64,
    pub mu: f64,
    pub epsilon: f64,
}

/// ħ^{-d} · 4 ε^{-d/2-1} / ((4π)^{d/2} Γ(d/2+1)) · ∫ (V − μ − 3ε/8)₋^{d/2+1} dx.
pub fn clr_bound(grid: &Grid, potential: &[f64], hbar: f64, mu: f64, epsilon: f64) -> f64 {
    let d = grid.dim() as f64;
    let shift = mu + 3.0 * epsilon / 8.0;
    let integrand: Vec<f64> = potential
        .iter()
        .map(|v| (shift - v).max(0.0).powf(d / 2.0 + 1.0))
        .collect();
    let constant = 4.0 * epsilon.powf(-d / 2.0 - 1.0) / ((4.0 * std::f64::consts::PI).powf(d / 2.0) * gamma(d / 2.0 + 1.0));
    hbar.powf(-d) * constant * grid.integrate(&integrand)
}

pub fn clr_from_eigenvalues(
    eigenvalues: &Array1<f64>,
    grid: &Grid,
    fields: &FieldSpec,
    hbar: f64,
    b: f64,
    mu: f64,
    epsilon: f64,
) -> Result<ClrReport> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(LabError::InvalidParameter {
            name: "epsilon",
            reason: format!("must be finite and positive, got {epsilon}"),
        });
    }
    let potential = potential_samples(grid, fields)?;
    let lhs = eigenvalues.iter().filter(|&&l| l <= mu + epsilon / 4.0).count();
    let rhs = clr_bound(grid, &potential, hbar, mu, epsilon);
    Ok(ClrReport {
        lhs,
        rhs,
        holds: lhs as f64 <= rhs,
        hbar,
        b,
        mu,
        epsilon,
    })
}

pub fn clr_bound_check(grid: &Grid, fields: &FieldSpec, hbar: f64, b: f64, mu: f64, epsilon: f64) -> Result<ClrReport> {
    let h = assemble_hamiltonian(grid, fields, hbar, b)?;
    let w = linalg::eigvalsh(h.matrix())?;
    clr_from_eigenvalues(&w, grid, fields, hbar, b, mu, epsilon)
}

/// Convex region used to enclose the classically allowed set.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Region {
    Ball { center: [f64; 2], radius: f64 },
    Box { lower: [f64; 2], upper: [f64; 2] },
}

impl Region {
    pub fn ball(radius: f64) -> Self {
        Self::Ball {
            center: [0.0; 2],
            radius,
        }
    }

    /// Euclidean distance from x to the region (0 inside).
    pub fn distance(&self, x: &Point, dim: usize) -> f64 {
        match self {
            Self::Ball { center, radius } => {
                let r: f64 = (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum::<f64>().sqrt();
                (r - radius).max(0.0)
            }
            Self::Box { lower, upper } => (0..dim)
                .map(|a| (lower[a] - x[a]).max(x[a] - upper[a]).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct AgmonReport {
    pub hbar: f64,
    pub mu: f64,
    pub epsilon: f64,
    /// (λ_n, ‖e^{φ_ε/ħ} ψ_n‖) for every λ_n < μ + ε/4.
    pub weighted_norms: Vec<(f64, f64)>,
    pub max_weighted_norm: f64,
}

/// Weighted norms ‖e^{φ_ε/ħ}ψ_n‖ with φ_ε = ε·dist(x, Ũ), Ũ the unit
/// enlargement of the region.
pub fn agmon_decay_check(
    decomp: &SpectralDecomposition,
    grid: &Grid,
    fields: &FieldSpec,
    hbar: f64,
    mu: f64,
    epsilon: f64,
    region: &Region,
) -> Result<AgmonReport> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(LabError::InvalidParameter {
            name: "epsilon",
            reason: format!("must be finite and positive, got {epsilon}"),
        });
    }
    let potential = potential_samples(grid, fields)?;
    let dim = grid.dim();
    if let Some(k) = (0..grid.len()).find(|&k| potential[k] - mu < epsilon && region.distance(&grid.site(k), dim) > 0.0) {
        return Err(LabError::Config(format!(
            "region does not contain the set {{V - mu < epsilon}}: site {k} at {:?} has V = {}",
            &grid.site(k)[..dim],
            potential[k]
        )));
    }
    let weight: Vec<f64> = grid
        .sites()
        .map(|x| (epsilon * (region.distance(&x, dim) - 1.0).max(0.0) / hbar).exp())
        .collect();
    let cut = mu + epsilon / 4.0;
    let weighted_norms: Vec<(f64, f64)> = decomp
        .eigenvalues()
        .iter()
        .take_while(|&&l| l < cut)
        .enumerate()
        .map(|(n, &l)| {
            let col = decomp.eigenvectors().column(n);
            let w: f64 = col
                .iter()
                .zip(&weight)
                .map(|(z, wt)| (wt * z.norm()).powi(2))
                .sum::<f64>()
                .sqrt();
            (l, w)
        })
        .collect();
    if weighted_norms.is_empty() {
        return Err(LabError::InvalidParameter {
            name: "mu",
            reason: format!("no eigenvalue below mu + epsilon/4 = {cut}"),
        });
    }
    let max_weighted_norm = weighted_norms.iter().fold(0.0f64, |m, (_, w)| m.max(*w));
    Ok(AgmonReport {
        hbar,
        mu,
        epsilon,
        weighted_norms,
        max_weighted_norm,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DiamagneticReport {
    pub hbar: f64,
    pub b: f64,
    pub ground_magnetic: f64,
    pub ground_free: f64,
    pub grid_constant: f64,
    pub allowance: f64,
    pub holds: bool,
}

/// λ₁(H_{ħ,b}) ≥ λ₁(H_{ħ,0}) − C_grid·h.
pub fn diamagnetic_check(grid: &Grid, fields: &FieldSpec, hbar: f64, b: f64, grid_constant: f64) -> Result<DiamagneticReport> {
    let ground = |bb: f64| -> Result<f64> {
        let h = assemble_hamiltonian(grid, fields, hbar, bb)?;
        Ok(linalg::eigvalsh(h.matrix())?[0])
    };
    let ground_free = ground(0.0)?;
    let ground_magnetic = if b == 0.0 { ground_free } else { ground(b)? };
    let allowance = grid_constant * grid.spacing();
    Ok(DiamagneticReport {
        hbar,
        b,
        ground_magnetic,
        ground_free,
        grid_constant,
        allowance,
        holds: ground_magnetic >= ground_free - allowance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_grid, ScalarPotential, VectorPotential};
    use crate::linalg::{identity, max_abs};
    use ndarray::array;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn oscillator(hbar: f64, l: f64, m: usize) -> (Grid, FieldSpec, SpectralDecomposition, HermitianOperator) {
        let grid = build_grid(1, m, l).unwrap();
        let fields = FieldSpec::harmonic();
        let h = assemble_hamiltonian(&grid, &fields, hbar, 0.0).unwrap();
        let d = eigendecompose(&h).unwrap();
        (grid, fields, d, h)
    }

    #[test]
    fn small_decompositions() {
        let h = HermitianOperator::from_real_diagonal(&[3.0, 1.0, 2.0]);
        let d = eigendecompose(&h).unwrap();
        assert_eq!(d.eigenvalues().to_vec(), vec![1.0, 2.0, 3.0]);
        let x = HermitianOperator::new(array![[c(0.0), c(1.0)], [c(1.0), c(0.0)]]).unwrap();
        let d = eigendecompose(&x).unwrap();
        assert!((d.eigenvalues()[0] + 1.0).abs() < 1e-14);
        let v = d.eigenvectors();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(((v[[0, 0]] * v[[1, 0]].conj()).re + 0.5).abs() < 1e-14);
        assert!((v[[0, 1]].norm() - r).abs() < 1e-14);
    }

    #[test]
    fn oscillator_spectrum_and_invariants() {
        let (_, _, d, h) = oscillator(0.05, 6.0, 481);
        for n in 0..3 {
            let exact = 0.05 * (2 * n + 1) as f64;
            assert!((d.eigenvalues()[n] - exact).abs() / exact < 5e-3);
        }
        assert!(d.max_relative_residual(&h) < EIGEN_RESIDUAL_TOLERANCE);
        assert!(d.unitarity_defect() < 1e-10);
    }

    #[test]
    fn oscillator_error_is_second_order() {
        let err = |m: usize| {
            let (_, _, d, _) = oscillator(0.1, 4.0, m);
            (d.eigenvalues()[0] - 0.1).abs()
        };
        let ratio = err(81) / err(161);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn projector_examples() {
        let (_, _, d, _) = oscillator(0.05, 6.0, 481);
        let p = spectral_projector(&d, 1.0).unwrap();
        assert_eq!(p.orbitals().unwrap().ncols(), 10);
        assert!((p.particle_count() - 10.0).abs() < 1e-10);
        assert!(p.projector_defect().unwrap() < PROJECTOR_TOLERANCE);
        assert_eq!(spectral_projector(&d, -1.0).unwrap().particle_count(), 0.0);
        let small = eigendecompose(&HermitianOperator::from_real_diagonal(&[1.0, 2.0, 3.0])).unwrap();
        let full = spectral_projector(&small, 10.0).unwrap();
        assert!(max_abs(&(full.entries() - identity(3))) < 1e-14);
        match spectral_projector(&small, 2.0) {
            Err(LabError::DegenerateThreshold { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn chemical_potential_examples() {
        let small = eigendecompose(&HermitianOperator::from_real_diagonal(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(chemical_potential_for_rank(&small, 1).unwrap(), 1.5);
        assert_eq!(chemical_potential_for_rank(&small, 3).unwrap(), 4.0);
        assert!(chemical_potential_for_rank(&small, 4).is_err());
        let degenerate = eigendecompose(&HermitianOperator::from_real_diagonal(&[1.0, 1.0, 3.0])).unwrap();
        assert!(matches!(
            chemical_potential_for_rank(&degenerate, 1),
            Err(LabError::DegenerateLevel { .. })
        ));
        let (_, _, d, _) = oscillator(0.1, 6.0, 481);
        let mu = chemical_potential_for_rank(&d, 5).unwrap();
        assert!((mu - 1.0).abs() < 5e-3);
        assert_eq!(spectral_projector(&d, mu).unwrap().orbitals().unwrap().ncols(), 5);
    }

    #[test]
    fn operator_function_examples() {
        let (_, _, d, h) = oscillator(0.1, 4.0, 81);
        let same = operator_function(&d, |l| l);
        assert!(max_abs(&(same.matrix() - h.matrix())) < 1e-10);
        let one = operator_function(&d, |_| 1.0);
        assert!(max_abs(&(one.matrix() - identity(81))) < 1e-10);
        let ind = operator_function(&d, |l| if l <= 0.6 { 1.0 } else { 0.0 });
        let p = spectral_projector(&d, 0.6).unwrap();
        assert!(max_abs(&(ind.matrix() - p.entries())) < 1e-10);
    }

    #[test]
    fn schatten_examples() {
        let n = 5;
        let norms = schatten_norms(&identity(n)).unwrap();
        assert!((norms.trace - 5.0).abs() < 1e-12);
        assert!((norms.hs - 5f64.sqrt()).abs() < 1e-12);
        assert!((norms.op - 1.0).abs() < 1e-12);
        let u = array![c(0.6), C64::new(0.0, 0.8)];
        let uu = Array2::from_shape_fn((2, 2), |(i, j)| u[i] * u[j].conj());
        let norms = schatten_norms(&uu).unwrap();
        for v in [norms.trace, norms.hs, norms.op] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!((schatten_norm(&uu, Schatten::HilbertSchmidt).unwrap() - 1.0).abs() < 1e-12);
        let combined = SchattenNorms::combine_l2(&[norms, norms]);
        assert!((combined.trace - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn weyl_examples() {
        let (grid, fields, d, _) = oscillator(0.05, 6.0, 481);
        let phi = vec![1.0; grid.len()];
        let r = weyl_law_compare_with(&d, &grid, &fields, 0.05, 0.0, 1.0, &phi).unwrap();
        assert!((r.quantum_count - 10.0).abs() < 1e-9);
        assert!((r.classical_count - 10.0).abs() < 5e-2);
        assert!(!r.touches_boundary);
        let r = weyl_law_compare_with(&d, &grid, &fields, 0.05, 0.0, -1.0, &phi).unwrap();
        assert_eq!(r.quantum_count, 0.0);
        assert_eq!(r.classical_count, 0.0);
    }

    #[test]
    fn clr_examples() {
        let grid = build_grid(1, 481, 6.0).unwrap();
        let fields = FieldSpec::harmonic();
        let r = clr_bound_check(&grid, &fields, 0.05, 0.0, 1.0, 0.5).unwrap();
        // eigenvalues 0.05(2n+1) ≤ 1.125
        assert_eq!(r.lhs, 11);
        assert!(r.holds && r.rhs > 100.0);
        let low = clr_bound_check(&grid, &fields, 0.05, 0.0, -2.0, 0.5).unwrap();
        assert_eq!(low.lhs, 0);
        assert!(low.holds);
    }

    #[test]
    fn agmon_examples() {
        let (grid, fields, d, _) = oscillator(0.1, 6.0, 241);
        let r = agmon_decay_check(&d, &grid, &fields, 0.1, 1.0, 0.25, &Region::ball(1.2)).unwrap();
        assert!(r.weighted_norms.iter().all(|(l, _)| *l < 1.0625));
        assert!(r.weighted_norms.iter().all(|(_, w)| *w >= 1.0 - 1e-12));
        // a region covering the whole box makes the weight trivial
        let big = agmon_decay_check(&d, &grid, &fields, 0.1, 1.0, 0.25, &Region::ball(100.0)).unwrap();
        assert!((big.max_weighted_norm - 1.0).abs() < 1e-10);
        assert!(matches!(
            agmon_decay_check(&d, &grid, &fields, 0.1, 1.0, 0.25, &Region::ball(0.5)),
            Err(LabError::Config(_))
        ));
    }

    #[test]
    fn diamagnetic_examples() {
        let grid = build_grid(2, 21, 2.5).unwrap();
        let fields = FieldSpec::new(VectorPotential::symmetric(), ScalarPotential::harmonic());
        let r0 = diamagnetic_check(&grid, &fields, 0.1, 0.0, 1.0).unwrap();
        assert_eq!(r0.ground_magnetic, r0.ground_free);
        let mut last = r0.ground_magnetic;
        for b in [0.5, 1.0, 2.0] {
            let r = diamagnetic_check(&grid, &fields, 0.1, b, 1.0).unwrap();
            assert!(r.holds && r.ground_magnetic > last);
            last = r.ground_magnetic;
        }
    }

    #[test]
    fn gauge_covariance_is_exact() {
        let grid = build_grid(2, 13, 2.0).unwrap();
        let sym = FieldSpec::new(VectorPotential::symmetric(), ScalarPotential::harmonic());
        let lan = FieldSpec::new(VectorPotential::landau(), ScalarPotential::harmonic());
        let a = linalg::eigvalsh(assemble_hamiltonian(&grid, &sym, 0.2, 1.5).unwrap().matrix()).unwrap();
        let b = linalg::eigvalsh(assemble_hamiltonian(&grid, &lan, 0.2, 1.5).unwrap().matrix()).unwrap();
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= 1e-9 * scale);
        }
    }

    fn random_matrix(n: usize, seed: &[f64]) -> Array2<C64> {
        Array2::from_shape_fn((n, n), |(i, j)| C64::new(seed[(2 * (i * n + j)) % seed.len()], seed[(2 * (i * n + j) + 1) % seed.len()]))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn norm_ordering_and_holder(n in 2usize..7, xs in prop::collection::vec(-1.0f64..1.0, 64), ys in prop::collection::vec(-1.0f64..1.0, 64)) {
            let a = random_matrix(n, &xs);
            let b = random_matrix(n, &ys);
            let na = schatten_norms(&a).unwrap();
            prop_assert!(na.ordered(1e-12));
            let ab = schatten_norms(&a.dot(&b)).unwrap();
            let nb = schatten_norms(&b).unwrap();
            prop_assert!(ab.trace <= na.hs * nb.hs * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn projector_rank_matches_count(mu in 0.0f64..2.0, hbar in 0.08f64..0.3) {
            let grid = build_grid(1, 61, 3.0).unwrap();
            let h = assemble_hamiltonian(&grid, &FieldSpec::harmonic(), hbar, 0.0).unwrap();
            let d = eigendecompose(&h).unwrap();
            if let Ok(p) = spectral_projector(&d, mu) {
                prop_assert_eq!(p.orbitals().unwrap().ncols(), d.count_below(mu));
                prop_assert!(p.projector_defect().unwrap() < PROJECTOR_TOLERANCE);
                prop_assert!(linalg::hermitian_defect(p.entries()) < 1e-12);
            }
        }

        #[test]
        fn hamiltonian_is_hermitian_and_kinetic_positive(b in 0.0f64..4.0, hbar in 0.05f64..1.0, landau in any::<bool>()) {
            let grid = build_grid(2, 7, 1.5).unwrap();
            let a = if landau { VectorPotential::landau() } else { VectorPotential::symmetric() };
            let fields = FieldSpec::new(a, ScalarPotential::zero());
            let h = assemble_hamiltonian(&grid, &fields, hbar, b).unwrap();
            prop_assert!(linalg::hermitian_defect(h.matrix()) <= 1e-12 * max_abs(h.matrix()));
            prop_assert!(linalg::eigvalsh(h.matrix()).unwrap()[0] >= -1e-10);
        }
    }
}
