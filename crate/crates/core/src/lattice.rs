//! Grids, potentials and the discretized magnetic Schrödinger operator.
//!
//! The kinetic part of H is assembled as a sum over links of |P⁺u|², where
//! P⁺ is the forward difference carrying the Peierls phase of the vector
//! potential sampled at the link midpoint. For linear potentials the midpoint
//! rule integrates `a` exactly along each link, which makes the assembled
//! operator exactly gauge covariant and keeps the lattice diamagnetic
//! inequality exact. At b = 0 it is the usual (2d+1)-point stencil with
//! Dirichlet truncation.
//!
//! Matrices act on coefficient vectors with the plain Euclidean pairing; the
//! physical inner product carries an extra h^d. An integral kernel K(x, y)
//! corresponds to the matrix entry K(x_j, x_k) h^d, so operator traces are
//! plain matrix traces.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::error::{LabError, Result};
use crate::linalg::{self, C64, ZERO};

/// Point in R^d, unused trailing coordinates are zero.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
}

/// Rectangular lattice on [-L, L]^d with M points per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    points_per_axis: usize,
    half_length: f64,
    spacing: f64,
    boundary: Boundary,
}

/// Build a grid; sites are enumerated row-major (last axis fastest).
pub fn build_grid(dim: usize, points_per_axis: usize, half_length: f64) -> Result<Grid> {
    Grid::new(dim, points_per_axis, half_length)
}

impl Grid {
    pub fn new(dim: usize, points_per_axis: usize, half_length: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(LabError::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if points_per_axis < 3 {
            return Err(LabError::InvalidGrid(format!(
                "{points_per_axis} points per axis leaves no interior point (need >= 3)"
            )));
        }
        if !half_length.is_finite() || half_length <= 0.0 {
            return Err(LabError::InvalidGrid(format!(
                "half length must be finite and positive, got {half_length}"
            )));
        }
        Ok(Self {
            dim,
            points_per_axis,
            half_length,
            spacing: 2.0 * half_length / (points_per_axis - 1) as f64,
            boundary: Boundary::Dirichlet,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Total number of sites, M^d.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// h^d, the volume element.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn axis_coordinate(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.spacing
    }

    pub fn axis_coordinates(&self) -> Vec<f64> {
        (0..self.points_per_axis).map(|i| self.axis_coordinate(i)).collect()
    }

    /// Per-axis indices of site `k`.
    pub fn multi_index(&self, k: usize) -> [usize; 2] {
        let m = self.points_per_axis;
        match self.dim {
            1 => [k, 0],
            _ => [k / m, k % m],
        }
    }

    pub fn index(&self, idx: [usize; 2]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] * self.points_per_axis + idx[1],
        }
    }

    pub fn site(&self, k: usize) -> Point {
        let idx = self.multi_index(k);
        let mut p = [0.0; 2];
        for (axis, coord) in p.iter_mut().enumerate().take(self.dim) {
            *coord = self.axis_coordinate(idx[axis]);
        }
        p
    }

    pub fn sites(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |k| self.site(k))
    }

    /// Neighbour of site `k` one step forward along `axis`, if inside the box.
    pub fn forward(&self, k: usize, axis: usize) -> Option<usize> {
        let mut idx = self.multi_index(k);
        if idx[axis] + 1 >= self.points_per_axis {
            return None;
        }
        idx[axis] += 1;
        Some(self.index(idx))
    }

    /// True when no coordinate sits on the outer layer of the box.
    pub fn is_interior(&self, k: usize) -> bool {
        let idx = self.multi_index(k);
        (0..self.dim).all(|a| idx[a] > 0 && idx[a] + 1 < self.points_per_axis)
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        let idx = self.multi_index(k);
        (0..self.dim).any(|a| idx[a] == 0 || idx[a] + 1 == self.points_per_axis)
    }

    /// Same box with spacing halved (2M - 1 points per axis).
    pub fn refined(&self) -> Grid {
        Grid::new(self.dim, 2 * self.points_per_axis - 1, self.half_length).expect("refinement of a valid grid")
    }

    /// Trapezoidal quadrature of sampled values over the box.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let m = self.points_per_axis;
        let weight = |i: usize| if i == 0 || i + 1 == m { 0.5 } else { 1.0 };
        values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let idx = self.multi_index(k);
                let w: f64 = (0..self.dim).map(|a| weight(idx[a])).product();
                w * v
            })
            .sum::<f64>()
            * self.cell_volume()
    }

    pub fn describe(&self) -> String {
        format!(
            "d={} M={} L={} h={}",
            self.dim, self.points_per_axis, self.half_length, self.spacing
        )
    }
}

/// Vector potential a(x) = A x, with a_j = sum_k A[j][k] x_k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorPotential {
    pub matrix: [[f64; 2]; 2],
}

impl VectorPotential {
    pub fn zero() -> Self {
        Self { matrix: [[0.0; 2]; 2] }
    }

    /// a(x1, x2) = (-x2, x1) / 2.
    pub fn symmetric() -> Self {
        Self {
            matrix: [[0.0, -0.5], [0.5, 0.0]],
        }
    }

    /// a(x1, x2) = (-x2, 0); same field as the symmetric gauge.
    pub fn landau() -> Self {
        Self {
            matrix: [[0.0, -1.0], [0.0, 0.0]],
        }
    }

    /// 1D potential a(x) = c x.
    pub fn linear_1d(c: f64) -> Self {
        Self {
            matrix: [[c, 0.0], [0.0, 0.0]],
        }
    }

    pub fn linear(matrix: [[f64; 2]; 2]) -> Self {
        Self { matrix }
    }

    pub fn component(&self, j: usize, x: &Point) -> f64 {
        self.matrix[j][0] * x[0] + self.matrix[j][1] * x[1]
    }

    /// B_kj = d_k a_j - d_j a_k (constant for linear a).
    pub fn field(&self, k: usize, j: usize) -> f64 {
        self.matrix[j][k] - self.matrix[k][j]
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().flatten().all(|&c| c == 0.0)
    }
}

/// One term coef * x1^p1 * x2^p2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub powers: [u32; 2],
}

impl Monomial {
    pub fn eval(&self, x: &Point) -> f64 {
        self.coef * x[0].powi(self.powers[0] as i32) * x[1].powi(self.powers[1] as i32)
    }

    pub fn degree(&self) -> u32 {
        self.powers[0] + self.powers[1]
    }
}

pub type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// External potential V.
#[derive(Clone)]
pub enum ScalarPotential {
    /// scale * |x|^2
    Harmonic { scale: f64 },
    /// scale * |x|^4
    Quartic { scale: f64 },
    Polynomial(Vec<Monomial>),
    Custom { name: String, f: ScalarFn },
}

impl ScalarPotential {
    pub fn harmonic() -> Self {
        Self::Harmonic { scale: 1.0 }
    }

    pub fn quartic() -> Self {
        Self::Quartic { scale: 1.0 }
    }

    pub fn zero() -> Self {
        Self::Polynomial(Vec::new())
    }

    /// 1D polynomial sum_k c_k x^k.
    pub fn polynomial_1d(coefficients: &[f64]) -> Self {
        Self::Polynomial(
            coefficients
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(k, &coef)| Monomial {
                    coef,
                    powers: [k as u32, 0],
                })
                .collect(),
        )
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        match self {
            Self::Harmonic { scale } => scale * (x[0] * x[0] + x[1] * x[1]),
            Self::Quartic { scale } => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                scale * r2 * r2
            }
            Self::Polynomial(terms) => terms.iter().map(|t| t.eval(x)).sum(),
            Self::Custom { f, .. } => f(x),
        }
    }

    /// Polynomial degree; `None` for custom potentials.
    pub fn degree(&self) -> Option<u32> {
        match self {
            Self::Harmonic { .. } => Some(2),
            Self::Quartic { .. } => Some(4),
            Self::Polynomial(terms) => Some(terms.iter().map(Monomial::degree).max().unwrap_or(0)),
            Self::Custom { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Harmonic { scale } => format!("harmonic({scale})"),
            Self::Quartic { scale } => format!("quartic({scale})"),
            Self::Polynomial(terms) => {
                let parts: Vec<String> = terms
                    .iter()
                    .map(|t| format!("{}*x^{:?}", t.coef, t.powers))
                    .collect();
                format!("poly[{}]", parts.join("+"))
            }
            Self::Custom { name, .. } => format!("custom({name})"),
        }
    }
}

impl fmt::Debug for ScalarPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Pair interaction W (even).
#[derive(Clone)]
pub enum Interaction {
    None,
    Constant(f64),
    /// amplitude * exp(-|x|^2 / (2 width^2))
    Gaussian { amplitude: f64, width: f64 },
    Custom { name: String, f: ScalarFn },
}

impl Interaction {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self::Gaussian { amplitude, width }
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, y: &Point) -> f64 {
        match self {
            Self::None => 0.0,
            Self::Constant(c) => *c,
            Self::Gaussian { amplitude, width } => {
                amplitude * (-(y[0] * y[0] + y[1] * y[1]) / (2.0 * width * width)).exp()
            }
            Self::Custom { f, .. } => f(y),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::None => true,
            Self::Constant(c) => *c == 0.0,
            Self::Gaussian { amplitude, .. } => *amplitude == 0.0,
            Self::Custom { .. } => false,
        }
    }

    /// Closed form of ∫(1+|p|²)|Ŵ(p)| dp with W(x) = ∫ Ŵ(p) e^{ip·x} dp.
    pub fn fourier_moment_closed_form(&self, dim: usize) -> Option<f64> {
        match self {
            Self::None => Some(0.0),
            Self::Constant(c) => Some(c.abs()),
            Self::Gaussian { amplitude, width } => Some(amplitude.abs() * (1.0 + dim as f64 / (width * width))),
            Self::Custom { .. } => None,
        }
    }

    /// Closed form of ∫|Ŵ(p)| dp.
    pub fn fourier_l1_closed_form(&self) -> Option<f64> {
        match self {
            Self::None => Some(0.0),
            Self::Constant(c) => Some(c.abs()),
            Self::Gaussian { amplitude, .. } => Some(amplitude.abs()),
            Self::Custom { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::None => "none".into(),
            Self::Constant(c) => format!("constant({c})"),
            Self::Gaussian { amplitude, width } => format!("gaussian({amplitude},{width})"),
            Self::Custom { name, .. } => format!("custom({name})"),
        }
    }
}

impl fmt::Debug for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The potentials entering H and the many-body Hamiltonian.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub vector_potential: VectorPotential,
    pub scalar_potential: ScalarPotential,
    pub interaction: Interaction,
}

impl FieldSpec {
    pub fn new(vector_potential: VectorPotential, scalar_potential: ScalarPotential) -> Self {
        Self {
            vector_potential,
            scalar_potential,
            interaction: Interaction::None,
        }
    }

    pub fn with_interaction(mut self, interaction: Interaction) -> Self {
        self.interaction = interaction;
        self
    }

    /// V = |x|^2 with no magnetic potential.
    pub fn harmonic() -> Self {
        Self::new(VectorPotential::zero(), ScalarPotential::harmonic())
    }

    /// Checks W(x) = W(-x) on every difference vector of the grid.
    pub fn interaction_is_even(&self, grid: &Grid) -> bool {
        let m = grid.points_per_axis() as i64;
        let h = grid.spacing();
        let range: Vec<i64> = (-(m - 1)..m).collect();
        let second: Vec<i64> = if grid.dim() == 2 { range.clone() } else { vec![0] };
        range.iter().all(|&i| {
            second.iter().all(|&j| {
                let y = [i as f64 * h, j as f64 * h];
                let w = self.interaction.eval(&y);
                let wm = self.interaction.eval(&[-y[0], -y[1]]);
                (w - wm).abs() <= 1e-12 * w.abs().max(1.0)
            })
        })
    }

    pub fn label(&self) -> String {
        format!(
            "a={:?} V={} W={}",
            self.vector_potential.matrix,
            self.scalar_potential.label(),
            self.interaction.label()
        )
    }
}

/// Dense self-adjoint matrix in the site (or mode) basis.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    entries: Array2<C64>,
    hermitian_tolerance: f64,
}

impl HermitianOperator {
    /// Wraps a matrix, recording its Hermitian defect. Fails when the defect
    /// exceeds 1e-12 relative to the largest entry.
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(LabError::SizeMismatch {
                left: (r, c),
                right: (r, r),
            });
        }
        let defect = linalg::hermitian_defect(&entries);
        let scale = linalg::max_abs(&entries).max(f64::MIN_POSITIVE);
        if defect > 1e-12 * scale {
            return Err(LabError::StateCorruption(format!(
                "matrix is not Hermitian: defect {defect:.3e} at scale {scale:.3e}"
            )));
        }
        Ok(Self {
            entries,
            hermitian_tolerance: defect,
        })
    }

    /// Symmetrizes before wrapping.
    pub fn from_symmetrized(mut entries: Array2<C64>) -> Self {
        linalg::symmetrize(&mut entries);
        Self {
            entries,
            hermitian_tolerance: 0.0,
        }
    }

    pub fn from_real_diagonal(values: &[f64]) -> Self {
        let diag: Array1<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        Self {
            entries: Array2::from_diag(&diag),
            hermitian_tolerance: 0.0,
        }
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.entries
    }

    pub fn hermitian_tolerance(&self) -> f64 {
        self.hermitian_tolerance
    }

    /// Largest eigenvalue modulus.
    pub fn op_norm(&self) -> Result<f64> {
        let w = linalg::eigvalsh(&self.entries)?;
        Ok(w.iter().fold(0.0f64, |m, x| m.max(x.abs())))
    }

    /// Real diagonal, when the operator is diagonal.
    pub fn diagonal_values(&self) -> Option<Vec<f64>> {
        let n = self.size();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.entries[[i, j]] != ZERO {
                    return None;
                }
            }
        }
        Some((0..n).map(|i| self.entries[[i, i]].re).collect())
    }
}

fn sample_potential(grid: &Grid, v: &ScalarPotential) -> Result<Vec<f64>> {
    sample_function(grid, "potential", |x| v.eval(x))
}

fn sample_function(grid: &Grid, what: &'static str, f: impl Fn(&Point) -> f64) -> Result<Vec<f64>> {
    grid.sites()
        .enumerate()
        .map(|(k, x)| {
            let v = f(&x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(LabError::NonFiniteSample {
                    what,
                    site: k,
                    coords: x[..grid.dim()].to_vec(),
                })
            }
        })
        .collect()
}

/// Samples of V on the sites.
pub fn potential_samples(grid: &Grid, fields: &FieldSpec) -> Result<Vec<f64>> {
    sample_potential(grid, &fields.scalar_potential)
}

fn check_hbar_b(hbar: f64, b: f64) -> Result<()> {
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(LabError::InvalidParameter {
            name: "hbar",
            reason: format!("must be finite and positive, got {hbar}"),
        });
    }
    if !(b.is_finite() && b >= 0.0) {
        return Err(LabError::InvalidParameter {
            name: "b",
            reason: format!("must be finite and non-negative, got {b}"),
        });
    }
    Ok(())
}

/// H = Σ_j (P_j⁺)† P_j⁺ + V on the grid.
pub fn assemble_hamiltonian(grid: &Grid, fields: &FieldSpec, hbar: f64, b: f64) -> Result<HermitianOperator> {
    check_hbar_b(hbar, b)?;
    let potential = sample_potential(grid, &fields.scalar_potential)?;
    let n = grid.len();
    let h = grid.spacing();
    let hop = hbar * hbar / (h * h);
    let mut m = Array2::<C64>::zeros((n, n));
    for (k, &v) in potential.iter().enumerate() {
        // every site carries two links per axis, ghost links included
        m[[k, k]] = C64::new(v + 2.0 * grid.dim() as f64 * hop, 0.0);
    }
    for k in 0..n {
        let x = grid.site(k);
        for axis in 0..grid.dim() {
            if let Some(next) = grid.forward(k, axis) {
                let mut mid = x;
                mid[axis] += 0.5 * h;
                let theta = b * fields.vector_potential.component(axis, &mid) * h / hbar;
                let t = C64::from_polar(-hop, -theta);
                m[[k, next]] = t;
                m[[next, k]] = t.conj();
            }
        }
    }
    HermitianOperator::new(m)
}

/// P_j = -iħ D_j (central difference) - b a_j(x).
pub fn momentum_operator(grid: &Grid, fields: &FieldSpec, hbar: f64, b: f64, axis: usize) -> Result<HermitianOperator> {
    check_hbar_b(hbar, b)?;
    if axis >= grid.dim() {
        return Err(LabError::InvalidParameter {
            name: "axis",
            reason: format!("axis {axis} out of range for d = {}", grid.dim()),
        });
    }
    let n = grid.len();
    let c = C64::new(0.0, -hbar / (2.0 * grid.spacing()));
    let mut m = Array2::<C64>::zeros((n, n));
    for k in 0..n {
        let x = grid.site(k);
        m[[k, k]] = C64::new(-b * fields.vector_potential.component(axis, &x), 0.0);
        if let Some(next) = grid.forward(k, axis) {
            m[[k, next]] = c;
            m[[next, k]] = c.conj();
        }
    }
    HermitianOperator::new(m)
}

/// diag(f(x_k)).
pub fn multiplication_operator(grid: &Grid, f: impl Fn(&Point) -> f64) -> Result<HermitianOperator> {
    let values = sample_function(grid, "function", f)?;
    Ok(HermitianOperator::from_real_diagonal(&values))
}

/// Diagonal unitary diag(exp(i α·x_k)).
pub fn plane_wave_operator(grid: &Grid, alpha: &[f64]) -> Array2<C64> {
    Array2::from_diag(&plane_wave_diagonal(grid, alpha))
}

pub fn plane_wave_diagonal(grid: &Grid, alpha: &[f64]) -> Array1<C64> {
    grid.sites()
        .map(|x| {
            let phase: f64 = alpha.iter().zip(x.iter()).map(|(a, xi)| a * xi).sum();
            C64::from_polar(1.0, phase)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, eigvalsh, identity, max_abs};
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn grid_examples() {
        let g = build_grid(1, 5, 2.0).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.axis_coordinates(), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        let g = build_grid(2, 3, 1.0).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.site(5), [0.0, 1.0]);
        let g = build_grid(1, 401, 10.0).unwrap();
        assert!((g.spacing() - 0.05).abs() < 1e-15);
        assert_eq!(g.len(), 401);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(build_grid(1, 2, 1.0).is_err());
        assert!(build_grid(1, 5, f64::NAN).is_err());
        assert!(build_grid(1, 5, f64::INFINITY).is_err());
        assert!(build_grid(3, 5, 1.0).is_err());
    }

    #[test]
    fn free_stencil_is_tridiagonal() {
        let g = build_grid(1, 3, 1.0).unwrap();
        let fields = FieldSpec::new(VectorPotential::zero(), ScalarPotential::zero());
        let h = assemble_hamiltonian(&g, &fields, 1.0, 0.0).unwrap();
        let expected = array![
            [c(2.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)],
            [c(-1.0, 0.0), c(2.0, 0.0), c(-1.0, 0.0)],
            [c(0.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0)]
        ];
        assert!(max_abs(&(h.matrix() - &expected)) < 1e-15);
    }

    #[test]
    fn non_finite_potential_is_reported() {
        let g = build_grid(1, 5, 2.0).unwrap();
        let fields = FieldSpec::new(
            VectorPotential::zero(),
            ScalarPotential::custom("pole", |x| 1.0 / x[0]),
        );
        match assemble_hamiltonian(&g, &fields, 1.0, 0.0) {
            Err(LabError::NonFiniteSample { site, .. }) => assert_eq!(site, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn momentum_matrix_on_three_sites() {
        let g = build_grid(1, 3, 1.0).unwrap();
        let fields = FieldSpec::new(VectorPotential::linear_1d(1.0), ScalarPotential::zero());
        let p = momentum_operator(&g, &fields, 1.0, 1.0, 0).unwrap();
        // -b a(x_k) = (1, 0, -1) on the diagonal
        let expected = array![
            [c(1.0, 0.0), c(0.0, -0.5), c(0.0, 0.0)],
            [c(0.0, 0.5), c(0.0, 0.0), c(0.0, -0.5)],
            [c(0.0, 0.0), c(0.0, 0.5), c(-1.0, 0.0)]
        ];
        assert!(max_abs(&(p.matrix() - &expected)) < 1e-15);
    }

    #[test]
    fn momentum_kills_constants_in_interior() {
        let g = build_grid(2, 6, 1.0).unwrap();
        let fields = FieldSpec::new(VectorPotential::zero(), ScalarPotential::zero());
        for axis in 0..2 {
            let p = momentum_operator(&g, &fields, 0.3, 0.0, axis).unwrap();
            let u = Array1::from_elem(g.len(), c(1.0, 0.0));
            let pu = p.matrix().dot(&u);
            for k in 0..g.len() {
                if g.is_interior(k) {
                    assert!(pu[k].norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn multiplication_examples() {
        let g = build_grid(1, 3, 1.0).unwrap();
        let one = multiplication_operator(&g, |_| 1.0).unwrap();
        assert!(max_abs(&(one.matrix() - &identity(3))) == 0.0);
        let x = multiplication_operator(&g, |x| x[0]).unwrap();
        assert_eq!(x.diagonal_values().unwrap(), vec![-1.0, 0.0, 1.0]);
        let g2 = build_grid(2, 3, 1.0).unwrap();
        let r2 = multiplication_operator(&g2, |x| x[0] * x[0] + x[1] * x[1]).unwrap();
        assert_eq!(
            r2.diagonal_values().unwrap(),
            vec![2.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 2.0]
        );
        assert!(multiplication_operator(&g, |x| x[0].ln()).is_err());
    }

    #[test]
    fn plane_wave_examples() {
        let g = build_grid(1, 9, 2.0).unwrap();
        assert!(max_abs(&(plane_wave_operator(&g, &[0.0]) - identity(9))) < 1e-15);
        let u = plane_wave_diagonal(&g, &[std::f64::consts::PI / 2.0]);
        assert!((u[0] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!((u[8] - c(-1.0, 0.0)).norm() < 1e-14);
        let g2 = build_grid(2, 7, 3.0).unwrap();
        let m = plane_wave_operator(&g2, &[0.7, -1.3]);
        assert!(max_abs(&(dagger(&m).dot(&m) - identity(g2.len()))) < 1e-14);
    }

    #[test]
    fn field_matrix_of_linear_gauges() {
        assert_eq!(VectorPotential::symmetric().field(0, 1), 1.0);
        assert_eq!(VectorPotential::landau().field(0, 1), 1.0);
        assert_eq!(VectorPotential::symmetric().field(1, 0), -1.0);
        assert_eq!(VectorPotential::zero().field(0, 1), 0.0);
    }

    #[test]
    fn gaussian_interaction_is_even() {
        let g = build_grid(2, 5, 1.0).unwrap();
        let f = FieldSpec::harmonic().with_interaction(Interaction::gaussian(1.0, 0.5));
        assert!(f.interaction_is_even(&g));
        let odd = FieldSpec::harmonic().with_interaction(Interaction::custom("odd", |y| y[0]));
        assert!(!odd.interaction_is_even(&g));
    }

    #[test]
    fn kinetic_part_is_positive_with_field() {
        let g = build_grid(2, 9, 2.0).unwrap();
        let fields = FieldSpec::new(VectorPotential::symmetric(), ScalarPotential::zero());
        let h = assemble_hamiltonian(&g, &fields, 0.2, 3.0).unwrap();
        assert!(h.hermitian_tolerance() <= 1e-12 * max_abs(h.matrix()));
        let w = eigvalsh(h.matrix()).unwrap();
        assert!(w[0] >= -1e-10);
    }

    #[test]
    fn trapezoid_integrates_polynomials() {
        let g = build_grid(1, 201, 1.0).unwrap();
        let v: Vec<f64> = g.sites().map(|x| x[0] * x[0]).collect();
        assert!((g.integrate(&v) - 2.0 / 3.0).abs() < 1e-4);
        let g2 = build_grid(2, 41, 1.0).unwrap();
        let ones = vec![1.0; g2.len()];
        assert!((g2.integrate(&ones) - 4.0).abs() < 1e-12);
    }
}
