//! Commutators of spectral projectors with position and momentum type
//! observables, their Schatten norms, and the sweeps that extract the
//! ħ and b scaling.

pub mod fit;
pub mod wigner;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::lattice::{momentum_operator, plane_wave_diagonal, FieldSpec, Grid, HermitianOperator, Point, ScalarFn};
use crate::linalg::{self, SparseMatrix, C64, I};
use crate::spectra::{
    eigendecompose, operator_function, schatten_norms, schatten_norms_normal, spectral_projector, DecompositionSource,
    DensityMatrix, DirectSource, SchattenNorms,
};

pub use fit::{fit_power_law, ScalingFit};

/// Observable entering a commutator with a density matrix.
#[derive(Clone)]
pub enum Observable {
    /// x_j
    Position(usize),
    /// x^β with |β| ≤ 4
    Monomial([u32; 2]),
    Function { name: String, f: ScalarFn },
    /// e^{iα·x}
    PlaneWave(Vec<f64>),
    /// magnetic momentum P_j
    Momentum(usize),
}

impl std::fmt::Debug for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.tag())
    }
}

impl Observable {
    pub fn function(name: impl Into<String>, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        Self::Function {
            name: name.into(),
            f: std::sync::Arc::new(f),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Self::Position(j) => format!("x{}", j + 1),
            Self::Monomial(p) => format!("x^({},{})", p[0], p[1]),
            Self::Function { name, .. } => format!("f:{name}"),
            Self::PlaneWave(a) => format!("exp(i{a:?}.x)"),
            Self::Momentum(j) => format!("P{}", j + 1),
        }
    }

    pub fn is_hermitian(&self) -> bool {
        !matches!(self, Self::PlaneWave(_))
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        let axis_ok = |j: usize| {
            if j < grid.dim() {
                Ok(())
            } else {
                Err(LabError::InvalidParameter {
                    name: "observable",
                    reason: format!("axis {} out of range for d = {}", j + 1, grid.dim()),
                })
            }
        };
        match self {
            Self::Position(j) | Self::Momentum(j) => axis_ok(*j),
            Self::Monomial(p) if p[0] + p[1] > 4 => Err(LabError::InvalidParameter {
                name: "observable",
                reason: format!("monomial degree {} exceeds 4", p[0] + p[1]),
            }),
            Self::Monomial(p) if grid.dim() == 1 && p[1] > 0 => Err(LabError::InvalidParameter {
                name: "observable",
                reason: "second coordinate power in d = 1".into(),
            }),
            Self::PlaneWave(a) if a.len() != grid.dim() || a.iter().any(|v| !v.is_finite()) => {
                Err(LabError::InvalidParameter {
                    name: "alpha",
                    reason: format!("need {} finite components, got {a:?}", grid.dim()),
                })
            }
            _ => Ok(()),
        }
    }

    /// Matrix of the observable on the grid.
    pub fn matrix(&self, grid: &Grid, fields: &FieldSpec, hbar: f64, b: f64) -> Result<Array2<C64>> {
        self.check(grid)?;
        let diagonal = |f: &dyn Fn(&Point) -> f64| -> Result<Array2<C64>> {
            let values: Vec<f64> = grid.sites().map(|x| f(&x)).collect();
            if let Some(k) = values.iter().position(|v| !v.is_finite()) {
                return Err(LabError::NonFiniteSample {
                    what: "observable",
                    site: k,
                    coords: grid.site(k)[..grid.dim()].to_vec(),
                });
            }
            Ok(HermitianOperator::from_real_diagonal(&values).into_matrix())
        };
        match self {
            Self::Position(j) => diagonal(&|x| x[*j]),
            Self::Monomial(p) => diagonal(&|x| x[0].powi(p[0] as i32) * x[1].powi(p[1] as i32)),
            Self::Function { f, .. } => diagonal(&|x| f(x)),
            Self::PlaneWave(a) => Ok(Array2::from_diag(&plane_wave_diagonal(grid, a))),
            Self::Momentum(j) => Ok(momentum_operator(grid, fields, hbar, b, *j)?.into_matrix()),
        }
    }
}

/// AB − BA.
pub fn commutator(a: &Array2<C64>, b: &Array2<C64>) -> Result<Array2<C64>> {
    if a.dim() != b.dim() || a.nrows() != a.ncols() {
        return Err(LabError::SizeMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(linalg::product(a, b) - linalg::product(b, a))
}

/// How Schatten norms of [ω, O] are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormRoute {
    /// Full commutator, eigenvalues (Hermitian O) or singular values.
    #[default]
    Dense,
    /// [ΦΦ†, O] = [Φ, −OΦ]·[O†Φ, Φ]† has rank ≤ 2N; needs orbitals.
    LowRank,
}

/// Schatten norms of [ω, O].
pub fn density_commutator_norms(omega: &DensityMatrix, o: &Array2<C64>, hermitian: bool, route: NormRoute) -> Result<SchattenNorms> {
    if o.dim() != omega.entries().dim() {
        return Err(LabError::SizeMismatch {
            left: omega.entries().dim(),
            right: o.dim(),
        });
    }
    match (route, omega.orbitals()) {
        (NormRoute::LowRank, Some(phi)) => {
            if phi.ncols() == 0 {
                return Ok(SchattenNorms::default());
            }
            let o_phi = linalg::product(o, phi);
            let oh_phi = if hermitian {
                o_phi.clone()
            } else {
                linalg::product(&linalg::dagger(o), phi)
            };
            let left = linalg::hstack(phi, &o_phi.mapv(|z| -z));
            let right = linalg::hstack(&oh_phi, phi);
            Ok(SchattenNorms::from_singular_values(linalg::low_rank_singular_values(&left, &right)?))
        }
        _ => {
            let c = commutator(omega.entries(), o)?;
            if hermitian {
                schatten_norms_normal(&c, true)
            } else {
                schatten_norms(&c)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutatorReport {
    pub observable: String,
    pub trace_norm: f64,
    pub hs_norm: f64,
    pub op_norm: f64,
    pub hbar: f64,
    pub b: f64,
    pub mu: f64,
    pub dim: usize,
    pub rank: usize,
    /// trace_norm / ħ^{1−d}
    pub normalized_value: f64,
}

impl CommutatorReport {
    pub fn norms(&self) -> SchattenNorms {
        SchattenNorms {
            trace: self.trace_norm,
            hs: self.hs_norm,
            op: self.op_norm,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn initial_data_report_with(
    source: &dyn DecompositionSource,
    grid: &Grid,
    fields: &FieldSpec,
    hbar: f64,
    b: f64,
    mu: f64,
    observable: &Observable,
    route: NormRoute,
) -> Result<CommutatorReport> {
    let o = observable.matrix(grid, fields, hbar, b)?;
    let decomp = source.decomposition(grid, fields, hbar, b)?;
    let omega = spectral_projector(&decomp, mu)?;
    let norms = density_commutator_norms(&omega, &o, observable.is_hermitian(), route)?;
    Ok(CommutatorReport {
        observable: observable.tag(),
        trace_norm: norms.trace,
        hs_norm: norms.hs,
        op_norm: norms.op,
        hbar,
        b,
        mu,
        dim: grid.dim(),
        rank: omega.orbitals().map_or(0, |p| p.ncols()),
        normalized_value: norms.trace / hbar.powi(1 - grid.dim() as i32),
    })
}

/// Schatten norms of [Π_μ, O] for the spectral projector of H_{ħ,b}.
pub fn initial_data_report(grid: &Grid, fields: &FieldSpec, hbar: f64, b: f64, mu: f64, observable: &Observable) -> Result<CommutatorReport> {
    initial_data_report_with(&DirectSource, grid, fields, hbar, b, mu, observable, NormRoute::Dense)
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedPoint {
    pub parameter: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingSweep {
    pub reports: Vec<CommutatorReport>,
    pub skipped: Vec<SkippedPoint>,
    pub fit: ScalingFit,
}

fn is_degenerate(e: &LabError) -> bool {
    matches!(e, LabError::DegenerateThreshold { .. } | LabError::DegenerateLevel { .. })
}

/// Trace norm of [Π_μ, O] over an ħ ladder at fixed μ and b, with a
/// log-log exponent fit. Points where μ hits an eigenvalue are skipped.
#[allow(clippy::too_many_arguments)]
pub fn scaling_sweep(
    source: &dyn DecompositionSource,
    grid: &Grid,
    fields: &FieldSpec,
    b: f64,
    mu: f64,
    observable: &Observable,
    hbars: &[f64],
    route: NormRoute,
) -> Result<ScalingSweep> {
    if hbars.len() < fit::MIN_FIT_POINTS {
        return Err(LabError::InsufficientData {
            required: fit::MIN_FIT_POINTS,
            got: hbars.len(),
        });
    }
    let results: Vec<Result<CommutatorReport>> = hbars
        .par_iter()
        .map(|&hbar| initial_data_report_with(source, grid, fields, hbar, b, mu, observable, route))
        .collect();
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for (&hbar, r) in hbars.iter().zip(results) {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) if is_degenerate(&e) => skipped.push(SkippedPoint {
                parameter: hbar,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    let points: Vec<(f64, f64)> = reports.iter().map(|r| (r.hbar, r.trace_norm)).collect();
    let fit = fit_power_law("hbar", &points)?;
    Ok(ScalingSweep { reports, skipped, fit })
}

/// ⟨b⟩ = (1 + b²)^{1/2}.
pub fn japanese_bracket(b: f64) -> f64 {
    (1.0 + b * b).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct BSweepRow {
    pub b: f64,
    pub trace_norm: f64,
    /// trace_norm / ⟨b⟩^power
    pub normalized: f64,
    /// normalized / baseline normalized value
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BSweep {
    pub observable: String,
    pub hbar: f64,
    pub bracket_power: i32,
    pub rows: Vec<BSweepRow>,
    pub max_ratio: f64,
    /// Fit of the trace norm against ⟨b⟩, when the ladder has enough points.
    pub fit: Option<ScalingFit>,
    pub holds: bool,
}

pub const B_RATIO_CAP: f64 = 10.0;

/// Trace norms over a b ladder normalized by ⟨b⟩^power and compared with the
/// first ladder entry (b = 0 when present).
#[allow(clippy::too_many_arguments)]
pub fn b_dependence_sweep(
    source: &dyn DecompositionSource,
    grid: &Grid,
    fields: &FieldSpec,
    hbar: f64,
    mu: f64,
    observable: &Observable,
    b_ladder: &[f64],
    bracket_power: i32,
    route: NormRoute,
) -> Result<BSweep> {
    if b_ladder.is_empty() {
        return Err(LabError::InvalidParameter {
            name: "b_ladder",
            reason: "empty".into(),
        });
    }
    let reports: Vec<CommutatorReport> = b_ladder
        .par_iter()
        .map(|&b| initial_data_report_with(source, grid, fields, hbar, b, mu, observable, route))
        .collect::<Result<_>>()?;
    let normalized: Vec<f64> = reports
        .iter()
        .map(|r| r.trace_norm / japanese_bracket(r.b).powi(bracket_power))
        .collect();
    let baseline = normalized[0];
    let rows: Vec<BSweepRow> = reports
        .iter()
        .zip(&normalized)
        .map(|(r, &n)| BSweepRow {
            b: r.b,
            trace_norm: r.trace_norm,
            normalized: n,
            ratio: if baseline > 0.0 { n / baseline } else { f64::INFINITY },
        })
        .collect();
    let max_ratio = rows.iter().fold(0.0f64, |m, r| m.max(r.ratio));
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (japanese_bracket(r.b), r.trace_norm)).collect();
    Ok(BSweep {
        observable: observable.tag(),
        hbar,
        bracket_power,
        rows,
        max_ratio,
        fit: fit_power_law("<b>", &points).ok(),
        holds: max_ratio <= B_RATIO_CAP,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PlaneWaveReport {
    /// sup over sampled α of ‖[ω, e^{iα·x}]‖₁ / (1 + |α|)
    pub sup: f64,
    pub argmax: Vec<f64>,
    /// ‖[ω, x]‖₁ combined over coordinates
    pub position_trace_norm: f64,
    pub holds: bool,
}

/// α samples on a cube [−a, a]^d with `points` per axis.
pub fn alpha_lattice(dim: usize, half_width: f64, points: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = if points <= 1 {
        vec![0.0]
    } else {
        (0..points)
            .map(|i| -half_width + 2.0 * half_width * i as f64 / (points - 1) as f64)
            .collect()
    };
    match dim {
        1 => axis.iter().map(|&a| vec![a]).collect(),
        _ => axis
            .iter()
            .flat_map(|&a| axis.iter().map(move |&c| vec![a, c]))
            .collect(),
    }
}

/// Sampled sup of the plane-wave commutators against ‖[ω, x]‖₁.
pub fn plane_wave_uniformity(omega: &DensityMatrix, grid: &Grid, alphas: &[Vec<f64>]) -> Result<PlaneWaveReport> {
    let route = NormRoute::LowRank;
    let fields = FieldSpec::harmonic();
    let values: Vec<(f64, Vec<f64>)> = alphas
        .par_iter()
        .map(|alpha| {
            let o = Observable::PlaneWave(alpha.clone()).matrix(grid, &fields, 1.0, 0.0)?;
            let n = density_commutator_norms(omega, &o, false, route)?;
            let len = alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
            Ok((n.trace / (1.0 + len), alpha.clone()))
        })
        .collect::<Result<_>>()?;
    let (sup, argmax) = values
        .into_iter()
        .fold((0.0, vec![0.0; grid.dim()]), |best, v| if v.0 > best.0 { v } else { best });
    let position_trace_norm = position_commutator_norms(omega, grid, route)?.trace;
    Ok(PlaneWaveReport {
        sup,
        argmax,
        position_trace_norm,
        holds: sup <= position_trace_norm * (1.0 + 1e-10) + 1e-12,
    })
}

/// ‖[ω, x]‖ with the ℓ² combination over coordinates.
pub fn position_commutator_norms(omega: &DensityMatrix, grid: &Grid, route: NormRoute) -> Result<SchattenNorms> {
    let fields = FieldSpec::harmonic();
    let parts: Vec<SchattenNorms> = (0..grid.dim())
        .map(|j| {
            let o = Observable::Position(j).matrix(grid, &fields, 1.0, 0.0)?;
            density_commutator_norms(omega, &o, true, route)
        })
        .collect::<Result<_>>()?;
    Ok(SchattenNorms::combine_l2(&parts))
}

/// Continuous piecewise-linear function, constant beyond its end knots.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() || knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(LabError::InvalidParameter {
                name: "knots",
                reason: "need at least one finite knot".into(),
            });
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(LabError::InvalidParameter {
                name: "knots",
                reason: "abscissae must be distinct".into(),
            });
        }
        Ok(Self { knots })
    }

    /// clamp(x, lo, hi)
    pub fn clamp(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, lo), (hi, hi)])
    }

    pub fn constant(c: f64) -> Self {
        Self { knots: vec![(0.0, c)] }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        if x <= k[0].0 {
            return k[0].1;
        }
        if x >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        let i = k.partition_point(|p| p.0 <= x);
        let (x0, y0) = k[i - 1];
        let (x1, y1) = k[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Largest segment slope.
    pub fn lipschitz_constant(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub lhs: f64,
    pub rhs: f64,
    pub lipschitz: f64,
    pub holds: bool,
}

/// ‖[f(A), B]‖₁ ≤ L ‖[A, B]‖₁ with f(A) by functional calculus.
pub fn lipschitz_transfer_check(f: impl Fn(f64) -> f64, lipschitz: f64, a: &HermitianOperator, b: &HermitianOperator) -> Result<LipschitzReport> {
    let fa = operator_function(&eigendecompose(a)?, f);
    let lhs = schatten_norms_normal(&commutator(fa.matrix(), b.matrix())?, true)?.trace;
    let rhs = lipschitz * schatten_norms_normal(&commutator(a.matrix(), b.matrix())?, true)?.trace;
    Ok(LipschitzReport {
        lhs,
        rhs,
        lipschitz,
        holds: lhs <= rhs * (1.0 + 1e-10) + 1e-12,
    })
}

/// Residuals of the magnetic momentum identities on smooth probes.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub hbar: f64,
    pub b: f64,
    pub spacing: f64,
    /// B₁₂ = ∂₁a₂ − ∂₂a₁
    pub field: f64,
    /// max over probes of ‖([P₁, P₂] − iħbB₁₂)g‖
    pub commutator_residual: f64,
    /// max over probes of ‖([P₁², P₂] − 2iħbB₁₂P₁)g‖
    pub square_residual: f64,
}

/// Fixed family of smooth normalized probes, independent of the spacing.
fn identity_probes(grid: &Grid) -> Array2<C64> {
    let l = grid.half_length();
    let sigma = l / 6.0;
    let specs: [([f64; 2], f64); 3] = [([0.0, 0.0], 0.0), ([l / 6.0, -l / 8.0], 0.0), ([-l / 10.0, l / 12.0], 2.0 / l)];
    let n = grid.len();
    let mut probes = Array2::<C64>::zeros((n, specs.len()));
    for (p, (center, k)) in specs.iter().enumerate() {
        for (s, x) in grid.sites().enumerate() {
            let r2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
            probes[[s, p]] = C64::from_polar((-r2 / (2.0 * sigma * sigma)).exp(), k * x[0]);
        }
        let norm = (probes.column(p).iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.cell_volume()).sqrt();
        probes.column_mut(p).mapv_inplace(|z| z / norm);
    }
    probes
}

pub fn momentum_commutator_identity_check(grid: &Grid, fields: &FieldSpec, hbar: f64, b: f64) -> Result<IdentityReport> {
    if grid.dim() != 2 {
        return Err(LabError::UnsupportedDimension {
            dim: grid.dim(),
            operation: "momentum commutator identities",
        });
    }
    let p1 = SparseMatrix::from_dense(momentum_operator(grid, fields, hbar, b, 0)?.matrix());
    let p2 = SparseMatrix::from_dense(momentum_operator(grid, fields, hbar, b, 1)?.matrix());
    let field = fields.vector_potential.field(0, 1);
    let g = identity_probes(grid);
    let shift = I * (hbar * b * field);
    let p1g = p1.mul_dense(&g);
    let p2g = p2.mul_dense(&g);
    let comm = p1.mul_dense(&p2g) - p2.mul_dense(&p1g) - g.mapv(|z| z * shift);
    let square = p1.mul_dense(&p1.mul_dense(&p2g)) - p2.mul_dense(&p1.mul_dense(&p1g)) - p1g.mapv(|z| z * shift * 2.0);
    let m = grid.points_per_axis();
    let deep: Vec<usize> = (0..grid.len())
        .filter(|&k| {
            let idx = grid.multi_index(k);
            (0..2).all(|a| idx[a] >= 2 && idx[a] + 2 < m)
        })
        .collect();
    let worst = |r: &Array2<C64>| -> f64 {
        (0..r.ncols())
            .map(|p| (deep.iter().map(|&k| r[[k, p]].norm_sqr()).sum::<f64>() * grid.cell_volume()).sqrt())
            .fold(0.0, f64::max)
    };
    Ok(IdentityReport {
        hbar,
        b,
        spacing: grid.spacing(),
        field,
        commutator_residual: worst(&comm),
        square_residual: worst(&square),
    })
}

/// Diagonal of a multiplication-type observable, if it is one.
pub fn diagonal_of(o: &Array2<C64>) -> Option<Array1<C64>> {
    let n = o.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && o[[i, j]] != linalg::ZERO {
                return None;
            }
        }
    }
    Some(o.diag().to_owned())
}
