//! Time-dependent Hartree–Fock dynamics for a rank-N projector ω = ΦΦ†,
//! with direct and exchange terms, and the monitors of its semiclassical
//! structure.
//!
//! Grid convention: ρ(x_k) = ω_kk / (N h^d), so
//!   (W∗ρ)(x_k) = h^d Σ_m W(x_k − x_m) ρ(x_m) = N⁻¹ Σ_m W(x_k − x_m) ω_mm.
//! The exchange kernel N⁻¹ ω(x, y) W(x − y) has ω(x_k, x_m) = ω_km / h^d, and
//! a kernel K maps to the matrix K(x_k, x_m) h^d, so X_km = N⁻¹ ω_km W(x_k − x_m)
//! with no residual h^d factor.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::commutators::{alpha_lattice, density_commutator_norms, NormRoute, Observable};
use crate::error::{LabError, Result};
use crate::lattice::{FieldSpec, Grid, HermitianOperator, Interaction};
use crate::linalg::{self, dagger, C64};
use crate::spectra::{DensityMatrix, SchattenNorms};

pub const INVARIANT_TOLERANCE: f64 = 1e-9;

/// A one-body model whose Hartree–Fock Hamiltonian is affine in ω.
pub trait MeanField: Sync {
    fn size(&self) -> usize;
    /// h_HF(ω)
    fn hamiltonian(&self, omega: &Array2<C64>) -> Array2<C64>;
    /// Hartree–Fock energy E(ω); dE/dω = h_HF(ω).
    fn energy(&self, omega: &Array2<C64>) -> f64;
}

/// W(x_k − x_m) for all site pairs.
pub fn pair_matrix(grid: &Grid, w: &Interaction) -> Result<Array2<f64>> {
    let n = grid.len();
    let sites: Vec<_> = grid.sites().collect();
    let mut out = Array2::<f64>::zeros((n, n));
    for k in 0..n {
        for m in 0..n {
            let y = [sites[k][0] - sites[m][0], sites[k][1] - sites[m][1]];
            let v = w.eval(&y);
            if !v.is_finite() {
                return Err(LabError::NonFiniteSample {
                    what: "interaction",
                    site: k,
                    coords: y[..grid.dim()].to_vec(),
                });
            }
            out[[k, m]] = v;
        }
    }
    Ok(out)
}

/// ρ(x_k) = ω_kk / (N h^d).
pub fn density_from_state(omega: &DensityMatrix, grid: &Grid, n: usize) -> Result<Vec<f64>> {
    let trace = omega.particle_count();
    if (trace - n as f64).abs() > 1e-6 {
        return Err(LabError::StateCorruption(format!("tr ω = {trace} but N = {n}")));
    }
    let scale = 1.0 / (n as f64 * grid.cell_volume());
    Ok(omega.entries().diag().iter().map(|z| z.re * scale).collect())
}

/// (W∗ρ)(x_k) = h^d Σ_m W(x_k − x_m) ρ(x_m).
pub fn mean_field_potential(rho: &[f64], w: &Interaction, grid: &Grid) -> Result<Vec<f64>> {
    let pairs = pair_matrix(grid, w)?;
    let rho = Array1::from(rho.to_vec());
    Ok((pairs.dot(&rho) * grid.cell_volume()).to_vec())
}

/// X_km = N⁻¹ ω_km W(x_k − x_m).
pub fn exchange_operator(omega: &DensityMatrix, w: &Interaction, grid: &Grid, n: usize) -> Result<HermitianOperator> {
    let pairs = pair_matrix(grid, w)?;
    Ok(HermitianOperator::from_symmetrized(exchange_matrix(omega.entries(), &pairs, n as f64)))
}

fn exchange_matrix(omega: &Array2<C64>, pairs: &Array2<f64>, n: f64) -> Array2<C64> {
    let mut x = omega.clone();
    x.zip_mut_with(pairs, |z, &w| *z *= w / n);
    x
}

/// H + W∗ρ − X on the grid.
#[derive(Debug, Clone)]
pub struct GridMeanField {
    one_body: Array2<C64>,
    pairs: Array2<f64>,
    n_particles: f64,
    interacting: bool,
}

impl GridMeanField {
    pub fn new(hamiltonian: &HermitianOperator, grid: &Grid, w: &Interaction, n: usize) -> Result<Self> {
        if hamiltonian.size() != grid.len() {
            return Err(LabError::SizeMismatch {
                left: (hamiltonian.size(), hamiltonian.size()),
                right: (grid.len(), grid.len()),
            });
        }
        Ok(Self {
            one_body: hamiltonian.matrix().clone(),
            pairs: pair_matrix(grid, w)?,
            n_particles: n as f64,
            interacting: !w.is_zero(),
        })
    }

    pub fn pairs(&self) -> &Array2<f64> {
        &self.pairs
    }

    pub fn exchange(&self, omega: &Array2<C64>) -> Array2<C64> {
        exchange_matrix(omega, &self.pairs, self.n_particles)
    }
}

impl MeanField for GridMeanField {
    fn size(&self) -> usize {
        self.one_body.nrows()
    }

    fn hamiltonian(&self, omega: &Array2<C64>) -> Array2<C64> {
        let mut h = self.one_body.clone();
        if !self.interacting {
            return h;
        }
        let occupation: Array1<f64> = omega.diag().mapv(|z| z.re);
        let direct = self.pairs.dot(&occupation) / self.n_particles;
        h -= &self.exchange(omega);
        for (k, v) in direct.iter().enumerate() {
            h[[k, k]] += v;
        }
        linalg::symmetrize(&mut h);
        h
    }

    fn energy(&self, omega: &Array2<C64>) -> f64 {
        let one: f64 = (&self.one_body * &omega.t()).iter().map(|z| z.re).sum();
        if !self.interacting {
            return one;
        }
        let occupation: Array1<f64> = omega.diag().mapv(|z| z.re);
        let direct = occupation.dot(&self.pairs.dot(&occupation));
        let exchange: f64 = omega
            .iter()
            .zip(self.pairs.iter())
            .map(|(z, w)| w * z.norm_sqr())
            .sum();
        one + (direct - exchange) / (2.0 * self.n_particles)
    }
}

/// Hartree–Fock model in a truncated orthonormal mode space with one-body
/// matrix h_ij and two-body elements ⟨ij|W|kl⟩ stored at (iK + j, kK + l).
#[derive(Debug, Clone)]
pub struct ModeMeanField {
    one_body: Array2<C64>,
    two_body: Array2<C64>,
    coupling: f64,
}

impl ModeMeanField {
    pub fn new(one_body: Array2<C64>, two_body: Array2<C64>, coupling: f64) -> Result<Self> {
        let k = one_body.nrows();
        if two_body.dim() != (k * k, k * k) {
            return Err(LabError::SizeMismatch {
                left: two_body.dim(),
                right: (k * k, k * k),
            });
        }
        Ok(Self {
            one_body,
            two_body,
            coupling,
        })
    }

    fn element(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        let m = self.one_body.nrows();
        self.two_body[[i * m + j, k * m + l]]
    }
}

impl MeanField for ModeMeanField {
    fn size(&self) -> usize {
        self.one_body.nrows()
    }

    /// F_ij = h_ij + λ Σ_kl (⟨ik|W|jl⟩ − ⟨ik|W|lj⟩) ω_lk
    fn hamiltonian(&self, omega: &Array2<C64>) -> Array2<C64> {
        let m = self.size();
        let mut f = self.one_body.clone();
        for i in 0..m {
            for j in 0..m {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..m {
                    for l in 0..m {
                        acc += (self.element(i, k, j, l) - self.element(i, k, l, j)) * omega[[l, k]];
                    }
                }
                f[[i, j]] += acc * self.coupling;
            }
        }
        linalg::symmetrize(&mut f);
        f
    }

    /// tr(hω) + (λ/2) Σ (⟨ij|W|kl⟩ − ⟨ij|W|lk⟩) ω_ki ω_lj
    fn energy(&self, omega: &Array2<C64>) -> f64 {
        let m = self.size();
        let one: f64 = (&self.one_body * &omega.t()).iter().map(|z| z.re).sum();
        let mut two = C64::new(0.0, 0.0);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        two += (self.element(i, j, k, l) - self.element(i, j, l, k)) * omega[[k, i]] * omega[[l, j]];
                    }
                }
            }
        }
        one + 0.5 * self.coupling * two.re
    }
}

/// Orbitals Φ with ω = ΦΦ† at a given time.
#[derive(Debug, Clone)]
pub struct HFState {
    pub time: f64,
    orbitals: Array2<C64>,
    omega: Array2<C64>,
}

impl HFState {
    pub fn new(orbitals: Array2<C64>) -> Self {
        let omega = orbitals.dot(&dagger(&orbitals));
        Self {
            time: 0.0,
            orbitals,
            omega,
        }
    }

    pub fn orbitals(&self) -> &Array2<C64> {
        &self.orbitals
    }

    pub fn omega(&self) -> &Array2<C64> {
        &self.omega
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        DensityMatrix::from_orbitals(self.orbitals.clone())
    }

    /// tr ω
    pub fn trace(&self) -> f64 {
        self.orbitals.iter().map(|z| z.norm_sqr()).sum()
    }

    /// ‖ω² − ω‖_op from the Gram matrix Φ†Φ.
    pub fn projector_defect(&self) -> Result<f64> {
        let w = linalg::eigvalsh(&dagger(&self.orbitals).dot(&self.orbitals))?;
        Ok(w.iter().fold(0.0f64, |m, g| m.max((g * g - g).abs())))
    }
}

/// Midpoint step with `passes` fixed-point corrections: ω ← UωU† with
/// U = exp(−iδt h_mid/ħ) and h_mid = (h(ω) + h(ω̃))/2, ω̃ the current
/// prediction of the end state.
pub fn hf_step(state: &HFState, dt: f64, model: &dyn MeanField, hbar: f64, passes: usize) -> Result<HFState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(LabError::InvalidParameter {
            name: "dt",
            reason: format!("must be finite and positive, got {dt}"),
        });
    }
    let tau = dt / hbar;
    let h0 = model.hamiltonian(&state.omega);
    let mut orbitals = linalg::unitary_apply(&h0, tau, &state.orbitals)?;
    for _ in 0..passes {
        let predicted = orbitals.dot(&dagger(&orbitals));
        let mut h_mid = model.hamiltonian(&predicted);
        h_mid += &h0;
        h_mid.mapv_inplace(|z| z * 0.5);
        orbitals = linalg::unitary_apply(&h_mid, tau, &state.orbitals)?;
    }
    let omega = orbitals.dot(&dagger(&orbitals));
    Ok(HFState {
        time: state.time + dt,
        orbitals,
        omega,
    })
}

/// Observables monitored along a grid trajectory.
#[derive(Debug, Clone)]
pub struct MonitorSpec {
    pub grid: Grid,
    pub fields: FieldSpec,
    pub hbar: f64,
    pub b: f64,
    pub alphas: Vec<Vec<f64>>,
    /// Multi-indices β with 1 ≤ |β| ≤ deg V.
    pub betas: Vec<[u32; 2]>,
}

impl MonitorSpec {
    /// α on [−4, 4]^d with 9 points per axis; β up to deg V.
    pub fn standard(grid: &Grid, fields: &FieldSpec, hbar: f64, b: f64) -> Self {
        let degree = fields.scalar_potential.degree().unwrap_or(2).max(1);
        let mut betas = Vec::new();
        for total in 1..=degree.min(4) {
            for first in (0..=total).rev() {
                let second = total - first;
                if grid.dim() == 1 && second > 0 {
                    continue;
                }
                betas.push([first, second]);
            }
        }
        Self {
            grid: grid.clone(),
            fields: fields.clone(),
            hbar,
            b,
            alphas: alpha_lattice(grid.dim(), 4.0, 9),
            betas,
        }
    }

    /// Observables R used by the exchange-term check: momenta, monomials,
    /// and plane waves along the axes at the box edge.
    pub fn exchange_observables(&self) -> Vec<Observable> {
        let mut out: Vec<Observable> = (0..self.grid.dim()).map(Observable::Momentum).collect();
        out.extend(self.betas.iter().map(|&b| Observable::Monomial(b)));
        for j in 0..self.grid.dim() {
            let mut a = vec![0.0; self.grid.dim()];
            a[j] = 4.0;
            out.push(Observable::PlaneWave(a));
        }
        out
    }
}

/// One monitor sample; values divided by ħN.
#[derive(Debug, Clone, Serialize)]
pub struct MonitorRow {
    pub time: f64,
    pub plane_wave_sup: f64,
    pub momentum: f64,
    pub monomials: Vec<(String, f64)>,
    pub gronwall: f64,
}

impl MonitorRow {
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("plane_wave_sup".to_string(), self.plane_wave_sup),
            ("momentum".to_string(), self.momentum),
        ];
        out.extend(self.monomials.iter().cloned());
        out.push(("gronwall".to_string(), self.gronwall));
        out
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PropagationMonitor {
    /// ħN, the normalization of every entry.
    pub scale: f64,
    pub rows: Vec<MonitorRow>,
}

/// Raw trace norms of the monitored commutators.
#[derive(Debug, Clone)]
pub struct MonitorSample {
    pub plane_wave_sup: f64,
    pub momentum: SchattenNorms,
    pub momentum_parts: Vec<SchattenNorms>,
    pub monomials: Vec<(String, SchattenNorms)>,
}

pub fn monitor_sample(omega: &DensityMatrix, spec: &MonitorSpec) -> Result<MonitorSample> {
    let grid = &spec.grid;
    let route = NormRoute::LowRank;
    let plane: Vec<f64> = spec
        .alphas
        .par_iter()
        .map(|alpha| {
            let o = Observable::PlaneWave(alpha.clone()).matrix(grid, &spec.fields, spec.hbar, spec.b)?;
            let len = alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
            Ok(density_commutator_norms(omega, &o, false, route)?.trace / (1.0 + len))
        })
        .collect::<Result<_>>()?;
    let momentum_parts: Vec<SchattenNorms> = (0..grid.dim())
        .map(|j| {
            let o = Observable::Momentum(j).matrix(grid, &spec.fields, spec.hbar, spec.b)?;
            density_commutator_norms(omega, &o, true, route)
        })
        .collect::<Result<_>>()?;
    let monomials = spec
        .betas
        .iter()
        .map(|&beta| {
            let obs = Observable::Monomial(beta);
            let o = obs.matrix(grid, &spec.fields, spec.hbar, spec.b)?;
            Ok((obs.tag(), density_commutator_norms(omega, &o, true, route)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MonitorSample {
        plane_wave_sup: plane.into_iter().fold(0.0, f64::max),
        momentum: SchattenNorms::combine_l2(&momentum_parts),
        momentum_parts,
        monomials,
    })
}

fn monitor_row(time: f64, sample: &MonitorSample, scale: f64) -> MonitorRow {
    let monomials: Vec<(String, f64)> = sample
        .monomials
        .iter()
        .map(|(tag, n)| (tag.clone(), n.trace / scale))
        .collect();
    let plane_wave_sup = sample.plane_wave_sup / scale;
    let momentum = sample.momentum.trace / scale;
    let gronwall = plane_wave_sup + momentum + monomials.iter().map(|(_, v)| v).sum::<f64>();
    MonitorRow {
        time,
        plane_wave_sup,
        momentum,
        monomials,
        gronwall,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExchangeBoundReport {
    pub observable: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// ‖[ω, [X, R]]‖₁ ≤ (2/N) (Σ|Ŵ|) ‖[R, ω]‖₁.
pub fn exchange_bound_check(
    omega: &DensityMatrix,
    exchange: &Array2<C64>,
    observable: &Array2<C64>,
    fourier_l1: f64,
    n: usize,
) -> Result<(f64, f64)> {
    let inner = crate::commutators::commutator(exchange, observable)?;
    let lhs = density_commutator_norms(omega, &inner, false, NormRoute::LowRank)?.trace;
    let rhs = 2.0 / n as f64 * fourier_l1 * density_commutator_norms(omega, observable, false, NormRoute::LowRank)?.trace;
    Ok((lhs, rhs))
}

/// Discrete Fourier coefficients of W on the difference lattice (2M − 1
/// points per axis), W(y) = Σ_p Ŵ(p) e^{ip·y} exactly. Returns (|p|², Ŵ(p)).
pub fn interaction_spectrum(w: &Interaction, grid: &Grid) -> Result<Vec<(f64, f64)>> {
    let m = grid.points_per_axis() as i64;
    let h = grid.spacing();
    let count = (2 * m - 1) as usize;
    let offsets: Vec<i64> = (-(m - 1)..m).collect();
    let momenta: Vec<f64> = offsets
        .iter()
        .map(|&q| 2.0 * std::f64::consts::PI * q as f64 / (h * count as f64))
        .collect();
    // phase[q][y] = e^{-i p_q y}
    let phase = Array2::from_shape_fn((count, count), |(q, y)| {
        C64::from_polar(1.0 / count as f64, -momenta[q] * offsets[y] as f64 * h)
    });
    let sample = |i: i64, j: i64| -> Result<f64> {
        let y = [i as f64 * h, j as f64 * h];
        let v = w.eval(&y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(LabError::NonFiniteSample {
                what: "interaction",
                site: 0,
                coords: y[..grid.dim()].to_vec(),
            })
        }
    };
    match grid.dim() {
        1 => {
            let values: Array1<C64> = offsets
                .iter()
                .map(|&i| sample(i, 0).map(|v| C64::new(v, 0.0)))
                .collect::<Result<_>>()?;
            let hat = phase.dot(&values);
            Ok(momenta.iter().zip(hat.iter()).map(|(p, z)| (p * p, z.norm())).collect())
        }
        _ => {
            let mut values = Array2::<C64>::zeros((count, count));
            for (a, &i) in offsets.iter().enumerate() {
                for (c, &j) in offsets.iter().enumerate() {
                    values[[a, c]] = C64::new(sample(i, j)?, 0.0);
                }
            }
            let hat = phase.dot(&values).dot(&phase.t());
            let mut out = Vec::with_capacity(count * count);
            for (a, row) in hat.axis_iter(Axis(0)).enumerate() {
                for (c, z) in row.iter().enumerate() {
                    out.push((momenta[a] * momenta[a] + momenta[c] * momenta[c], z.norm()));
                }
            }
            Ok(out)
        }
    }
}

/// Σ_p |Ŵ(p)| on the discrete conjugate lattice.
pub fn interaction_fourier_l1(w: &Interaction, grid: &Grid) -> Result<f64> {
    Ok(interaction_spectrum(w, grid)?.iter().map(|(_, a)| a).sum())
}

/// Σ_p (1 + |p|²) |Ŵ(p)|.
pub fn interaction_moment(w: &Interaction, grid: &Grid) -> Result<f64> {
    Ok(interaction_spectrum(w, grid)?.iter().map(|(p2, a)| (1.0 + p2) * a).sum())
}

/// Exponential growth summary of a positive series G(t).
#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    /// G(0)
    pub prefactor: f64,
    /// Least-squares slope of log G against t.
    pub fitted_rate: f64,
    /// Smallest rate r ≥ 0 with G(t) ≤ G(0) e^{rt} on the samples.
    pub envelope_rate: f64,
    pub finite_positive: bool,
}

pub fn fit_growth(series: &[(f64, f64)]) -> Result<GrowthFit> {
    if series.len() < 2 {
        return Err(LabError::InsufficientData {
            required: 2,
            got: series.len(),
        });
    }
    let (t0, g0) = series[0];
    if !(g0.is_finite() && g0 > 0.0) {
        return Err(LabError::ZeroData);
    }
    let logs: Vec<(f64, f64)> = series.iter().map(|(t, g)| (*t, g.ln())).collect();
    let (fitted_rate, _, _) = crate::commutators::fit::least_squares(&logs);
    let envelope_rate = series
        .iter()
        .filter(|(t, _)| *t > t0)
        .map(|(t, g)| (g / g0).ln() / (t - t0))
        .fold(0.0f64, f64::max);
    let finite = series.iter().all(|(_, g)| g.is_finite()) && fitted_rate.is_finite() && envelope_rate.is_finite();
    Ok(GrowthFit {
        prefactor: g0,
        fitted_rate,
        envelope_rate,
        finite_positive: finite && g0 > 0.0,
    })
}

/// Options for [`evolve`].
#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub t_final: f64,
    pub dt: f64,
    pub passes: usize,
    /// Checkpoint every this many steps (0 disables).
    pub checkpoint_every: usize,
    /// Exchange inequality sampled every this many steps (0 disables).
    pub exchange_every: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            dt: 0.01,
            passes: 1,
            checkpoint_every: 0,
            exchange_every: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepDiagnostics {
    pub time: f64,
    pub energy: f64,
    pub projector_defect: f64,
    pub trace_error: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<StepDiagnostics>,
    pub monitor: PropagationMonitor,
    pub exchange_checks: Vec<(f64, ExchangeBoundReport)>,
    pub checkpoints: Vec<HFState>,
    pub final_state: HFState,
    /// Set when an invariant breach stopped the run early.
    pub breach: Option<String>,
}

impl Trajectory {
    /// max_t |E(t) − E(0)|
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.steps.first().map_or(0.0, |s| s.energy);
        self.steps.iter().fold(0.0, |m, s| m.max((s.energy - e0).abs()))
    }

    pub fn max_projector_defect(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.projector_defect))
    }

    pub fn max_trace_error(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.trace_error))
    }

    pub fn growth_fit(&self) -> Result<GrowthFit> {
        let series: Vec<(f64, f64)> = self.monitor.rows.iter().map(|r| (r.time, r.gronwall)).collect();
        fit_growth(&series)
    }
}

/// Grid context enabling the monitors and the exchange-term check.
pub struct GridContext<'a> {
    pub spec: &'a MonitorSpec,
    pub model: &'a GridMeanField,
    pub fourier_l1: f64,
}

/// Propagates Φ to `t_final`. Invariants are checked at every step; a
/// breach ends the run with the last valid state and the reason recorded.
pub fn evolve(
    initial: Array2<C64>,
    model: &dyn MeanField,
    hbar: f64,
    options: &EvolveOptions,
    grid_context: Option<&GridContext<'_>>,
) -> Result<Trajectory> {
    if !(options.t_final.is_finite() && options.t_final >= 0.0) {
        return Err(LabError::InvalidParameter {
            name: "t_final",
            reason: format!("must be finite and non-negative, got {}", options.t_final),
        });
    }
    if !(options.dt.is_finite() && options.dt > 0.0) {
        return Err(LabError::InvalidParameter {
            name: "dt",
            reason: format!("must be finite and positive, got {}", options.dt),
        });
    }
    if initial.nrows() != model.size() {
        return Err(LabError::SizeMismatch {
            left: initial.dim(),
            right: (model.size(), initial.ncols()),
        });
    }
    let n = initial.ncols();
    let steps_total = (options.t_final / options.dt).round() as usize;
    let mut state = HFState::new(initial);
    let scale = hbar * n as f64;
    let mut monitor = PropagationMonitor {
        scale,
        rows: Vec::new(),
    };
    let mut diagnostics = Vec::with_capacity(steps_total + 1);
    let mut exchange_checks = Vec::new();
    let mut checkpoints = Vec::new();
    let mut breach = None;

    let mut record = |state: &HFState, step: usize| -> Result<Option<String>> {
        let defect = state.projector_defect()?;
        let trace_error = (state.trace() - n as f64).abs();
        diagnostics.push(StepDiagnostics {
            time: state.time,
            energy: model.energy(state.omega()),
            projector_defect: defect,
            trace_error,
        });
        if let Some(ctx) = grid_context {
            let omega = state.density_matrix();
            let sample = monitor_sample(&omega, ctx.spec)?;
            let row = monitor_row(state.time, &sample, scale);
            if !row.gronwall.is_finite() {
                return Ok(Some(format!("non-finite monitor at t = {}", state.time)));
            }
            monitor.rows.push(row);
            if options.exchange_every > 0 && step.is_multiple_of(options.exchange_every) {
                let x = ctx.model.exchange(state.omega());
                for obs in ctx.spec.exchange_observables() {
                    let r = obs.matrix(&ctx.spec.grid, &ctx.spec.fields, ctx.spec.hbar, ctx.spec.b)?;
                    let (lhs, rhs) = exchange_bound_check(&omega, &x, &r, ctx.fourier_l1, n)?;
                    exchange_checks.push((
                        state.time,
                        ExchangeBoundReport {
                            observable: obs.tag(),
                            lhs,
                            rhs,
                            holds: lhs <= rhs * (1.0 + 1e-9) + 1e-12,
                        },
                    ));
                }
            }
        }
        if options.checkpoint_every > 0 && step.is_multiple_of(options.checkpoint_every) {
            checkpoints.push(state.clone());
        }
        if defect > INVARIANT_TOLERANCE || trace_error > INVARIANT_TOLERANCE {
            return Ok(Some(format!(
                "invariant breach at t = {}: projector defect {defect:.3e}, trace error {trace_error:.3e}",
                state.time
            )));
        }
        Ok(None)
    };

    if let Some(reason) = record(&state, 0)? {
        return Err(LabError::InvariantBreach {
            time: 0.0,
            detail: reason,
        });
    }
    for step in 1..=steps_total {
        let next = hf_step(&state, options.dt, model, hbar, options.passes)?;
        if let Some(reason) = record(&next, step)? {
            breach = Some(reason);
            break;
        }
        state = next;
    }
    Ok(Trajectory {
        steps: diagnostics,
        monitor,
        exchange_checks,
        checkpoints,
        final_state: state,
        breach,
    })
}
