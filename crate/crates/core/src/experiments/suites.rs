//! One function per suite: run the module operations over the configured
//! parameter points and turn every measured quantity into records.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::commutators::fit::least_squares;
use crate::commutators::wigner::{gradient_refinement, wigner_transform};
use crate::commutators::{
    b_dependence_sweep, initial_data_report_with, lipschitz_transfer_check, momentum_commutator_identity_check, plane_wave_uniformity, scaling_sweep,
    NormRoute, Observable, PiecewiseLinear, B_RATIO_CAP,
};
use crate::error::{LabError, Result};
use crate::hartree_fock::{evolve, interaction_fourier_l1, interaction_moment, EvolveOptions, GridContext, GridMeanField, MonitorSpec};
use crate::lattice::{assemble_hamiltonian, potential_samples, HermitianOperator};
use crate::linalg::{self, dagger, C64};
use crate::many_body::{compare_hf_vs_exact, ComparisonSetup};
use crate::spectra::{
    agmon_decay_check, chemical_potential_for_rank, clr_from_eigenvalues, diamagnetic_check, schatten_norms, spectral_projector, weyl_law_compare_with,
    DecompositionSource, Region, SchattenNorms,
};

use super::config::ExperimentConfig;
use super::plot::Plot;
use super::record::{ResultRecord, SuiteOutput, Verdict};

pub const WEYL_SLOPE_MIN: f64 = 0.7;
pub const AGMON_SPREAD_MAX: f64 = 2.0;
pub const WIGNER_RATIO_MIN: f64 = 1.8;
pub const IDENTITY_RATIO_MIN: f64 = 1.8;
pub const INVARIANT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_ENERGY_TOLERANCE: f64 = 1e-6;
pub const MONITOR_MATCH_TOLERANCE: f64 = 1e-10;
pub const FREE_EVOLUTION_TOLERANCE: f64 = 1e-8;
pub const HS_FRACTION: f64 = 0.2;

/// Builds records for one suite with shared base parameters.
pub(crate) struct Recorder {
    suite: &'static str,
    base: Map<String, Value>,
    pub output: SuiteOutput,
}

pub(crate) fn params(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

impl Recorder {
    pub fn new(config: &ExperimentConfig) -> Self {
        let mut base = params(&[
            ("dim", Value::from(config.dim)),
            ("M", Value::from(config.points())),
            ("L", Value::from(config.length())),
        ]);
        if let Ok(f) = config.fields() {
            base.insert("fields".into(), Value::from(f.label()));
        }
        Self {
            suite: config.suite.name(),
            base,
            output: SuiteOutput::default(),
        }
    }

    pub fn push(&mut self, extra: &Map<String, Value>, metric: &str, value: f64, verdict: Verdict, wall_ms: u128) {
        let mut p = self.base.clone();
        p.extend(extra.iter().map(|(k, v)| (k.clone(), v.clone())));
        self.output.records.push(ResultRecord {
            suite: self.suite.to_string(),
            params: p,
            metric: metric.to_string(),
            value,
            verdict,
            wall_ms,
        });
    }

    pub fn info(&mut self, extra: &Map<String, Value>, metric: &str, value: f64) {
        self.push(extra, metric, value, Verdict::Info, 0);
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, u128) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_millis())
}

fn mu_of(config: &ExperimentConfig) -> Result<f64> {
    config.mu.ok_or_else(|| LabError::Config("`mu` is required".into()))
}

fn first_hbar(config: &ExperimentConfig) -> Result<f64> {
    config
        .hbar_ladder
        .first()
        .copied()
        .ok_or_else(|| LabError::Config("`hbar_ladder` is required".into()))
}

fn fields_of(config: &ExperimentConfig) -> Result<crate::lattice::FieldSpec> {
    config.fields().map_err(LabError::Config)
}

pub fn commutator_sweep(config: &ExperimentConfig, source: &dyn DecompositionSource) -> Result<SuiteOutput> {
    let grid = config.grid()?;
    let fields = fields_of(config)?;
    let observable = config.observable_or_default();
    let mu = mu_of(config)?;
    let b = config.b_values()[0];
    let mut rec = Recorder::new(config);
    let (sweep, wall) = timed(|| scaling_sweep(source, &grid, &fields, b, mu, &observable, &config.hbar_ladder, NormRoute::LowRank));
    let sweep = sweep?;
    let per_point = wall / config.hbar_ladder.len().max(1) as u128;
    let obs_tag = observable.tag();
    for r in &sweep.reports {
        let p = params(&[
            ("observable", Value::from(obs_tag.clone())),
            ("hbar", Value::from(r.hbar)),
            ("b", Value::from(b)),
            ("mu", Value::from(mu)),
        ]);
        rec.push(&p, "trace_norm", r.trace_norm, Verdict::Info, per_point);
        rec.info(&p, "hs_norm", r.hs_norm);
        rec.info(&p, "op_norm", r.op_norm);
        rec.info(&p, "rank", r.rank as f64);
        rec.info(&p, "normalized_trace_norm", r.normalized_value);
        rec.push(&p, "norm_ordering", f64::from(u8::from(r.norms().ordered(1e-10))), Verdict::check(r.norms().ordered(1e-10)), 0);
    }
    for s in &sweep.skipped {
        let p = params(&[("observable", Value::from(obs_tag.clone())), ("hbar", Value::from(s.parameter))]);
        rec.info(&p, "skipped_degenerate_threshold", s.parameter);
        rec.output.notes.push(format!("hbar = {} skipped: {}", s.parameter, s.reason));
    }
    let expected = 1.0 - config.dim as f64;
    let tol = config.exponent_tolerance_or_default();
    let p = params(&[
        ("observable", Value::from(obs_tag.clone())),
        ("b", Value::from(b)),
        ("mu", Value::from(mu)),
        ("expected_exponent", Value::from(expected)),
        ("tolerance", Value::from(tol)),
    ]);
    let fit = &sweep.fit;
    rec.push(&p, "fitted_exponent", fit.exponent, Verdict::check((fit.exponent - expected).abs() <= tol), wall);
    rec.info(&p, "fit_residual", fit.residual);
    rec.info(&p, "fit_intercept", fit.intercept);

    // plane-wave domination at each point, on the same cached decompositions
    let uniform: Vec<(f64, crate::commutators::PlaneWaveReport)> = sweep
        .reports
        .par_iter()
        .map(|r| {
            let d = source.decomposition(&grid, &fields, r.hbar, b)?;
            let omega = spectral_projector(&d, mu)?;
            let alphas = crate::commutators::alpha_lattice(grid.dim(), 4.0, 9);
            Ok((r.hbar, plane_wave_uniformity(&omega, &grid, &alphas)?))
        })
        .collect::<Result<_>>()?;
    for (hbar, u) in &uniform {
        let p = params(&[("hbar", Value::from(*hbar)), ("b", Value::from(b)), ("mu", Value::from(mu))]);
        rec.push(&p, "plane_wave_sup", u.sup, Verdict::check(u.holds), 0);
        rec.info(&p, "position_trace_norm", u.position_trace_norm);
    }
    if b > 0.0 {
        rec.output
            .notes
            .push("b > 0: the resolvent-set condition on mu is not enforced on the lattice".into());
    }
    let points: Vec<(f64, f64)> = sweep.reports.iter().map(|r| (r.hbar, r.trace_norm)).collect();
    rec.output.plots.push((
        "scaling.svg".into(),
        Plot::new(format!("trace norm of [Pi, {obs_tag}]"), "hbar", "trace norm")
            .log_log()
            .with_series(obs_tag, points),
    ));
    Ok(rec.output)
}

pub fn b_sweep(config: &ExperimentConfig, source: &dyn DecompositionSource) -> Result<SuiteOutput> {
    let grid = config.grid()?;
    let fields = fields_of(config)?;
    let observable = config.observable_or_default();
    let mu = mu_of(config)?;
    let hbar = first_hbar(config)?;
    let power = if matches!(observable, Observable::Momentum(_)) { 2 } else { 1 };
    let mut rec = Recorder::new(config);
    let (sweep, wall) = timed(|| b_dependence_sweep(source, &grid, &fields, hbar, mu, &observable, &config.b_ladder, power, NormRoute::LowRank));
    let sweep = sweep?;
    for row in &sweep.rows {
        let p = params(&[
            ("observable", Value::from(sweep.observable.clone())),
            ("hbar", Value::from(hbar)),
            ("b", Value::from(row.b)),
            ("bracket_power", Value::from(power)),
        ]);
        rec.info(&p, "trace_norm", row.trace_norm);
        rec.info(&p, "normalized", row.normalized);
        rec.push(&p, "ratio_to_baseline", row.ratio, Verdict::check(row.ratio <= B_RATIO_CAP), 0);
    }
    let p = params(&[
        ("observable", Value::from(sweep.observable.clone())),
        ("hbar", Value::from(hbar)),
        ("bracket_power", Value::from(power)),
        ("cap", Value::from(B_RATIO_CAP)),
    ]);
    rec.push(&p, "max_ratio", sweep.max_ratio, Verdict::check(sweep.holds), wall);
    if let Some(fit) = &sweep.fit {
        rec.info(&p, "bracket_exponent", fit.exponent);
    }
    let points: Vec<(f64, f64)> = sweep.rows.iter().map(|r| (crate::commutators::japanese_bracket(r.b), r.normalized)).collect();
    rec.output.plots.push((
        "b_dependence.svg".into(),
        Plot::new("normalized trace norm vs <b>", "<b>", "normalized trace norm")
            .log_log()
            .with_series(sweep.observable.clone(), points),
    ));
    Ok(rec.output)
}

pub fn weyl(config: &ExperimentConfig, source: &dyn DecompositionSource) -> Result<SuiteOutput> {
    let grid = config.grid()?;
    let fields = fields_of(config)?;
    let mu = mu_of(config)?;
    let b = config.b_values()[0];
    let phi = vec![1.0; grid.len()];
    let mut rec = Recorder::new(config);
    let reports: Vec<_> = config
        .hbar_ladder
        .par_iter()
        .map(|&hbar| {
            let (r, wall) = timed(|| -> Result<_> {
                let d = source.decomposition(&grid, &fields, hbar, b)?;
                weyl_law_compare_with(&d, &grid, &fields, hbar, b, mu, &phi)
            });
            r.map(|r| (r, wall))
        })
        .collect::<Result<_>>()?;
    for (r, wall) in &reports {
        let p = params(&[("hbar", Value::from(r.hbar)), ("b", Value::from(b)), ("mu", Value::from(mu))]);
        rec.push(&p, "relative_error", r.relative_error, Verdict::check(r.relative_error <= 2.0 * r.hbar), *wall);
        rec.info(&p, "quantum_count", r.quantum_count);
        rec.info(&p, "classical_count", r.classical_count);
        rec.push(&p, "classical_region_inside_box", f64::from(u8::from(!r.touches_boundary)), Verdict::check(!r.touches_boundary), 0);
    }
    let logs: Vec<(f64, f64)> = reports
        .iter()
        .filter(|(r, _)| r.relative_error > 0.0)
        .map(|(r, _)| (r.hbar.ln(), r.relative_error.ln()))
        .collect();
    let p = params(&[("b", Value::from(b)), ("mu", Value::from(mu)), ("min_slope", Value::from(WEYL_SLOPE_MIN))]);
    if logs.len() >= 2 && logs.len() == reports.len() {
        let (slope, _, residual) = least_squares(&logs);
        rec.push(&p, "error_slope", slope, Verdict::check(slope >= WEYL_SLOPE_MIN), 0);
        rec.info(&p, "error_slope_residual", residual);
    } else {
        rec.push(&p, "error_slope", f64::NAN, Verdict::Fail, 0);
        rec.output
            .notes
            .push("a relative error vanished; the log-log slope is undefined (move mu off the level structure)".into());
    }
    let points: Vec<(f64, f64)> = reports.iter().map(|(r, _)| (r.hbar, r.relative_error)).collect();
    rec.output.plots.push((
        "weyl.svg".into(),
        Plot::new("Weyl law relative error", "hbar", "relative error")
            .log_log()
            .with_series("relative error", points),
    ));
    Ok(rec.output)
}

pub fn clr(config: &ExperimentConfig, source: &dyn DecompositionSource) -> Result<SuiteOutput> {
    let grid = config.grid()?;
    let fields = fields_of(config)?;
    let mu = mu_of(config)?;
    let eps = config.epsilon_or_default();
    let points: Vec<(f64, f64)> = config
        .hbar_ladder
        .iter()
        .flat_map(|&h| config.b_values().into_iter().map(move |b| (h, b)))
        .collect();
    let mut rec = Recorder::new(config);
    let reports: Vec<_> = points
        .par_iter()
        .map(|&(hbar, b)| {
            let (r, wall) = timed(|| -> Result<_> {
                let d = source.decomposition(&grid, &fields, hbar, b)?;
                clr_from_eigenvalues(d.eigenvalues(), &grid, &fields, hbar, b, mu, eps)
            });
            r.map(|r| (r, wall))
        })
        .collect::<Result<_>>()?;
    for (r, wall) in reports {
        let p = params(&[
            ("hbar", Value::from(r.hbar)),
            ("b", Value::from(r.b)),
            ("mu", Value::from(mu)),
            ("epsilon", Value::from(eps)),
        ]);
        rec.push(&p, "count_below", r.lhs as f64, Verdict::check(r.holds), wall);
        rec.info(&p, "clr_bound", r.rhs);
    }
    Ok(rec.output)
}

/// Smallest origin-centred ball containing every site with V − μ < ε.
fn agmon_region(grid: &crate::lattice::Grid, potential: &[f64], mu: f64, eps: f64) -> Region {
    let radius = grid
        .sites()
        .zip(potential)
        .filter(|(_, v)| **v - mu < eps)
        .map(|(x, _)| (x[0] * x[0] + x[1] * x[1]).sqrt())
        .fold(0.0, f64::max);
    Region::ball(radius)
}

pub fn agmon(config: &ExperimentConfig, source: &dyn DecompositionSource) -> Result<SuiteOutput> {
    let grid = config.grid()?;
    let fields = fields_of(config)?;
    let mu = mu_of(config)?;
    let eps = config.epsilon_or_default();
    let b = config.b_values()[0];
    let region = agmon_region(&grid, &potential_samples(&grid, &fields)?, mu, eps);
    let mut rec = Recorder::new(config);
    let reports: Vec<_> = config
        .hbar_ladder
        .par_iter()
        .map(|&hbar| {
            let (r, wall) = timed(|| -> Result<_> {
                let d = source.decomposition(&grid, &fields, hbar, b)?;
                agmon_decay_check(&d, &grid, &fields, hbar, mu, eps, &region)
            });
            r.map(|r| (r, wall))
        })
        .collect::<Result<_>>()?;
    for (r, wall) in &reports {
        let p = params(&[
            ("hbar", Value::from(r.hbar)),
            ("b", Value::from(b)),
            ("mu", Value::from(mu)),
            ("epsilon", Value::from(eps)),
        ]);
        rec.push(&p, "max_weighted_norm", r.max_weighted_norm, Verdict::Info, *wall);
        rec.info(&p, "eigenfunctions", r.weighted_norms.len() as f64);
    }
    let values: Vec<f64> = reports.iter().map(|(r, _)| r.max_weighted_norm).collect();
    let spread = values.iter().cloned().fold(f64::MIN, f64::max) / values.iter().cloned().fold(f64::MAX, f64::min);
    let p = params(&[("mu", Value::from(mu)), ("epsilon", Value::from(eps)), ("max_spread", Value::from(AGMON_SPREAD_MAX))]);
    rec.push(&p, "weighted_norm_spread", spread, Verdict::check(spread <= AGMON_SPREAD_MAX), 0);
    if let Region::Ball { radius, .. } = region {
        rec.info(&p, "region_radius", radius);
    }
    Ok(rec.output)
}

pub fn diamagnetic(config: &ExperimentConfig) -> Result<SuiteOutput> {
    let grid = config.grid()?;
    let fields = fields_of(config)?;
    let c = config.grid_constant.unwrap_or(1.0);
    let points: Vec<(f64, f64)> = config
        .hbar_ladder
        .iter()
        .flat_map(|&h| config.b_values().into_iter().map(move |b| (h, b)))
        .collect();
    let mut rec = Recorder::new(config);
    let reports: Vec<_> = points
        .par_iter()
        .map(|&(hbar, b)| {
            let (r, wall) = timed(|| diamagnetic_check(&grid, &fields, hbar, b, c));
            r.map(|r| (r, wall))
        })
        .collect::<Result<_>>()?;
    for (r, wall) in reports {
        let p = params(&[("hbar", Value::from(r.hbar)), ("b", Value::from(r.b)), ("grid_constant", Value::from(c))]);
        rec.push(&p, "ground_gap", r.ground_magnetic - r.ground_free, Verdict::check(r.holds), wall);
        rec.info(&p, "ground_magnetic", r.ground_magnetic);
        rec.info(&p, "ground_free", r.ground_free);
    }
    Ok(rec.output)
}

pub fn wigner(config: &ExperimentConfig) -> Result<SuiteOutput> {
    let grid = config.grid()?;
    let fields = fields_of(config)?;
    let mu = mu_of(config)?;
    let hbar = first_hbar(config)?;
    let b = config.b_values()[0];
    let build = |g: &crate::lattice::Grid| -> Result<Array2<C64>> {
        let d = crate::spectra::eigendecompose(&assemble_hamiltonian(g, &fields, hbar, b)?)?;
        Ok(spectral_projector(&d, mu)?.entries().clone())
    };
    let mut rec = Recorder::new(config);
    let (study, wall) = timed(|| gradient_refinement(&grid, hbar, build));
    let study = study?;
    let p = params(&[("hbar", Value::from(hbar)), ("mu", Value::from(mu)), ("min_ratio", Value::from(WIGNER_RATIO_MIN))]);
    rec.push(&p, "position_ratio", study.position_ratio, Verdict::check(study.position_ratio >= WIGNER_RATIO_MIN), wall);
    rec.push(&p, "momentum_ratio", study.momentum_ratio, Verdict::check(study.momentum_ratio >= WIGNER_RATIO_MIN), 0);
    rec.info(&p, "position_residual_coarse", study.coarse.position_residual);
    rec.info(&p, "position_residual_fine", study.fine.position_residual);
    rec.info(&p, "momentum_residual_coarse", study.coarse.momentum_residual);
    rec.info(&p, "momentum_residual_fine", study.fine.momentum_residual);
    let gamma = build(&grid)?;
    let trace: f64 = gamma.diag().iter().map(|z| z.re).sum();
    let map = wigner_transform(&gamma, &grid, hbar)?;
    let mass = map.total_mass(grid.spacing(), hbar);
    let rel = (mass - trace).abs() / trace.max(1.0);
    rec.push(&p, "mass_relative_error", rel, Verdict::check(rel <= 1e-2), 0);
    Ok(rec.output)
}

pub fn hf_evolve(config: &ExperimentConfig) -> Result<SuiteOutput> {
    let grid = config.grid()?;
    let fields = fields_of(config)?;
    let hbar = first_hbar(config)?;
    let b = config.b_values()[0];
    let n = config.n_particles.ok_or_else(|| LabError::Config("`n_particles` is required".into()))?;
    let t_final = config.t_final.unwrap_or(1.0);
    let dt = config.dt.unwrap_or(0.01);
    let tolerance = config.energy_tolerance.unwrap_or(DEFAULT_ENERGY_TOLERANCE);
    let mut rec = Recorder::new(config);
    let base = params(&[
        ("hbar", Value::from(hbar)),
        ("b", Value::from(b)),
        ("N", Value::from(n)),
        ("t_final", Value::from(t_final)),
        ("dt", Value::from(dt)),
    ]);

    let h = assemble_hamiltonian(&grid, &fields, hbar, b)?;
    let decomp = crate::spectra::eigendecompose(&h)?;
    let mu = chemical_potential_for_rank(&decomp, n)?;
    let phi0 = decomp.lowest_vectors(n);
    let model = GridMeanField::new(&h, &grid, &fields.interaction, n)?;
    let spec = MonitorSpec::standard(&grid, &fields, hbar, b);
    let ctx = GridContext {
        spec: &spec,
        model: &model,
        fourier_l1: interaction_fourier_l1(&fields.interaction, &grid)?,
    };
    rec.info(&base, "interaction_fourier_l1", ctx.fourier_l1);
    rec.info(&base, "interaction_moment", interaction_moment(&fields.interaction, &grid)?);
    let options = EvolveOptions {
        t_final,
        dt,
        passes: config.passes.unwrap_or(1),
        checkpoint_every: 0,
        exchange_every: 10,
    };
    let (traj, wall) = timed(|| evolve(phi0.clone(), &model, hbar, &options, Some(&ctx)));
    let traj = traj?;

    rec.push(&base, "steps", (traj.steps.len() - 1) as f64, Verdict::Info, wall);
    rec.push(&base, "completed", f64::from(u8::from(traj.breach.is_none())), Verdict::check(traj.breach.is_none()), 0);
    if let Some(reason) = &traj.breach {
        rec.output.notes.push(reason.clone());
    }
    let defect = traj.max_projector_defect();
    rec.push(&base, "max_projector_defect", defect, Verdict::check(defect <= INVARIANT_TOLERANCE), 0);
    let trace_err = traj.max_trace_error();
    rec.push(&base, "max_trace_error", trace_err, Verdict::check(trace_err <= INVARIANT_TOLERANCE), 0);
    let drift = traj.energy_drift();
    let mut drift_params = base.clone();
    drift_params.insert("tolerance".into(), Value::from(tolerance));
    rec.push(&drift_params, "energy_drift", drift, Verdict::check(drift <= tolerance), 0);

    let finite = traj
        .monitor
        .rows
        .iter()
        .all(|r| r.entries().iter().all(|(_, v)| v.is_finite() && *v >= 0.0));
    rec.push(&base, "monitor_finite", f64::from(u8::from(finite)), Verdict::check(finite), 0);
    match traj.growth_fit() {
        Ok(fit) => {
            let ok = fit.finite_positive && fit.envelope_rate.is_finite();
            rec.push(&base, "growth_prefactor", fit.prefactor, Verdict::check(ok), 0);
            rec.info(&base, "growth_fitted_rate", fit.fitted_rate);
            rec.push(&base, "growth_envelope_rate", fit.envelope_rate, Verdict::check(ok), 0);
        }
        Err(e) => {
            rec.push(&base, "growth_prefactor", f64::NAN, Verdict::Fail, 0);
            rec.output.notes.push(format!("growth fit failed: {e}"));
        }
    }

    // t = 0 monitor against the dense commutator reports
    let first = &traj.monitor.rows[0];
    let scale = traj.monitor.scale;
    let cached = FixedSource(std::sync::Arc::new(decomp.clone()));
    let momenta: Vec<SchattenNorms> = (0..grid.dim())
        .map(|j| initial_data_report_with(&cached, &grid, &fields, hbar, b, mu, &Observable::Momentum(j), NormRoute::Dense).map(|r| r.norms()))
        .collect::<Result<_>>()?;
    let mut worst = (SchattenNorms::combine_l2(&momenta).trace - first.momentum * scale).abs();
    for (tag, value) in &first.monomials {
        let beta = spec.betas.iter().find(|b| Observable::Monomial(**b).tag() == *tag).copied();
        if let Some(beta) = beta {
            let r = initial_data_report_with(&cached, &grid, &fields, hbar, b, mu, &Observable::Monomial(beta), NormRoute::Dense)?;
            worst = worst.max((r.trace_norm - value * scale).abs());
        }
    }
    rec.push(&base, "initial_monitor_mismatch", worst, Verdict::check(worst <= MONITOR_MATCH_TOLERANCE), 0);

    let holds = traj.exchange_checks.iter().all(|(_, r)| r.holds);
    let worst_ratio = traj
        .exchange_checks
        .iter()
        .filter(|(_, r)| r.rhs > 0.0)
        .map(|(_, r)| r.lhs / r.rhs)
        .fold(0.0, f64::max);
    rec.push(&base, "exchange_checks", traj.exchange_checks.len() as f64, Verdict::check(holds), 0);
    rec.info(&base, "exchange_max_lhs_over_rhs", worst_ratio);

    if fields.interaction.is_zero() && traj.breach.is_none() {
        let t = traj.final_state.time;
        let exact = linalg::unitary_apply(h.matrix(), t / hbar, &phi0)?;
        let err = linalg::max_abs(&(traj.final_state.omega() - exact.dot(&dagger(&exact))));
        rec.push(&base, "free_evolution_error", err, Verdict::check(err <= FREE_EVOLUTION_TOLERANCE), 0);
    }

    let mut table = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| LabError::Config(e.to_string());
    table.write_record(["t", "observable", "value"]).map_err(io)?;
    for (row, step) in traj.monitor.rows.iter().zip(&traj.steps) {
        let t = row.time.to_string();
        for (tag, v) in row.entries() {
            table.write_record([t.as_str(), tag.as_str(), &v.to_string()]).map_err(io)?;
        }
        table.write_record([t.as_str(), "energy", &step.energy.to_string()]).map_err(io)?;
    }
    let bytes = table.into_inner().map_err(|e| LabError::Config(e.to_string()))?;
    rec.output
        .tables
        .push(("monitor.csv".into(), String::from_utf8(bytes).map_err(|e| LabError::Config(e.to_string()))?));
    let series = |f: &dyn Fn(&crate::hartree_fock::MonitorRow) -> f64| traj.monitor.rows.iter().map(|r| (r.time, f(r))).collect::<Vec<_>>();
    rec.output.plots.push((
        "monitor.svg".into(),
        Plot::new("propagated semiclassical structure / (hbar N)", "t", "value")
            .with_series("gronwall", series(&|r| r.gronwall))
            .with_series("momentum", series(&|r| r.momentum))
            .with_series("plane wave sup", series(&|r| r.plane_wave_sup)),
    ));
    Ok(rec.output)
}

/// A single precomputed decomposition.
struct FixedSource(std::sync::Arc<crate::spectra::SpectralDecomposition>);

impl DecompositionSource for FixedSource {
    fn decomposition(
        &self,
        _: &crate::lattice::Grid,
        _: &crate::lattice::FieldSpec,
        _: f64,
        _: f64,
    ) -> Result<std::sync::Arc<crate::spectra::SpectralDecomposition>> {
        Ok(self.0.clone())
    }
}

pub fn comparison_setup(config: &ExperimentConfig) -> Result<ComparisonSetup> {
    let t_final = config.t_final.unwrap_or(1.0);
    let dt = config.dt.unwrap_or(0.01);
    let checkpoints = if config.checkpoints.is_empty() {
        let half = (t_final / (2.0 * dt)).round() * dt;
        let mut c = vec![0.0, half, t_final];
        c.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        c
    } else {
        config.checkpoints.clone()
    };
    Ok(ComparisonSetup {
        grid: config.grid()?,
        fields: fields_of(config)?,
        b: config.b_values()[0],
        n_list: config.n_list.clone(),
        modes: config.modes.unwrap_or(10),
        dt,
        checkpoints,
        hbar_override: config.hbar_override,
        coupling_override: config.coupling_override,
        passes: config.passes.unwrap_or(1),
    })
}

pub fn mb_compare(config: &ExperimentConfig) -> Result<SuiteOutput> {
    let setup = comparison_setup(config)?;
    let free = setup.fields.interaction.is_zero();
    let mut rec = Recorder::new(config);
    let (table, wall) = timed(|| compare_hf_vs_exact(&setup));
    let table = table?;
    let flag = Value::from(table.nonstandard_scaling);
    if table.nonstandard_scaling {
        rec.output
            .notes
            .push("NONSTANDARD SCALING: hbar or lambda overridden; the comparison does not follow hbar = N^(-1/d), lambda = 1/N".into());
    }
    for r in &table.rows {
        let p = params(&[
            ("N", Value::from(r.n)),
            ("t", Value::from(r.t)),
            ("K", Value::from(setup.modes)),
            ("hbar", Value::from(setup.hbar_for(r.n))),
            ("lambda", Value::from(setup.coupling_for(r.n))),
            ("nonstandard_scaling", flag.clone()),
        ]);
        let bound = if free { FREE_EVOLUTION_TOLERANCE } else { HS_FRACTION * r.sqrt_n_ref };
        rec.push(&p, "hs_err", r.hs_err, Verdict::check(r.hs_err <= bound), wall / table.rows.len().max(1) as u128);
        if free {
            rec.push(&p, "trace_err", r.trace_err, Verdict::check(r.trace_err <= FREE_EVOLUTION_TOLERANCE), 0);
        } else {
            rec.info(&p, "trace_err", r.trace_err);
        }
        rec.push(&p, "norm_hierarchy", f64::from(u8::from(r.hs_err <= r.trace_err + 1e-14)), Verdict::check(r.hs_err <= r.trace_err + 1e-14), 0);
    }
    let t_last = setup.checkpoints.last().copied().unwrap_or(0.0);
    if !free && setup.n_list.len() >= 2 {
        let ok = table.decreasing_in_n(t_last);
        let p = params(&[("t", Value::from(t_last)), ("K", Value::from(setup.modes)), ("nonstandard_scaling", flag.clone())]);
        rec.push(&p, "hs_err_decreasing_in_N", f64::from(u8::from(ok)), Verdict::check(ok), 0);
        rec.info(&p, "max_hs_err_over_sqrtN", table.max_relative_hs());
    }
    rec.output.tables.push(("comparison.csv".into(), table.to_csv()?));
    let points: Vec<(f64, f64)> = table.rows_at(t_last).iter().map(|r| (r.n as f64, r.hs_err)).collect();
    let rel: Vec<(f64, f64)> = table.rows_at(t_last).iter().map(|r| (r.n as f64, r.hs_err / r.sqrt_n_ref)).collect();
    rec.output.plots.push((
        "comparison.svg".into(),
        Plot::new(format!("HF vs exact at t = {t_last}"), "N", "error")
            .with_series("HS error", points)
            .with_series("HS error / sqrt(N)", rel),
    ));
    Ok(rec.output)
}

/// Random Hermitian n×n matrix with entries of unit scale.
pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> HermitianOperator {
    let a = random_matrix(rng, n);
    HermitianOperator::from_symmetrized(&a + &dagger(&a))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Array2<C64> {
    Array2::from_shape_fn((n, n), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// Piecewise-linear function with 2–5 random knots on [−4, 4].
pub fn random_piecewise(rng: &mut ChaCha8Rng) -> PiecewiseLinear {
    let count = rng.random_range(2..=5);
    let knots: Vec<(f64, f64)> = (0..count).map(|_| (rng.random_range(-4.0..4.0), rng.random_range(-2.0..2.0))).collect();
    PiecewiseLinear::new(knots).unwrap_or_else(|_| PiecewiseLinear::constant(0.0))
}

#[derive(Debug, Clone, Default)]
pub struct CorpusSummary {
    pub cases: usize,
    pub lipschitz_failures: usize,
    pub holder_failures: usize,
    pub ordering_failures: usize,
    pub worst_lipschitz_ratio: f64,
    pub worst_holder_ratio: f64,
}

/// Lipschitz transfer, Hölder and norm ordering over a seeded corpus of
/// 8×8 matrices.
pub fn random_corpus(seed: u64, cases: usize) -> Result<CorpusSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = CorpusSummary {
        cases,
        ..Default::default()
    };
    for case in 0..cases {
        let a = random_hermitian(&mut rng, 8);
        let b = random_hermitian(&mut rng, 8);
        let f = if case % 4 == 0 {
            PiecewiseLinear::clamp(0.0, 1.0)?
        } else {
            random_piecewise(&mut rng)
        };
        let l = f.lipschitz_constant();
        let r = lipschitz_transfer_check(|x| f.eval(x), l, &a, &b)?;
        if !r.holds {
            s.lipschitz_failures += 1;
        }
        if r.rhs > 0.0 {
            s.worst_lipschitz_ratio = s.worst_lipschitz_ratio.max(r.lhs / r.rhs);
        }
        let x = random_matrix(&mut rng, 8);
        let y = random_matrix(&mut rng, 8);
        let nx = schatten_norms(&x)?;
        let ny = schatten_norms(&y)?;
        let nxy = schatten_norms(&x.dot(&y))?;
        let bound = nx.hs * ny.hs;
        if nxy.trace > bound * (1.0 + 1e-12) {
            s.holder_failures += 1;
        }
        s.worst_holder_ratio = s.worst_holder_ratio.max(nxy.trace / bound);
        if ![nx, ny, nxy].iter().all(|n| n.ordered(1e-12)) {
            s.ordering_failures += 1;
        }
    }
    Ok(s)
}

pub fn identities(config: &ExperimentConfig) -> Result<SuiteOutput> {
    let grid = config.grid()?;
    let fine = grid.refined();
    let fields = fields_of(config)?;
    let points: Vec<(f64, f64)> = config
        .hbar_ladder
        .iter()
        .flat_map(|&h| config.b_values().into_iter().map(move |b| (h, b)))
        .collect();
    let mut rec = Recorder::new(config);
    let reports: Vec<_> = points
        .par_iter()
        .map(|&(hbar, b)| {
            let (r, wall) = timed(|| -> Result<_> {
                Ok((
                    momentum_commutator_identity_check(&grid, &fields, hbar, b)?,
                    momentum_commutator_identity_check(&fine, &fields, hbar, b)?,
                ))
            });
            r.map(|r| (r, wall))
        })
        .collect::<Result<_>>()?;
    for ((coarse, finer), wall) in reports {
        let p = params(&[("hbar", Value::from(coarse.hbar)), ("b", Value::from(coarse.b))]);
        rec.info(&p, "field_strength", coarse.field);
        rec.info(&p, "commutator_residual_coarse", coarse.commutator_residual);
        rec.info(&p, "square_residual_coarse", coarse.square_residual);
        if coarse.b == 0.0 {
            let worst = coarse.commutator_residual.max(finer.commutator_residual);
            rec.push(&p, "commutator_residual_free", worst, Verdict::check(worst <= 1e-10), wall);
        } else {
            let r1 = coarse.commutator_residual / finer.commutator_residual;
            let r2 = coarse.square_residual / finer.square_residual;
            rec.push(&p, "commutator_refinement_ratio", r1, Verdict::check(r1 >= IDENTITY_RATIO_MIN), wall);
            rec.push(&p, "square_refinement_ratio", r2, Verdict::check(r2 >= IDENTITY_RATIO_MIN), 0);
        }
    }
    let cases = config.corpus_size.unwrap_or(100);
    let (summary, wall) = timed(|| random_corpus(config.seed, cases));
    let summary = summary?;
    let p = params(&[("seed", Value::from(config.seed)), ("cases", Value::from(cases))]);
    rec.push(&p, "lipschitz_failures", summary.lipschitz_failures as f64, Verdict::check(summary.lipschitz_failures == 0), wall);
    rec.info(&p, "lipschitz_worst_ratio", summary.worst_lipschitz_ratio);
    rec.push(&p, "holder_failures", summary.holder_failures as f64, Verdict::check(summary.holder_failures == 0), 0);
    rec.info(&p, "holder_worst_ratio", summary.worst_holder_ratio);
    rec.push(&p, "ordering_failures", summary.ordering_failures as f64, Verdict::check(summary.ordering_failures == 0), 0);
    Ok(rec.output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::parse_config;

    #[test]
    fn default_checkpoints_snap_to_the_step() {
        let config = parse_config(r#"{"suite": "mb-compare", "n_list": [2], "modes": 4, "t_final": 0.25, "dt": 0.02}"#).unwrap();
        let setup = comparison_setup(&config).unwrap();
        assert_eq!(setup.checkpoints.len(), 3);
        let mid = setup.checkpoints[1] / 0.02;
        assert!((mid - mid.round()).abs() < 1e-9);
        assert_eq!(setup.checkpoints[2], 0.25);
    }

    #[test]
    fn corpus_is_seeded() {
        let a = random_corpus(5, 12).unwrap();
        let b = random_corpus(5, 12).unwrap();
        assert_eq!(a.worst_lipschitz_ratio.to_bits(), b.worst_lipschitz_ratio.to_bits());
        assert_eq!(a.worst_holder_ratio.to_bits(), b.worst_holder_ratio.to_bits());
        assert_eq!(a.lipschitz_failures + a.holder_failures + a.ordering_failures, 0);
    }

    #[test]
    fn agmon_region_covers_the_allowed_set() {
        let grid = crate::lattice::build_grid(1, 101, 4.0).unwrap();
        let potential: Vec<f64> = grid.sites().map(|x| x[0] * x[0]).collect();
        match agmon_region(&grid, &potential, 1.0, 0.5) {
            Region::Ball { radius, .. } => {
                // largest site with x² < 1.5
                assert!(radius * radius < 1.5 && (radius + grid.spacing()).powi(2) >= 1.5);
            }
            other => panic!("unexpected region {other:?}"),
        }
    }

    #[test]
    fn free_hf_run_passes_every_verdict() {
        let config = parse_config(
            r#"{"suite": "hf-evolve", "points_per_axis": 81, "half_length": 5.0, "hbar_ladder": [0.3],
                "n_particles": 3, "t_final": 0.2, "dt": 0.02}"#,
        )
        .unwrap();
        let out = hf_evolve(&config).unwrap();
        assert_eq!(out.failures(), 0, "{:?}", out.records);
        assert!(out.records.iter().any(|r| r.metric == "free_evolution_error"));
        assert_eq!(out.tables[0].0, "monitor.csv");
    }
}
