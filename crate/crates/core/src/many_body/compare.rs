//! Exact versus Hartree–Fock one-particle density matrices in one shared
//! K-mode space, under the mean-field scaling ħ = N^{−1/d}, λ = 1/N.

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::hartree_fock::{hf_step, HFState, ModeMeanField};
use crate::lattice::{FieldSpec, Grid};
use crate::linalg::{self, C64};
use crate::spectra::schatten_norms_normal;

use super::{assemble_many_body_hamiltonian, build_mode_basis, evolve_many_body, one_particle_rdm, slater_from_modes, FockBasis, ModeIntegrals};

#[derive(Debug, Clone)]
pub struct ComparisonSetup {
    pub grid: Grid,
    pub fields: FieldSpec,
    pub b: f64,
    pub n_list: Vec<usize>,
    pub modes: usize,
    pub dt: f64,
    /// Times at which both solvers are compared; multiples of dt.
    pub checkpoints: Vec<f64>,
    pub hbar_override: Option<f64>,
    pub coupling_override: Option<f64>,
    pub passes: usize,
}

impl ComparisonSetup {
    /// True when ħ or λ departs from N^{−1/d} and 1/N.
    pub fn nonstandard_scaling(&self) -> bool {
        self.hbar_override.is_some() || self.coupling_override.is_some()
    }

    pub fn hbar_for(&self, n: usize) -> f64 {
        self.hbar_override.unwrap_or_else(|| (n as f64).powf(-1.0 / self.grid.dim() as f64))
    }

    pub fn coupling_for(&self, n: usize) -> f64 {
        self.coupling_override.unwrap_or(1.0 / n as f64)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub t: f64,
    pub trace_err: f64,
    pub hs_err: f64,
    pub n_ref: f64,
    pub sqrt_n_ref: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub nonstandard_scaling: bool,
}

impl ComparisonTable {
    pub fn rows_at(&self, t: f64) -> Vec<&ComparisonRow> {
        self.rows.iter().filter(|r| (r.t - t).abs() < 1e-12).collect()
    }

    /// max over rows of ‖γ − ω‖₂ / √N
    pub fn max_relative_hs(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.hs_err / r.sqrt_n_ref))
    }

    /// HS error strictly decreasing in N at time t.
    pub fn decreasing_in_n(&self, t: f64) -> bool {
        let mut rows = self.rows_at(t);
        rows.sort_by_key(|r| r.n);
        rows.windows(2).all(|w| w[1].hs_err < w[0].hs_err)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["N", "t", "trace_err", "hs_err", "N_ref", "sqrtN_ref"])
            .map_err(|e| LabError::Config(e.to_string()))?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.t.to_string(),
                format!("{:e}", r.trace_err),
                format!("{:e}", r.hs_err),
                r.n_ref.to_string(),
                r.sqrt_n_ref.to_string(),
            ])
            .map_err(|e| LabError::Config(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| LabError::Config(e.to_string()))
    }
}

fn step_count(t: f64, dt: f64) -> Result<usize> {
    let steps = (t / dt).round();
    if t.is_nan() || t < 0.0 || (steps * dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(LabError::Config(format!("checkpoint {t} is not a non-negative multiple of dt = {dt}")));
    }
    Ok(steps as usize)
}

fn compare_one(setup: &ComparisonSetup, n: usize) -> Result<Vec<ComparisonRow>> {
    let k = setup.modes;
    if n > k {
        return Err(LabError::Config(format!("N = {n} exceeds the {k} retained modes")));
    }
    let hbar = setup.hbar_for(n);
    let coupling = setup.coupling_for(n);
    let basis = build_mode_basis(&setup.grid, &setup.fields, hbar, setup.b, k)?;
    let integrals = ModeIntegrals::from_grid(&basis, &setup.grid, &setup.fields, hbar, setup.b)?;
    let fock = FockBasis::new(k, n)?;
    let h_many = assemble_many_body_hamiltonian(&integrals, &fock, coupling)?;
    let occupied: Vec<usize> = (0..n).collect();
    let psi = slater_from_modes(&fock, &occupied)?;
    let exact = evolve_many_body(&psi, &h_many, &setup.checkpoints, hbar)?;

    let model = ModeMeanField::new(integrals.one_body.clone(), integrals.two_body.clone(), coupling)?;
    let mut state = HFState::new(linalg::identity(k).slice(s![.., 0..n]).to_owned());
    let mut done = 0usize;
    let mut rows = Vec::with_capacity(setup.checkpoints.len());
    for (t, psi_t) in setup.checkpoints.iter().zip(&exact.states) {
        let target = step_count(*t, setup.dt)?;
        while done < target {
            state = hf_step(&state, setup.dt, &model, hbar, setup.passes)?;
            done += 1;
        }
        let gamma = one_particle_rdm(psi_t, &fock);
        let diff: Array2<C64> = gamma.entries() - state.omega();
        let norms = schatten_norms_normal(&diff, false)?;
        rows.push(ComparisonRow {
            n,
            t: *t,
            trace_err: norms.trace,
            hs_err: norms.hs,
            n_ref: n as f64,
            sqrt_n_ref: (n as f64).sqrt(),
        });
    }
    Ok(rows)
}

/// Runs every N concurrently; rows ordered by N then t.
pub fn compare_hf_vs_exact(setup: &ComparisonSetup) -> Result<ComparisonTable> {
    if !(setup.dt.is_finite() && setup.dt > 0.0) {
        return Err(LabError::InvalidParameter {
            name: "dt",
            reason: format!("must be finite and positive, got {}", setup.dt),
        });
    }
    if setup.checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::Config("checkpoints must be strictly increasing".into()));
    }
    let per_n: Vec<Vec<ComparisonRow>> = setup.n_list.par_iter().map(|&n| compare_one(setup, n)).collect::<Result<_>>()?;
    Ok(ComparisonTable {
        rows: per_n.into_iter().flatten().collect(),
        nonstandard_scaling: setup.nonstandard_scaling(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_grid, Interaction};

    fn setup(w: Interaction) -> ComparisonSetup {
        ComparisonSetup {
            grid: build_grid(1, 161, 6.0).unwrap(),
            fields: FieldSpec::harmonic().with_interaction(w),
            b: 0.0,
            n_list: vec![2, 3],
            modes: 8,
            dt: 0.01,
            checkpoints: vec![0.0, 0.25, 0.5],
            hbar_override: None,
            coupling_override: None,
            passes: 1,
        }
    }

    #[test]
    fn free_case_agrees_exactly() {
        let table = compare_hf_vs_exact(&setup(Interaction::None)).unwrap();
        assert_eq!(table.rows.len(), 6);
        assert!(table.rows.iter().all(|r| r.trace_err <= 1e-8 && r.hs_err <= 1e-8));
        assert!(!table.nonstandard_scaling);
    }

    #[test]
    fn interacting_case_starts_exact_and_stays_small() {
        let table = compare_hf_vs_exact(&setup(Interaction::gaussian(1.0, 0.5))).unwrap();
        for r in table.rows_at(0.0) {
            assert!(r.trace_err < 1e-12 && r.hs_err < 1e-12);
        }
        for r in &table.rows {
            assert!(r.hs_err <= r.trace_err + 1e-14);
        }
        assert!(table.max_relative_hs() < 0.2);
        let csv = table.to_csv().unwrap();
        assert!(csv.starts_with("N,t,trace_err,hs_err,N_ref,sqrtN_ref\n"));
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn misaligned_checkpoint_is_rejected() {
        let mut s = setup(Interaction::None);
        s.checkpoints = vec![0.0, 0.255];
        assert!(matches!(compare_hf_vs_exact(&s), Err(LabError::Config(_))));
    }
}
