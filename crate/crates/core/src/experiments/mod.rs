//! Config-driven experiment suites with CSV, report, plot and manifest
//! outputs.

pub mod config;
pub mod plot;
pub mod record;
pub mod suites;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::error::{LabError, Result};
use crate::lattice::{assemble_hamiltonian, FieldSpec, Grid};
use crate::spectra::{eigendecompose, DecompositionSource, SpectralDecomposition};

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig, Suite};
pub use record::{emit_report, records_csv, write_outputs, ResultRecord, SuiteOutput, Verdict, CSV_HEADER};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Memoizes decompositions by grid, fields, ħ and b so a sweep that revisits
/// a Hamiltonian diagonalizes it once.
type CacheKey = (String, String, u64, u64);

#[derive(Default)]
pub struct CachedSource {
    cache: Mutex<HashMap<CacheKey, Arc<SpectralDecomposition>>>,
}

impl DecompositionSource for CachedSource {
    fn decomposition(&self, grid: &Grid, fields: &FieldSpec, hbar: f64, b: f64) -> Result<Arc<SpectralDecomposition>> {
        let key = (grid.describe(), fields.label(), hbar.to_bits(), b.to_bits());
        if let Some(d) = self.cache.lock().map_err(|_| LabError::Config("decomposition cache poisoned".into()))?.get(&key) {
            return Ok(d.clone());
        }
        let d = Arc::new(eigendecompose(&assemble_hamiltonian(grid, fields, hbar, b)?)?);
        self.cache
            .lock()
            .map_err(|_| LabError::Config("decomposition cache poisoned".into()))?
            .insert(key, d.clone());
        Ok(d)
    }
}

/// Runs one validated configuration.
pub fn run_suite(config: &ExperimentConfig) -> Result<SuiteOutput> {
    let source = CachedSource::default();
    match config.suite {
        Suite::CommutatorSweep => suites::commutator_sweep(config, &source),
        Suite::BSweep => suites::b_sweep(config, &source),
        Suite::Weyl => suites::weyl(config, &source),
        Suite::Clr => suites::clr(config, &source),
        Suite::Agmon => suites::agmon(config, &source),
        Suite::Diamagnetic => suites::diamagnetic(config),
        Suite::Wigner => suites::wigner(config),
        Suite::HfEvolve => suites::hf_evolve(config),
        Suite::MbCompare => suites::mb_compare(config),
        Suite::Identities => suites::identities(config),
    }
}

/// Command-line request.
#[derive(Debug, Clone)]
pub struct RunRequest {
    pub suite: String,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// Outcome of a command-line run.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub out_dir: Option<PathBuf>,
    pub report: String,
    pub errors: Vec<String>,
}

fn output_dir(request: &RunRequest, config: &ExperimentConfig) -> PathBuf {
    request
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| Path::new("results").join(config.suite.name()))
}

fn error_outcome(errors: Vec<String>, out_dir: Option<PathBuf>) -> RunOutcome {
    RunOutcome {
        exit_code: EXIT_ERROR,
        out_dir,
        report: String::new(),
        errors,
    }
}

/// Loads, validates and runs a configuration, then writes every artifact.
/// Exit code 0 when all verdicts pass, 1 when any fails, 2 on error.
pub fn run(request: &RunRequest) -> RunOutcome {
    let Some(requested) = Suite::parse(&request.suite) else {
        let known: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
        return error_outcome(vec![format!("unknown suite `{}`; expected one of {}", request.suite, known.join(", "))], None);
    };
    let config = match load_config(&request.config) {
        Ok(c) => c,
        Err(e) => return error_outcome(e.messages(), None),
    };
    if config.suite != requested {
        return error_outcome(
            vec![format!(
                "suite argument `{}` does not match config suite `{}`",
                requested.name(),
                config.suite.name()
            )],
            None,
        );
    }
    if request.workers == Some(0) {
        return error_outcome(vec!["workers must be at least 1".into()], None);
    }
    let dir = output_dir(request, &config);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(request.workers.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => return error_outcome(vec![e.to_string()], None),
    };
    let result = pool.install(|| run_suite(&config));
    let (output, error) = match result {
        Ok(o) => (o, None),
        Err(e) => (SuiteOutput::default(), Some(e.to_string())),
    };
    let exit_code = match (&error, output.failures()) {
        (Some(_), _) => EXIT_ERROR,
        (None, 0) => EXIT_PASS,
        _ => EXIT_FAIL,
    };
    if let Err(e) = write_outputs(&dir, &config, &output, error.as_deref(), exit_code) {
        let mut errors: Vec<String> = error.into_iter().collect();
        errors.push(format!("writing outputs to {}: {e}", dir.display()));
        return error_outcome(errors, Some(dir));
    }
    RunOutcome {
        exit_code,
        out_dir: Some(dir),
        report: emit_report(&output.records),
        errors: error.into_iter().collect(),
    }
}
