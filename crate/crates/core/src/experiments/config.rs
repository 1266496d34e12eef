//! Strict JSON experiment configuration. Unknown keys, type errors and
//! every failed validation rule are reported together.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commutators::Observable;
use crate::lattice::{build_grid, FieldSpec, Grid, Interaction, Monomial, ScalarPotential, VectorPotential};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    CommutatorSweep,
    BSweep,
    Weyl,
    Clr,
    Agmon,
    Diamagnetic,
    Wigner,
    HfEvolve,
    MbCompare,
    Identities,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::CommutatorSweep,
        Suite::BSweep,
        Suite::Weyl,
        Suite::Clr,
        Suite::Agmon,
        Suite::Diamagnetic,
        Suite::Wigner,
        Suite::HfEvolve,
        Suite::MbCompare,
        Suite::Identities,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::CommutatorSweep => "commutator-sweep",
            Suite::BSweep => "b-sweep",
            Suite::Weyl => "weyl",
            Suite::Clr => "clr",
            Suite::Agmon => "agmon",
            Suite::Diamagnetic => "diamagnetic",
            Suite::Wigner => "wigner",
            Suite::HfEvolve => "hf-evolve",
            Suite::MbCompare => "mb-compare",
            Suite::Identities => "identities",
        }
    }

    pub fn parse(name: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coef: f64,
    pub powers: [u32; 2],
}

/// `harmonic` and `quartic` take an optional scale as their single
/// coefficient; `polynomial` takes 1D coefficients c_k of x^k or explicit terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub name: String,
    #[serde(default)]
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self {
            name: "harmonic".into(),
            coefficients: Vec::new(),
            terms: Vec::new(),
        }
    }
}

/// `zero`, `symmetric`, `landau`, or `linear` with a 2×2 matrix A (a = Ax).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeSpec {
    pub name: String,
    #[serde(default)]
    pub matrix: Option<[[f64; 2]; 2]>,
}

/// `none`, `constant` (amplitude), or `gaussian` (amplitude, width).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSpec {
    pub name: String,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
}

impl Default for InteractionSpec {
    fn default() -> Self {
        Self {
            name: "none".into(),
            amplitude: None,
            width: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: Suite,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub points_per_axis: Option<usize>,
    #[serde(default)]
    pub half_length: Option<f64>,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub gauge: Option<GaugeSpec>,
    #[serde(default)]
    pub hbar_ladder: Vec<f64>,
    #[serde(default)]
    pub b_ladder: Vec<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub n_particles: Option<usize>,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub interaction: InteractionSpec,
    #[serde(default)]
    pub t_final: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub modes: Option<usize>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// `x1`, `x2`, `p1`, `p2`, or `x^(a,b)`.
    #[serde(default)]
    pub observable: Option<String>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Allowed deviation of a fitted exponent; defaults 0.15 (d = 1), 0.2 (d = 2).
    #[serde(default)]
    pub exponent_tolerance: Option<f64>,
    /// Permitted HF energy drift.
    #[serde(default)]
    pub energy_tolerance: Option<f64>,
    /// Fixed-point passes of the midpoint integrator.
    #[serde(default)]
    pub passes: Option<usize>,
    /// Diamagnetic allowance constant C_grid (allowance C_grid·h).
    #[serde(default)]
    pub grid_constant: Option<f64>,
    /// Comparison times for mb-compare; defaults to {0, t_final/2, t_final}.
    #[serde(default)]
    pub checkpoints: Vec<f64>,
    /// Overrides ħ = N^{−1/d} in mb-compare (nonstandard scaling).
    #[serde(default)]
    pub hbar_override: Option<f64>,
    /// Overrides λ = 1/N in mb-compare (nonstandard scaling).
    #[serde(default)]
    pub coupling_override: Option<f64>,
    /// Number of random cases in the identities corpus.
    #[serde(default)]
    pub corpus_size: Option<usize>,
}

fn default_dim() -> usize {
    1
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

impl ConfigError {
    pub fn messages(&self) -> Vec<String> {
        match self {
            ConfigError::Io { .. } => vec![self.to_string()],
            ConfigError::Invalid(v) => v.clone(),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "suite",
    "dim",
    "points_per_axis",
    "half_length",
    "potential",
    "gauge",
    "hbar_ladder",
    "b_ladder",
    "mu",
    "n_particles",
    "n_list",
    "interaction",
    "t_final",
    "dt",
    "modes",
    "epsilon",
    "observable",
    "output_dir",
    "seed",
    "exponent_tolerance",
    "energy_tolerance",
    "passes",
    "grid_constant",
    "checkpoints",
    "hbar_override",
    "coupling_override",
    "corpus_size",
];

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Invalid(vec![format!("not valid JSON: {e}")]))?;
    let Some(object) = value.as_object() else {
        return Err(ConfigError::Invalid(vec!["top level must be a JSON object".into()]));
    };
    let mut errors: Vec<String> = object
        .keys()
        .filter(|k| !KNOWN_KEYS.contains(&k.as_str()))
        .map(|k| format!("unknown key `{k}`"))
        .collect();
    if !object.contains_key("suite") {
        errors.push("missing required field `suite`".into());
    }
    if !errors.is_empty() {
        return Err(ConfigError::Invalid(errors));
    }
    let config: ExperimentConfig = serde_json::from_value(value).map_err(|e| ConfigError::Invalid(vec![e.to_string()]))?;
    let errors = config.validate();
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(errors))
    }
}

fn strictly_monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0]) || v.windows(2).all(|w| w[1] < w[0])
}

impl ExperimentConfig {
    /// All rule violations, each naming its field.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let finite = |errors: &mut Vec<String>, name: &str, v: f64| {
            if !v.is_finite() {
                errors.push(format!("`{name}` must be finite, got {v}"));
                false
            } else {
                true
            }
        };
        let mut positive = Vec::new();
        let mut non_negative = Vec::new();
        for (name, v) in [
            ("half_length", self.half_length),
            ("t_final", self.t_final),
            ("dt", self.dt),
            ("epsilon", self.epsilon),
            ("exponent_tolerance", self.exponent_tolerance),
            ("energy_tolerance", self.energy_tolerance),
            ("hbar_override", self.hbar_override),
        ] {
            if let Some(v) = v {
                if finite(&mut errors, name, v) {
                    positive.push((name, v));
                }
            }
        }
        for (name, v) in [("grid_constant", self.grid_constant), ("coupling_override", self.coupling_override)] {
            if let Some(v) = v {
                if finite(&mut errors, name, v) {
                    non_negative.push((name, v));
                }
            }
        }
        if let Some(mu) = self.mu {
            finite(&mut errors, "mu", mu);
        }
        for (i, &h) in self.hbar_ladder.iter().enumerate() {
            if finite(&mut errors, "hbar_ladder", h) && h <= 0.0 {
                errors.push(format!("`hbar_ladder[{i}]` must be positive, got {h}"));
            }
        }
        for (i, &b) in self.b_ladder.iter().enumerate() {
            if finite(&mut errors, "b_ladder", b) && b < 0.0 {
                errors.push(format!("`b_ladder[{i}]` must be non-negative, got {b}"));
            }
        }
        for &t in &self.checkpoints {
            if finite(&mut errors, "checkpoints", t) && t < 0.0 {
                errors.push(format!("`checkpoints` must be non-negative, got {t}"));
            }
        }
        for (name, v) in positive {
            if v <= 0.0 {
                errors.push(format!("`{name}` must be positive, got {v}"));
            }
        }
        for (name, v) in non_negative {
            if v < 0.0 {
                errors.push(format!("`{name}` must be non-negative, got {v}"));
            }
        }
        if !strictly_monotone(&self.hbar_ladder) {
            errors.push("`hbar_ladder` must be strictly monotone".into());
        }
        if !strictly_monotone(&self.b_ladder) {
            errors.push("`b_ladder` must be strictly monotone".into());
        }
        if !self.checkpoints.windows(2).all(|w| w[1] > w[0]) {
            errors.push("`checkpoints` must be strictly increasing".into());
        }
        if !self.n_list.windows(2).all(|w| w[1] > w[0]) {
            errors.push("`n_list` must be strictly increasing".into());
        }
        if !(1..=2).contains(&self.dim) {
            errors.push(format!("`dim` must be 1 or 2, got {}", self.dim));
        }
        if let Some(m) = self.points_per_axis {
            if m < 3 {
                errors.push(format!("`points_per_axis` must be at least 3, got {m}"));
            }
        }
        if let Err(e) = self.fields() {
            errors.push(e);
        }
        if let Some(obs) = &self.observable {
            if let Err(e) = parse_observable(obs, self.dim) {
                errors.push(e);
            }
        }
        errors.extend(self.suite_requirements());
        errors
    }

    fn suite_requirements(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                errors.push(format!("suite `{}` requires {msg}", self.suite.name()));
            }
        };
        let hbars = !self.hbar_ladder.is_empty();
        match self.suite {
            Suite::CommutatorSweep => {
                need(self.hbar_ladder.len() >= 4, "`hbar_ladder` with at least 4 values");
                need(self.mu.is_some(), "`mu`");
            }
            Suite::BSweep => {
                need(hbars, "`hbar_ladder`");
                need(!self.b_ladder.is_empty(), "`b_ladder`");
                need(self.mu.is_some(), "`mu`");
            }
            Suite::Weyl => {
                need(self.hbar_ladder.len() >= 2, "`hbar_ladder` with at least 2 values");
                need(self.mu.is_some(), "`mu`");
            }
            Suite::Clr | Suite::Agmon => {
                need(hbars, "`hbar_ladder`");
                need(self.mu.is_some(), "`mu`");
            }
            Suite::Diamagnetic => {
                need(hbars, "`hbar_ladder`");
                need(!self.b_ladder.is_empty(), "`b_ladder`");
                need(self.dim == 2, "`dim` = 2");
            }
            Suite::Wigner => {
                need(hbars, "`hbar_ladder`");
                need(self.mu.is_some(), "`mu`");
                need(self.dim == 1, "`dim` = 1");
            }
            Suite::HfEvolve => {
                need(hbars, "`hbar_ladder`");
                need(self.n_particles.is_some_and(|n| n > 0), "a positive `n_particles`");
                need(self.t_final.is_some(), "`t_final`");
                need(self.dt.is_some(), "`dt`");
            }
            Suite::MbCompare => {
                need(!self.n_list.is_empty() && self.n_list[0] > 0, "a non-empty positive `n_list`");
                need(self.modes.is_some_and(|k| k > 0), "a positive `modes`");
                need(self.t_final.is_some(), "`t_final`");
                need(self.dt.is_some(), "`dt`");
            }
            Suite::Identities => {
                need(hbars, "`hbar_ladder`");
                need(!self.b_ladder.is_empty(), "`b_ladder`");
                need(self.dim == 2, "`dim` = 2");
            }
        }
        errors
    }

    pub fn points(&self) -> usize {
        self.points_per_axis.unwrap_or(if self.dim == 1 { 401 } else { 49 })
    }

    pub fn length(&self) -> f64 {
        self.half_length.unwrap_or(if self.dim == 1 { 8.0 } else { 6.0 })
    }

    pub fn grid(&self) -> crate::error::Result<Grid> {
        build_grid(self.dim, self.points(), self.length())
    }

    pub fn b_values(&self) -> Vec<f64> {
        if self.b_ladder.is_empty() {
            vec![0.0]
        } else {
            self.b_ladder.clone()
        }
    }

    pub fn epsilon_or_default(&self) -> f64 {
        self.epsilon.unwrap_or(0.5)
    }

    pub fn exponent_tolerance_or_default(&self) -> f64 {
        self.exponent_tolerance.unwrap_or(if self.dim == 1 { 0.15 } else { 0.2 })
    }

    pub fn observable_or_default(&self) -> Observable {
        parse_observable(self.observable.as_deref().unwrap_or("x1"), self.dim).unwrap_or(Observable::Position(0))
    }

    /// Builds V, a and W from their specs.
    pub fn fields(&self) -> Result<FieldSpec, String> {
        let p = &self.potential;
        let scale = |default: f64| -> Result<f64, String> {
            match p.coefficients.as_slice() {
                [] => Ok(default),
                [s] if s.is_finite() => Ok(*s),
                other => Err(format!("potential `{}` takes at most one finite coefficient, got {other:?}", p.name)),
            }
        };
        let scalar = match p.name.as_str() {
            "harmonic" => ScalarPotential::Harmonic { scale: scale(1.0)? },
            "quartic" => ScalarPotential::Quartic { scale: scale(1.0)? },
            "zero" => ScalarPotential::zero(),
            "polynomial" => {
                if p.coefficients.iter().chain(p.terms.iter().map(|t| &t.coef)).any(|c| !c.is_finite()) {
                    return Err("polynomial coefficients must be finite".into());
                }
                let mut terms: Vec<Monomial> = Vec::new();
                if let ScalarPotential::Polynomial(t) = ScalarPotential::polynomial_1d(&p.coefficients) {
                    terms.extend(t);
                }
                terms.extend(p.terms.iter().map(|t| Monomial {
                    coef: t.coef,
                    powers: t.powers,
                }));
                if self.dim == 1 && terms.iter().any(|t| t.powers[1] > 0) {
                    return Err("polynomial term uses x2 in d = 1".into());
                }
                ScalarPotential::Polynomial(terms)
            }
            other => return Err(format!("unknown potential `{other}` (harmonic, quartic, zero, polynomial)")),
        };
        let gauge = match &self.gauge {
            None if self.dim == 2 => VectorPotential::symmetric(),
            None => VectorPotential::zero(),
            Some(g) => match (g.name.as_str(), g.matrix) {
                ("zero", _) => VectorPotential::zero(),
                ("symmetric", _) => VectorPotential::symmetric(),
                ("landau", _) => VectorPotential::landau(),
                ("linear", Some(m)) if m.iter().flatten().all(|v| v.is_finite()) => VectorPotential::linear(m),
                ("linear", _) => return Err("gauge `linear` needs a finite 2x2 `matrix`".into()),
                (other, _) => return Err(format!("unknown gauge `{other}` (zero, symmetric, landau, linear)")),
            },
        };
        let w = &self.interaction;
        let interaction = match (w.name.as_str(), w.amplitude, w.width) {
            ("none", _, _) => Interaction::None,
            ("constant", Some(a), _) if a.is_finite() => Interaction::Constant(a),
            ("gaussian", Some(a), Some(s)) if a.is_finite() && s.is_finite() && s > 0.0 => Interaction::gaussian(a, s),
            ("constant", _, _) => return Err("interaction `constant` needs a finite `amplitude`".into()),
            ("gaussian", _, _) => return Err("interaction `gaussian` needs a finite `amplitude` and a positive `width`".into()),
            (other, _, _) => return Err(format!("unknown interaction `{other}` (none, constant, gaussian)")),
        };
        Ok(FieldSpec::new(gauge, scalar).with_interaction(interaction))
    }
}

pub fn parse_observable(s: &str, dim: usize) -> Result<Observable, String> {
    let axis = |c: &str| -> Result<usize, String> {
        match c {
            "1" => Ok(0),
            "2" if dim == 2 => Ok(1),
            _ => Err(format!("observable `{s}` has no axis `{c}` in d = {dim}")),
        }
    };
    if let Some(rest) = s.strip_prefix("x^(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        let powers: Vec<u32> = parts.iter().filter_map(|p| p.parse().ok()).collect();
        return match powers.as_slice() {
            [a, b] if parts.len() == 2 && a + b >= 1 && a + b <= 4 && (dim == 2 || *b == 0) => Ok(Observable::Monomial([*a, *b])),
            _ => Err(format!("observable `{s}` must be x^(a,b) with 1 <= a+b <= 4")),
        };
    }
    if let Some(c) = s.strip_prefix('x') {
        return axis(c).map(Observable::Position);
    }
    if let Some(c) = s.strip_prefix('p') {
        return axis(c).map(Observable::Momentum);
    }
    Err(format!("unknown observable `{s}` (x1, x2, p1, p2, x^(a,b))"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_sweep_config_fills_defaults() {
        let c = parse_config(r#"{"suite": "commutator-sweep", "hbar_ladder": [0.2, 0.1, 0.05, 0.025], "mu": 1.0}"#).unwrap();
        assert_eq!(c.suite, Suite::CommutatorSweep);
        assert_eq!(c.dim, 1);
        assert_eq!(c.points(), 401);
        assert_eq!(c.length(), 8.0);
        assert_eq!(c.b_values(), vec![0.0]);
        assert_eq!(c.observable_or_default().tag(), "x1");
        assert_eq!(c.exponent_tolerance_or_default(), 0.15);
    }

    #[test]
    fn negative_hbar_names_the_field() {
        let err = parse_config(r#"{"suite": "commutator-sweep", "hbar_ladder": [0.2, 0.1, -0.05, -0.1], "mu": 1.0}"#).unwrap_err();
        let msgs = err.messages();
        assert!(msgs.iter().any(|m| m.contains("hbar_ladder[2]")), "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("hbar_ladder[3]")), "{msgs:?}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = parse_config(r#"{"suite": "weyl", "hbar_ladder_typo": [0.1]}"#).unwrap_err();
        assert!(err.messages().iter().any(|m| m.contains("hbar_ladder_typo")));
        let nested = parse_config(r#"{"suite": "weyl", "hbar_ladder": [0.1, 0.05], "mu": 1, "potential": {"name": "harmonic", "scale": 2}}"#);
        assert!(nested.is_err());
    }

    #[test]
    fn all_errors_are_collected() {
        let err = parse_config(r#"{"suite": "hf-evolve", "dim": 3, "dt": -1, "b_ladder": [1, 0.5, 2]}"#).unwrap_err();
        let msgs = err.messages();
        for needle in ["`dim`", "`dt`", "b_ladder", "hbar_ladder", "n_particles", "t_final"] {
            assert!(msgs.iter().any(|m| m.contains(needle)), "missing {needle}: {msgs:?}");
        }
    }

    #[test]
    fn field_specs_build() {
        let c = parse_config(
            r#"{"suite": "diamagnetic", "dim": 2, "hbar_ladder": [0.2], "b_ladder": [0, 1],
                "gauge": {"name": "landau"}, "potential": {"name": "polynomial", "terms": [{"coef": 1, "powers": [2, 0]}, {"coef": 2, "powers": [0, 2]}]},
                "interaction": {"name": "gaussian", "amplitude": 1, "width": 0.5}}"#,
        )
        .unwrap();
        let f = c.fields().unwrap();
        assert_eq!(f.vector_potential, VectorPotential::landau());
        assert_eq!(f.scalar_potential.eval(&[1.0, 1.0]), 3.0);
        assert_eq!(f.interaction.label(), "gaussian(1,0.5)");
        assert!(parse_config(r#"{"suite": "clr", "hbar_ladder": [0.1], "mu": 1, "gauge": {"name": "curly"}}"#).is_err());
    }

    #[test]
    fn observables_parse() {
        assert_eq!(parse_observable("p2", 2).unwrap().tag(), "P2");
        assert_eq!(parse_observable("x^(1,2)", 2).unwrap().tag(), "x^(1,2)");
        assert!(parse_observable("x2", 1).is_err());
        assert!(parse_observable("x^(3,3)", 2).is_err());
        assert!(parse_observable("q", 1).is_err());
    }
}
