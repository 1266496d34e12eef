//! Result records, the CSV sink, the manifest and the text report.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use super::config::ExperimentConfig;
use super::plot::Plot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

impl Verdict {
    pub fn check(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Info => "info",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub suite: String,
    /// Flattened parameters as a JSON object with sorted keys.
    pub params: Map<String, Value>,
    pub metric: String,
    pub value: f64,
    pub verdict: Verdict,
    pub wall_ms: u128,
}

impl ResultRecord {
    pub fn param_json(&self) -> String {
        Value::Object(self.params.clone()).to_string()
    }
}

/// Everything a suite produces besides its records.
#[derive(Debug, Default)]
pub struct SuiteOutput {
    pub records: Vec<ResultRecord>,
    pub tables: Vec<(String, String)>,
    pub plots: Vec<(String, Plot)>,
    pub notes: Vec<String>,
}

impl SuiteOutput {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.verdict == Verdict::Fail).count()
    }
}

pub const CSV_HEADER: [&str; 6] = ["suite", "param_json", "metric", "value", "verdict", "wall_ms"];

pub fn records_csv(records: &[ResultRecord]) -> std::io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.suite.clone(),
            r.param_json(),
            r.metric.clone(),
            r.value.to_string(),
            r.verdict.as_str().to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

/// Summary ordered by suite, then parameters; lists every fitted value and verdict.
pub fn emit_report(records: &[ResultRecord]) -> String {
    let mut sorted: Vec<&ResultRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (a.suite.as_str(), a.param_json()).cmp(&(b.suite.as_str(), b.param_json())));
    let count = |v: Verdict| records.iter().filter(|r| r.verdict == v).count();
    let mut out = String::from("mhflab report\n");
    out.push_str(&format!(
        "records: {}  pass: {}  fail: {}  info: {}\n",
        records.len(),
        count(Verdict::Pass),
        count(Verdict::Fail),
        count(Verdict::Info)
    ));
    let mut current: Option<(String, String)> = None;
    for r in sorted {
        let key = (r.suite.clone(), r.param_json());
        if current.as_ref() != Some(&key) {
            out.push_str(&format!("\n[{}] {}\n", key.0, key.1));
            current = Some(key);
        }
        out.push_str(&format!("  {:<5} {:<40} {}\n", r.verdict.as_str().to_uppercase(), r.metric, r.value));
    }
    out
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    suite: &'a str,
    status: &'a str,
    exit_code: i32,
    error: Option<&'a str>,
    records: usize,
    failures: usize,
    artifacts: Vec<String>,
    notes: &'a [String],
    config: &'a ExperimentConfig,
}

/// Writes results.csv, report.txt, tables, plots and manifest.json (last,
/// so a manifest always accompanies a complete CSV).
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, output: &SuiteOutput, error: Option<&str>, exit_code: i32) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let put = |written: &mut Vec<PathBuf>, name: &str, bytes: &[u8]| -> std::io::Result<()> {
        let path = dir.join(name);
        std::fs::File::create(&path)?.write_all(bytes)?;
        written.push(path);
        Ok(())
    };
    put(&mut written, "results.csv", &records_csv(&output.records)?)?;
    put(&mut written, "report.txt", emit_report(&output.records).as_bytes())?;
    for (name, text) in &output.tables {
        put(&mut written, name, text.as_bytes())?;
    }
    for (name, plot) in &output.plots {
        match plot.render_svg() {
            Ok(svg) => put(&mut written, name, svg.as_bytes())?,
            Err(e) => eprintln!("warning: plot {name} not rendered: {e}"),
        }
    }
    let artifacts: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let manifest = Manifest {
        suite: config.suite.name(),
        status: match exit_code {
            0 => "pass",
            1 => "fail",
            _ => "error",
        },
        exit_code,
        error,
        records: output.records.len(),
        failures: output.failures(),
        artifacts,
        notes: &output.notes,
        config,
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(std::io::Error::other)?;
    put(&mut written, "manifest.json", &json)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(verdict: Verdict) -> ResultRecord {
        let mut params = Map::new();
        params.insert("hbar".into(), Value::from(0.1));
        ResultRecord {
            suite: "weyl".into(),
            params,
            metric: "relative_error".into(),
            value: 0.05,
            verdict,
            wall_ms: 3,
        }
    }

    #[test]
    fn empty_report_has_header() {
        let r = emit_report(&[]);
        assert!(r.starts_with("mhflab report\n"));
        assert!(r.contains("records: 0  pass: 0  fail: 0"));
    }

    #[test]
    fn one_failure_is_counted() {
        let r = emit_report(&[record(Verdict::Pass), record(Verdict::Fail)]);
        assert!(r.contains("fail: 1"));
        assert!(r.contains("FAIL"));
    }

    #[test]
    fn csv_has_exact_columns() {
        let bytes = records_csv(&[record(Verdict::Info)]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "suite,param_json,metric,value,verdict,wall_ms");
        assert_eq!(lines.next().unwrap(), r#"weyl,"{""hbar"":0.1}",relative_error,0.05,info,3"#);
    }
}
