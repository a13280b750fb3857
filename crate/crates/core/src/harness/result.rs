use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{Experiment, RunConfig};
use super::svg::{render_heatmap, render_lines, Series};
use crate::training::LossTrace;
use crate::{Error, Mat, Result};

pub const SCHEMA_VERSION: &str = "1";

/// One named pass/fail judgement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    /// `value < bound`.
    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::new(name, value < bound, format!("{value:e} < {bound:e}"))
    }
}

/// Metrics and checks produced by one experiment body.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub metrics: Value,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentResult {
    pub schema_version: String,
    pub experiment: String,
    /// The configuration actually run (paper-scale sizes already applied).
    pub config: RunConfig,
    pub metrics: Value,
    pub checks: Vec<Check>,
    pub passed: bool,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl ExperimentResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        validate_result(&v)?;
        Ok(serde_json::from_value(v)?)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn schema_error(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(format!("result schema: {}", msg.into()))
}

/// Structural validation of a result document against schema version 1
/// (`docs/result.schema.json`).
pub fn validate_result(v: &Value) -> Result<()> {
    let obj = v.as_object().ok_or_else(|| schema_error("not an object"))?;
    const KEYS: [&str; 8] = [
        "schema_version",
        "experiment",
        "config",
        "metrics",
        "checks",
        "passed",
        "artifacts",
        "wall_clock_seconds",
    ];
    for k in KEYS {
        if !obj.contains_key(k) {
            return Err(schema_error(format!("missing `{k}`")));
        }
    }
    if let Some(extra) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(schema_error(format!("unexpected `{extra}`")));
    }
    if obj["schema_version"] != SCHEMA_VERSION {
        return Err(schema_error("schema_version must be \"1\""));
    }
    let known = obj["experiment"]
        .as_str()
        .is_some_and(|n| Experiment::NAMES.contains(&n));
    if !known {
        return Err(schema_error("unknown experiment"));
    }
    if !obj["config"].is_object() || !obj["metrics"].is_object() {
        return Err(schema_error("config or metrics has the wrong type"));
    }
    if !obj["passed"].is_boolean() || !obj["wall_clock_seconds"].is_number() {
        return Err(schema_error(
            "passed or wall_clock_seconds has the wrong type",
        ));
    }
    let checks = obj["checks"]
        .as_array()
        .ok_or_else(|| schema_error("checks must be an array"))?;
    for c in checks {
        let ok = c["name"].is_string() && c["passed"].is_boolean() && c["detail"].is_string();
        if !ok {
            return Err(schema_error("malformed check"));
        }
    }
    let artifacts = obj["artifacts"]
        .as_array()
        .ok_or_else(|| schema_error("artifacts must be an array"))?;
    if artifacts.iter().any(|a| !a.is_string()) {
        return Err(schema_error("artifact entries must be strings"));
    }
    Ok(())
}

/// Output directory bookkeeping. Without a directory nothing is written but
/// artifact names are still recorded, so results do not depend on where
/// (or whether) files land.
#[derive(Debug)]
pub struct Outputs {
    dir: Option<PathBuf>,
    artifacts: Vec<String>,
}

impl Outputs {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        Ok(Outputs {
            dir: dir.map(Path::to_path_buf),
            artifacts: Vec::new(),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn artifacts(&self) -> &[String] {
        &self.artifacts
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        self.artifacts.push(name.to_string());
        Ok(())
    }

    /// Comma-separated table with a header row. Floats use Rust's shortest
    /// round-trip formatting.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            if r.len() != header.len() {
                return Err(Error::Dimension(format!(
                    "{name}: row has {} fields, header {}",
                    r.len(),
                    header.len()
                )));
            }
            w.write_record(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        self.put(name, &bytes)
    }

    pub fn matrix_csv(&mut self, name: &str, m: &Mat) -> Result<()> {
        let header: Vec<String> = (0..m.cols()).map(|j| format!("c{j}")).collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = (0..m.rows())
            .map(|i| m.row(i).iter().map(|x| x.to_string()).collect())
            .collect();
        self.csv(name, &header, &rows)
    }

    pub fn lines(&mut self, name: &str, series: &[Series], log_y: bool) -> Result<()> {
        let title = name.trim_end_matches(".svg");
        let svg = render_lines(series, title, log_y)?;
        self.put(name, svg.as_bytes())
    }

    pub fn heatmap(&mut self, name: &str, m: &Mat) -> Result<()> {
        let svg = render_heatmap(m, name.trim_end_matches(".svg"))?;
        self.put(name, svg.as_bytes())
    }

    pub fn trace(&mut self, name: &str, trace: &LossTrace) -> Result<()> {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf)?;
        self.put(name, &buf)
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.put(name, text.as_bytes())
    }
}

/// Shortest round-trip text for a float.
pub fn num(x: f64) -> String {
    x.to_string()
}
