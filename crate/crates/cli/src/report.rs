//! Run summaries and the files written for every command.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One acceptance threshold and its measured value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// One of `<=`, `<`, `>=`, `>`.
    pub relation: String,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, value: f64, relation: &str, bound: f64, pass: bool) -> Self {
        Self { name: name.to_string(), value, relation: relation.to_string(), bound, pass }
    }

    pub fn le(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value, "<=", bound, value <= bound)
    }

    pub fn lt(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value, "<", bound, value < bound)
    }

    pub fn ge(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value, ">=", bound, value >= bound)
    }

    pub fn gt(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value, ">", bound, value > bound)
    }
}

/// JSON summary of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    /// The property the command probes.
    pub claim: String,
    pub pass: bool,
    pub map_hash: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub metrics: Value,
}

impl Summary {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Everything a command produces before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Summary,
    /// Detail tables as `(file name, CSV text)`.
    pub tables: Vec<(String, String)>,
    pub log: Vec<String>,
}

/// CSV text from a header and rows of already formatted fields.
pub fn csv_text<S: AsRef<str>>(header: &[&str], rows: impl IntoIterator<Item = Vec<S>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref()))?;
    }
    Ok(String::from_utf8(w.into_inner().context("flushing CSV")?)?)
}

/// Formats a float for CSV output; `{:e}` round-trips exactly.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    map_hash: &'a str,
    seed: u64,
    threads: usize,
    versions: Versions,
    files: Vec<String>,
    config: &'a Value,
}

#[derive(Debug, Clone, Serialize)]
struct Versions {
    #[serde(rename = "toral-lab")]
    core: &'static str,
    #[serde(rename = "toral-lab-cli")]
    cli: &'static str,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes `<command>.json`, the detail tables, `<command>.manifest.json` and
/// `<command>.log` into `out`; returns the summary path.
pub fn write_outcome(out: &Path, outcome: &Outcome, config: &Value, threads: usize) -> Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let s = &outcome.summary;
    let summary_path = out.join(format!("{}.json", s.command));
    write(&summary_path, &(serde_json::to_string_pretty(s)? + "\n"))?;
    let mut files = vec![format!("{}.json", s.command)];
    for (name, text) in &outcome.tables {
        write(&out.join(name), text)?;
        files.push(name.clone());
    }
    let log_name = format!("{}.log", s.command);
    let mut log = outcome.log.join("\n");
    log.push('\n');
    write(&out.join(&log_name), &log)?;
    files.push(log_name);
    let manifest = Manifest {
        command: &s.command,
        map_hash: &s.map_hash,
        seed: s.seed,
        threads,
        versions: Versions { core: toral_lab::VERSION, cli: env!("CARGO_PKG_VERSION") },
        files,
        config,
    };
    write(&out.join(format!("{}.manifest.json", s.command)), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(summary_path)
}
