//! Command-line runner for the toral-lab experiments.
//!
//! Each subcommand reads a TOML configuration (see `docs/config.md`), runs one
//! experiment and writes `<command>.json` (summary with pass/fail checks),
//! CSV detail tables, `<command>.manifest.json` and a plain-text log into the
//! output directory. The process exits with 0 when every check passes, 2 when
//! a threshold fails and 1 on any error.

pub mod commands;
pub mod config;
pub mod report;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Parser;

pub use commands::{run, Command};
pub use config::{Config, ConfigError};
pub use report::{Check, Outcome, Summary};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_THRESHOLD: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "toral-lab", version, about = "Numerical experiments on deformed Anosov maps of the torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Master seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory (overrides `out`; default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads (overrides `threads`).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Override any configuration value, e.g. `--set srb.n=500` or `--set map.strengths=[0.01,0.01]`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Shortcut for `--set <section>.n=<N>`.
    #[arg(long, global = true)]
    pub n: Option<u64>,

    /// Shortcut for `--set <section>.samples=<N>`.
    #[arg(long, global = true)]
    pub samples: Option<u64>,

    /// Shortcut for `--set <section>.starts=<N>`.
    #[arg(long, global = true)]
    pub starts: Option<u64>,
}

impl Cli {
    /// Dotted overrides implied by the flags, in the order they apply.
    pub fn overrides(&self) -> Result<Vec<(String, String)>, ConfigError> {
        let section = self.command.section();
        let mut out = Vec::new();
        for text in &self.set {
            let (k, v) = config::split_override(text)?;
            out.push((k.to_string(), v.to_string()));
        }
        for (key, value) in [("n", self.n), ("samples", self.samples), ("starts", self.starts)] {
            if let Some(v) = value {
                out.push((format!("{section}.{key}"), v.to_string()));
            }
        }
        if let Some(seed) = self.seed {
            out.push(("seed".into(), seed.to_string()));
        }
        if let Some(threads) = self.threads {
            out.push(("threads".into(), threads.to_string()));
        }
        Ok(out)
    }
}

/// Runs `command` on a pool of `config.threads` workers and writes its files
/// into `out`. Returns the outcome and the exit code it implies.
pub fn execute(command: Command, config: &Config, out: &Path) -> Result<(Outcome, i32)> {
    let threads = config.threads.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().context("building the thread pool")?;
    let outcome = pool.install(|| commands::run(command, config))?;
    let mut echo = serde_json::to_value(config)?;
    echo["map"] = serde_json::to_value(config.map_spec()?)?;
    report::write_outcome(out, &outcome, &echo, threads)?;
    let code = if outcome.summary.pass { EXIT_PASS } else { EXIT_THRESHOLD };
    Ok((outcome, code))
}

/// Full command-line entry point; prints a one-line result or the error.
pub fn main_with(cli: Cli) -> i32 {
    let result = (|| -> Result<(Outcome, i32, PathBuf)> {
        let overrides = cli.overrides()?;
        let mut config = Config::load(cli.config.as_deref(), &overrides)?;
        if let Some(out) = &cli.out {
            config.out = Some(out.clone());
        }
        let out = config.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let (outcome, code) = execute(cli.command, &config, &out)?;
        Ok((outcome, code, out))
    })();
    match result {
        Ok((outcome, code, out)) => {
            let s = &outcome.summary;
            println!("{}: {} ({})", s.command, if s.pass { "pass" } else { "threshold failure" }, out.join(format!("{}.json", s.command)).display());
            for c in s.checks.iter().filter(|c| !c.pass) {
                println!("  failed {}: {:e} {} {:e}", c.name, c.value, c.relation, c.bound);
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
