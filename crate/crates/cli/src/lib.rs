//! `fatoulab` command-line runner.
//!
//! Every subcommand reads one JSON config, writes `resolved_config.json`,
//! its artifacts and `summary.json` into the output directory, and exits with
//! 0 (success), 2 (bad config), 3 (numerical failure) or 4 (calibration failure).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CALIBRATION: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Render,
    Periodic,
    Access,
    Audit,
    Measure,
    Inner,
    Scan,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Render => "render",
            Subcommand::Periodic => "periodic",
            Subcommand::Access => "access",
            Subcommand::Audit => "audit",
            Subcommand::Measure => "measure",
            Subcommand::Inner => "inner",
            Subcommand::Scan => "scan",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fatoulab",
    version,
    about = "Boundary dynamics of unbounded Fatou components"
)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `rng_seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    subcommand: &'a str,
    config_hash: String,
    wall_time: f64,
    outputs: Vec<String>,
    errors: Vec<String>,
    results: serde_json::Value,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn load(cli: &Cli) -> Result<(RunConfig, String), ConfigError> {
    let text = fs::read_to_string(&cli.config)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", cli.config.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.to_string_lossy().into_owned();
    }
    let cfg = cfg.resolve(cli.subcommand)?;
    let json = cfg.to_json();
    Ok((cfg, json))
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let started = Instant::now();
    let (cfg, resolved_json) = match load(&cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_CONFIG;
        }
    };
    let dir = PathBuf::from(&cfg.output_dir);
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return EXIT_CONFIG;
    }

    let outcome = pool.install(|| commands::execute(cli.subcommand, &cfg));
    let mut outputs = Vec::new();
    let mut errors = Vec::new();
    let mut write =
        |name: &str, bytes: &[u8], errors: &mut Vec<String>| match fs::write(dir.join(name), bytes)
        {
            Ok(()) => outputs.push(name.to_string()),
            Err(e) => errors.push(format!("writing {name}: {e}")),
        };
    write(
        "resolved_config.json",
        resolved_json.as_bytes(),
        &mut errors,
    );

    let code = match &outcome.failure {
        None => EXIT_OK,
        Some(commands::Failure::Numerical(_)) => EXIT_NUMERICAL,
        Some(commands::Failure::Calibration(_)) => EXIT_CALIBRATION,
    };
    for (name, bytes) in &outcome.files {
        write(name, bytes, &mut errors);
    }
    if let Some(f) = &outcome.failure {
        errors.push(f.to_string());
    }
    let io_failed = errors.len() > usize::from(outcome.failure.is_some());
    let summary = Summary {
        subcommand: cli.subcommand.name(),
        config_hash: sha256_hex(resolved_json.as_bytes()),
        wall_time: started.elapsed().as_secs_f64(),
        outputs,
        errors,
        results: outcome.results,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    if let Err(e) = fs::write(summary_path(&dir), text) {
        eprintln!("error: writing summary.json: {e}");
        return EXIT_NUMERICAL.max(code);
    }
    for e in &summary.errors {
        eprintln!("error: {e}");
    }
    if io_failed && code == EXIT_OK {
        return EXIT_NUMERICAL;
    }
    code
}

fn summary_path(dir: &Path) -> PathBuf {
    dir.join("summary.json")
}
