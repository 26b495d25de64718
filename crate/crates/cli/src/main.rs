//! `fsl`: batch front-end for the Finsler laboratory.
//!
//! Exit codes: 0 success, 1 runtime error, 2 invariant failure,
//! 3 configuration or usage error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{write_json, Outcome};
use crate::config::{ConfigError, Resolved, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "fsl", version, about = "Finsler surface laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Differentiation engine, `dual` or `fd`; overrides the config.
    #[arg(long, global = true)]
    engine: Option<String>,
    /// Multiplies every verdict tolerance.
    #[arg(long = "tol-scale", global = true)]
    tol_scale: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Metric validation, identity suite, indicatrix traces and averaged metrics.
    Analyze,
    /// Construct the compatible connection and check it.
    Connection,
    /// Wagner's criterion on the grid points.
    Wagner,
    /// Flatness and the divergence representation of the averaged metric's curvature.
    Curvature,
    /// Translation families of the trifocal construction as SVG.
    Figures,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Connection => "connection",
            Command::Wagner => "wagner",
            Command::Curvature => "curvature",
            Command::Figures => "figures",
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("FSL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Config(format!("invalid value for `FSL_THREADS`: `{v}`")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    init_threads()?;
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let resolved = Resolved::new(cfg, cli.engine.as_deref(), cli.tol_scale)?;
    let out: &Path = &cli.out;
    std::fs::create_dir_all(out)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out.display())))?;
    let result = match cli.command {
        Command::Analyze => commands::analyze(&resolved, out),
        Command::Connection => commands::connection(&resolved, out),
        Command::Wagner => commands::wagner(&resolved, out),
        Command::Curvature => commands::curvature(&resolved, out),
        Command::Figures => commands::figures(&resolved, out),
    };
    let outcome = result.map_err(|e| Failure::Runtime(e.to_string()))?;
    let path = out.join(format!("{}.json", cli.command.name()));
    write_json(&path, &outcome.summary).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(o) => {
            let verdict = o.summary.get("verdict").and_then(|v| v.as_str()).unwrap_or("?");
            println!("{}: {verdict}", cli.command.name());
            if o.ok {
                ExitCode::SUCCESS
            } else {
                if let Some(f) = o.summary.get("failures") {
                    eprintln!("invariant failures: {f}");
                }
                ExitCode::from(2)
            }
        }
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
