//! `pfnn solve|study|inverse|validate --config <path> [--out <dir>] [--seed <u64>] [--list]`

pub mod commands;
pub mod config;
pub mod validate;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::error::{PfnnError, Result};
pub use commands::{cmd_inverse, cmd_solve, cmd_study, output_dir, Artifacts};
pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "pfnn", version, about = "Potential Fredholm neural networks on the unit disc")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Config file, or a preset name (poisson-ex1, helmholtz-ex1, bratu-ex1, inverse-ex1)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: <output>/<name>[-<command>])
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the inverse ensemble
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, clap::Args)]
struct ValidateArgs {
    /// Config file or preset name (default: poisson-ex1)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// List the checks without running them
    #[arg(long)]
    list: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forward solve: solution.csv and report.json
    Solve(RunArgs),
    /// Error metrics and bounds over [study].n_layers: study.csv
    Study(RunArgs),
    /// Inverse source ensemble: model.json, ensemble.json, field CSVs
    Inverse(RunArgs),
    /// Kernel, quadrature and network invariants
    Validate(ValidateArgs),
    /// Compare the artifacts under a directory with the reproduction targets
    Report {
        /// Artifact root holding the default per-run output directories
        #[arg(long, default_value = "out")]
        dir: PathBuf,
    },
}

fn error_json(e: &PfnnError) -> String {
    json!({ "error": { "kind": e.kind(), "message": e.to_string() } }).to_string()
}

/// Cap the worker pool from `PFNN_THREADS`.
fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("PFNN_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| PfnnError::Config(format!("PFNN_THREADS must be a positive integer, got {v:?}")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parse `args` (program name first), run the command and return the exit
/// status. Failures print an error JSON object on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                print!("{e}");
                return 0;
            }
            let err = PfnnError::Config(e.to_string().trim().to_string());
            eprintln!("{}", error_json(&err));
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            match e {
                PfnnError::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    configure_threads()?;
    match cli.command {
        Command::Solve(a) => report_dir(cmd_solve(&RunConfig::load(&a.config)?, a.out.as_deref(), a.seed)?),
        Command::Study(a) => report_dir(cmd_study(&RunConfig::load(&a.config)?, a.out.as_deref(), a.seed)?),
        Command::Inverse(a) => report_dir(cmd_inverse(&RunConfig::load(&a.config)?, a.out.as_deref(), a.seed)?),
        Command::Validate(a) => {
            if a.list {
                for c in validate::CHECKS {
                    println!("{:<26} {}", c.name, c.description);
                }
                return Ok(0);
            }
            let cfg = match &a.config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::preset("poisson-ex1")?,
            };
            cmd_validate(&cfg, a.out.as_deref()).map(|ok| if ok { 0 } else { 1 })
        }
        Command::Report { dir } => {
            let report = crate::reporting::write_report(&dir)?;
            print!("{}", report.summary());
            Ok(if report.pass { 0 } else { 1 })
        }
    }
}

fn report_dir(dir: PathBuf) -> Result<i32> {
    println!("{}", json!({ "status": "ok", "output": dir.display().to_string() }));
    Ok(0)
}

/// Run the invariant suite, print one line per check and write
/// `validate.json`. Returns whether every check passed.
pub fn cmd_validate(cfg: &RunConfig, out: Option<&Path>) -> Result<bool> {
    let results = validate::run_checks(cfg)?;
    for r in &results {
        println!(
            "{} {:<26} value {:.3e} tolerance {:.1e}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.value,
            r.tolerance
        );
    }
    let all = results.iter().all(|r| r.pass);
    let mut art = Artifacts::new(&output_dir(cfg, "validate", out));
    art.add_json(
        "validate.json",
        &json!({ "name": cfg.name, "boundary_nodes": cfg.boundary_nodes, "all_pass": all, "checks": results }),
    )?;
    art.commit()?;
    Ok(all)
}
