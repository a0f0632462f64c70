//! `ttiga`: run TT-IGA Poisson solves, benchmark ladders and debugging dumps.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 solver did not converge.

mod cache;
mod check;
mod dump;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::output::write_atomic;
use crate::run::{prepare, run_all, ExperimentFile, Overrides};

#[derive(Parser)]
#[command(name = "ttiga", version, about = "Tensor-train isogeometric Poisson solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct RunArgs {
    /// Solve config or experiment file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the file's `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Runs executed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Samples per direction of the field dump; 0 disables it.
    #[arg(long, default_value_t = 0)]
    field_samples: usize,
    #[arg(long)]
    eps_cross: Option<f64>,
    #[arg(long)]
    eps_solve: Option<f64>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            eps_cross: self.eps_cross,
            eps_solve: self.eps_solve,
            jobs: self.jobs,
            field_samples: self.field_samples,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every configuration in a config or experiment file.
    Solve(RunArgs),
    /// Run a ladder and compare each run against the full-grid reference.
    Bench(RunArgs),
    /// Print basis tables, geometry patches or TT container summaries.
    Dump {
        #[command(subcommand)]
        what: DumpTarget,
    },
    /// Validate artifacts (files or directories) against their schemas.
    Check {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DumpTarget {
    /// Tabulate a univariate basis; defaults to the quadratic circle basis.
    Basis {
        #[arg(long, value_delimiter = ',')]
        knots: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long, default_value_t = 2)]
        degree: usize,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(long)]
        derivatives: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Control net, knots and weights of a geometry as JSON.
    Geometry {
        name: String,
        /// Geometry parameter as key=value; repeatable.
        #[arg(long = "param")]
        params: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Modes, ranks and compression of a TT container file.
    TtInfo {
        path: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solve(args: &RunArgs) -> Result<ExitCode> {
    let Some(path) = &args.config else {
        anyhow::bail!("solve needs --config");
    };
    let exp = ExperimentFile::load(path)?;
    let (runs, out) = prepare(&exp, &args.overrides())?;
    let outcomes = run_all(&runs, &out, &args.overrides(), false)?;
    if outcomes.iter().any(|o| o.error.is_some()) {
        return Ok(ExitCode::from(1));
    }
    if outcomes.iter().any(|o| o.report.as_ref().is_some_and(|r| !r.converged)) {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn bench(args: &RunArgs) -> Result<ExitCode> {
    let exp = match &args.config {
        Some(p) => ExperimentFile::load(p)?,
        None => ExperimentFile::default_bench(),
    };
    let (runs, out) = prepare(&exp, &args.overrides())?;
    let outcomes = run_all(&runs, &out, &args.overrides(), true)?;
    let succeeded = outcomes.iter().any(|o| o.row.status == "ok");
    Ok(if succeeded { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn dump(what: &DumpTarget) -> Result<ExitCode> {
    match what {
        DumpTarget::Basis { knots, weights, degree, samples, derivatives, out } => {
            let b = dump::basis(knots.as_deref(), weights.as_deref(), *degree)?;
            emit(&dump::basis_csv(&b, *samples, *derivatives)?, out)?;
        }
        DumpTarget::Geometry { name, params, out } => emit(&dump::geometry_json(name, params)?, out)?,
        DumpTarget::TtInfo { path, out } => {
            let mut s = serde_json::to_string_pretty(&dump::tt_info(path)?)?;
            s.push('\n');
            emit(&s, out)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn check(paths: &[PathBuf]) -> Result<ExitCode> {
    let files = check::collect(paths)?;
    let mut bad = 0;
    for f in &files {
        match check::check_file(f) {
            Ok(kind) => println!("ok   {} ({kind})", f.display()),
            Err(e) => {
                bad += 1;
                println!("FAIL {}: {e:#}", f.display());
            }
        }
    }
    println!("{} files checked, {bad} failed", files.len());
    Ok(if bad == 0 && !files.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::Dump { what } => dump(what),
        Command::Check { paths } => check(paths),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
