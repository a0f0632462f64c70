//! Experiment files and the solve/bench drivers.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ttiga_core::driver::{
    compare_with_reference, sample_field, solve_poisson_cached, OperatorCache, Problem, SolutionReport, SolveConfig,
};
use ttiga_core::{GeometryKind, IgaError};

use crate::cache::DiskCache;
use crate::output::{
    field_text, per_direction, write_atomic, write_csv, write_json, CrossoverRow, CrossoverSummary, ResultRow,
    CROSSOVER_HEADER, RESULT_HEADER,
};

/// One or more solves plus where to put the results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub runs: Vec<SolveConfig>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Overrides the seed of every run.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ExperimentFile {
    /// Reads an experiment file, or a bare solve config as a one-run experiment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let exp = if value.get("runs").is_some() {
            serde_json::from_value(value).with_context(|| format!("experiment file {}", path.display()))?
        } else {
            let cfg: SolveConfig = serde_json::from_value(value).with_context(|| format!("solve config {}", path.display()))?;
            ExperimentFile { runs: vec![cfg], out_dir: None, seed: None }
        };
        if exp.runs.is_empty() {
            bail!("{} lists no runs", path.display());
        }
        Ok(exp)
    }

    /// Six benchmark geometries at 8³ elements, then a ring ladder that ends
    /// beyond the reference's size limit.
    pub fn default_bench() -> Self {
        let mut runs: Vec<SolveConfig> = GeometryKind::BENCHMARK.iter().map(|&k| SolveConfig::preset(k, 2, 8)).collect();
        runs.extend([16, 32, 64, 100].map(|e| SolveConfig::preset(GeometryKind::Ring, 2, e)));
        ExperimentFile { runs, out_dir: None, seed: None }
    }
}

/// Command-line settings shared by `solve` and `bench`.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub eps_cross: Option<f64>,
    pub eps_solve: Option<f64>,
    pub jobs: usize,
    pub field_samples: usize,
}

/// Final run list after applying file-level and flag overrides (flags win),
/// with every configuration validated up front.
pub fn prepare(exp: &ExperimentFile, ov: &Overrides) -> Result<(Vec<SolveConfig>, PathBuf)> {
    let mut runs = exp.runs.clone();
    for (i, cfg) in runs.iter_mut().enumerate() {
        if let Some(s) = ov.seed.or(exp.seed) {
            cfg.seed = s;
        }
        if let Some(e) = ov.eps_cross {
            cfg.eps_cross = e;
        }
        if let Some(e) = ov.eps_solve {
            cfg.eps_solve = e;
        }
        Problem::new(cfg).with_context(|| format!("run {i}"))?;
    }
    let out = ov.out.clone().or_else(|| exp.out_dir.clone()).unwrap_or_else(|| PathBuf::from("ttiga-out"));
    Ok((runs, out))
}

fn stem(i: usize, cfg: &SolveConfig) -> String {
    let label = cfg.label.clone().unwrap_or_else(|| {
        format!("{}_p{}_e{}", cfg.geometry.name, per_direction(cfg.degree.get()), per_direction(cfg.elements.get()))
    });
    let clean: String =
        label.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect();
    format!("{i:03}_{clean}")
}

pub struct RunOutcome {
    pub row: ResultRow,
    pub report: Option<SolutionReport>,
    pub crossover: Option<CrossoverRow>,
    pub error: Option<String>,
}

fn run_one(i: usize, cfg: &SolveConfig, out: &Path, ov: &Overrides, compare: bool) -> RunOutcome {
    let cache = DiskCache::from_env();
    let failed = |msg: String| RunOutcome {
        row: ResultRow::failed(
            cfg.geometry.name.to_string(),
            per_direction(cfg.degree.get()),
            per_direction(cfg.elements.get()),
            &msg,
        ),
        report: None,
        crossover: None,
        error: Some(msg),
    };
    let sol = match solve_poisson_cached(cfg, cache.as_ref().map(|c| c as &dyn OperatorCache)) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    let stem = stem(i, cfg);
    let io = || -> Result<()> {
        write_json(&out.join(format!("{stem}.json")), &sol.report)?;
        if ov.field_samples > 0 {
            let samples = sample_field(&sol.u, &sol.problem.patch, &sol.problem.disc, ov.field_samples)?;
            write_atomic(&out.join(format!("{stem}.field.txt")), field_text(&samples, ov.field_samples).as_bytes())?;
        }
        Ok(())
    };
    if let Err(e) = io() {
        return failed(format!("{e:#}"));
    }
    let crossover = compare.then(|| match compare_with_reference(&sol, 1e-12) {
        Ok(c) => CrossoverRow::new(&sol.report, Ok(&c)),
        Err(IgaError::OracleRefused { .. }) => CrossoverRow::new(&sol.report, Err("refused".into())),
        Err(e) => CrossoverRow::new(&sol.report, Err(format!("error: {e}"))),
    });
    RunOutcome { row: ResultRow::from_report(&sol.report), report: Some(sol.report), crossover, error: None }
}

/// Runs every configuration (up to `jobs` at a time), writing per-run
/// reports and the aggregate CSV; outcomes keep the input order.
pub fn run_all(runs: &[SolveConfig], out: &Path, ov: &Overrides, compare: bool) -> Result<Vec<RunOutcome>> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(ov.jobs.max(1)).build()?;
    let outcomes: Vec<RunOutcome> =
        pool.install(|| runs.par_iter().enumerate().map(|(i, cfg)| run_one(i, cfg, out, ov, compare)).collect());
    for (i, o) in outcomes.iter().enumerate() {
        match (&o.report, &o.error) {
            (Some(r), _) => eprintln!(
                "run {i}: {} p={} e={} dofs={} l2={} residual={:.2e} {}",
                r.geometry,
                o.row.p,
                o.row.elems,
                r.dofs,
                r.l2_error.map_or("-".into(), |e| format!("{e:.3e}")),
                r.residual,
                o.row.status
            ),
            (None, Some(e)) => eprintln!("run {i}: error: {e}"),
            (None, None) => {}
        }
    }
    let rows: Vec<ResultRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    write_csv(&out.join("results.csv"), &rows, &RESULT_HEADER)?;
    if compare {
        let cross: Vec<CrossoverRow> = outcomes.iter().filter_map(|o| o.crossover.clone()).collect();
        write_csv(&out.join("crossover.csv"), &cross, &CROSSOVER_HEADER)?;
        let summary = CrossoverSummary::from_rows(&cross);
        write_json(&out.join("crossover.json"), &summary)?;
        match (summary.largest_reference_dofs, summary.time_ratio_at_largest) {
            (Some(d), Some(t)) => println!(
                "crossover: reference ran up to {d} dofs (full-grid / TT time {t:.2}); {} runs refused; TT faster from {}",
                summary.refused,
                summary.tt_faster_from_dofs.map_or("never".into(), |d| format!("{d} dofs"))
            ),
            _ => println!("crossover: reference ran on no configuration; {} runs refused", summary.refused),
        }
    }
    Ok(outcomes)
}
