//! Schema validation for every artifact the tool writes.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use ttiga_core::driver::{SolutionReport, SolveConfig};
use ttiga_core::GeometryPatch;
use ttiga_tensor::io::read_any;

use crate::cache::CacheManifest;
use crate::dump::TtInfo;
use crate::output::{CrossoverRow, CrossoverSummary, ResultRow, CROSSOVER_HEADER, RESULT_HEADER};
use crate::run::ExperimentFile;

/// Files under `paths`, directories expanded recursively; within a directory
/// only known artifact extensions are picked up.
pub fn collect(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> =
                std::fs::read_dir(p)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
            entries.sort();
            for e in entries {
                let known = matches!(e.extension().and_then(|x| x.to_str()), Some("json" | "csv" | "txt" | "tt"));
                if e.is_dir() || known {
                    out.extend(collect(&[e])?);
                }
            }
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Validates one artifact and names its kind.
pub fn check_file(path: &Path) -> Result<&'static str> {
    match path.extension().and_then(|x| x.to_str()) {
        Some("json") => check_json(path),
        Some("csv") => check_csv(path),
        Some("txt") => check_field(path),
        Some("tt") => {
            read_any(&mut BufReader::new(File::open(path)?))?;
            Ok("tt container")
        }
        _ => bail!("unknown artifact type"),
    }
}

fn check_json(path: &Path) -> Result<&'static str> {
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let has = |k: &str| value.get(k).is_some();
    if has("runs") {
        serde_json::from_value::<ExperimentFile>(value)?;
        Ok("experiment file")
    } else if has("ranks_u") {
        let r: SolutionReport = serde_json::from_value(value)?;
        ensure!(r.dofs == r.modes.iter().product::<usize>(), "dofs {} differ from modes {:?}", r.dofs, r.modes);
        ensure!(r.cr_k > 0.0 && r.cr_f > 0.0 && r.cr_u > 0.0, "compression ratios must be positive");
        for ranks in [&r.ranks_k, &r.ranks_f, &r.ranks_u] {
            ensure!(ranks.len() == 4 && ranks[0] == 1 && ranks[3] == 1, "ranks {ranks:?} must read [1, r1, r2, 1]");
        }
        Ok("solution report")
    } else if has("largest_reference_dofs") {
        serde_json::from_value::<CrossoverSummary>(value)?;
        Ok("crossover summary")
    } else if has("key_material") {
        serde_json::from_value::<CacheManifest>(value)?;
        Ok("cache manifest")
    } else if has("control_points") {
        let p: GeometryPatch = serde_json::from_value(value)?;
        let n: usize = p.shape.iter().product();
        ensure!(p.control_points.len() == n && p.weights.len() == n, "control grid does not match shape {:?}", p.shape);
        ensure!((0..3).all(|d| p.bases[d].len() == p.shape[d]), "basis sizes do not match shape {:?}", p.shape);
        ensure!(p.weights.iter().all(|w| *w > 0.0), "weights must be positive");
        Ok("geometry patch")
    } else if has("row_modes") {
        serde_json::from_value::<TtInfo>(value)?;
        Ok("tt summary")
    } else if has("geometry") {
        serde_json::from_value::<SolveConfig>(value)?;
        Ok("solve config")
    } else {
        bail!("unrecognized JSON document")
    }
}

fn check_csv(path: &Path) -> Result<&'static str> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header == RESULT_HEADER {
        for (i, row) in rdr.deserialize::<ResultRow>().enumerate() {
            let row = row.with_context(|| format!("row {}", i + 1))?;
            let ok = row.status == "ok" || row.status == "not_converged" || row.status.starts_with("error: ");
            ensure!(ok, "row {}: unknown status `{}`", i + 1, row.status);
            if !row.status.starts_with("error") {
                ensure!(row.dofs.is_some() && row.residual.is_some(), "row {}: missing metrics", i + 1);
            }
        }
        Ok("results table")
    } else if header == CROSSOVER_HEADER {
        for (i, row) in rdr.deserialize::<CrossoverRow>().enumerate() {
            let row = row.with_context(|| format!("row {}", i + 1))?;
            let ok = row.status == "ok" || row.status == "refused" || row.status.starts_with("error: ");
            ensure!(ok, "row {}: unknown status `{}`", i + 1, row.status);
            ensure!((row.status == "ok") == row.t_full_s.is_some(), "row {}: reference time present iff ok", i + 1);
        }
        Ok("crossover table")
    } else if header.first().map(String::as_str) == Some("xi") {
        let n = header.iter().filter(|h| h.starts_with('N')).count();
        ensure!(n > 0, "basis table without functions");
        let mut rows = 0;
        for rec in rdr.records() {
            let rec = rec?;
            ensure!(rec.len() == header.len(), "ragged basis table");
            let v: Vec<f64> = rec.iter().map(|s| s.parse::<f64>()).collect::<std::result::Result<_, _>>()?;
            let sum: f64 = v[1..=n].iter().sum();
            ensure!((sum - 1.0).abs() < 1e-12, "basis values at xi={} sum to {sum}", v[0]);
            rows += 1;
        }
        ensure!(rows > 0, "empty basis table");
        Ok("basis table")
    } else {
        bail!("unrecognized CSV header {header:?}")
    }
}

fn check_field(path: &Path) -> Result<&'static str> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let head = lines.next().unwrap_or_default();
    let dims: Vec<usize> = match head.strip_prefix("# ttiga-field ") {
        Some(rest) => rest.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>()?,
        None => bail!("missing `# ttiga-field` header"),
    };
    ensure!(dims.len() == 3, "header needs three sample counts");
    let mut count = 0;
    for (i, line) in lines.enumerate() {
        let v: Vec<f64> = line.split_whitespace().map(str::parse).collect::<std::result::Result<_, _>>()
            .with_context(|| format!("line {}", i + 2))?;
        ensure!(v.len() == 4 && v.iter().all(|x| x.is_finite()), "line {}: expected four finite numbers", i + 2);
        count += 1;
    }
    ensure!(count == dims.iter().product::<usize>(), "{count} samples for grid {dims:?}");
    Ok("field dump")
}
