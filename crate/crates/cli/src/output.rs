//! Artifact formats: aggregate CSV rows, crossover rows, field dumps, and
//! atomic file writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use ttiga_core::driver::{Comparison, SolutionReport};

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Header row of an empty file, data rows otherwise.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
    write_atomic(path, &bytes)
}

/// `4` when all three directions agree, otherwise `4x8x4`.
pub fn per_direction(v: [usize; 3]) -> String {
    if v[0] == v[1] && v[1] == v[2] {
        v[0].to_string()
    } else {
        format!("{}x{}x{}", v[0], v[1], v[2])
    }
}

pub const RESULT_HEADER: [&str; 12] = [
    "geometry",
    "p",
    "elems",
    "dofs",
    "l2_error",
    "cr_K",
    "cr_f",
    "cr_u",
    "t_assemble_s",
    "t_solve_s",
    "residual",
    "status",
];

/// One line of `results.csv`. Empty numeric fields mean "not available".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub geometry: String,
    pub p: String,
    pub elems: String,
    pub dofs: Option<usize>,
    pub l2_error: Option<f64>,
    #[serde(rename = "cr_K")]
    pub cr_k: Option<f64>,
    pub cr_f: Option<f64>,
    pub cr_u: Option<f64>,
    pub t_assemble_s: Option<f64>,
    pub t_solve_s: Option<f64>,
    pub residual: Option<f64>,
    /// `ok`, `not_converged` or `error: <message>`.
    pub status: String,
}

impl ResultRow {
    pub fn from_report(r: &SolutionReport) -> Self {
        ResultRow {
            geometry: r.geometry.to_string(),
            p: per_direction(r.degree),
            elems: per_direction(r.elements),
            dofs: Some(r.dofs),
            l2_error: r.l2_error,
            cr_k: Some(r.cr_k),
            cr_f: Some(r.cr_f),
            cr_u: Some(r.cr_u),
            t_assemble_s: Some(r.timings.assemble_s()),
            t_solve_s: Some(r.timings.solve_s),
            residual: Some(r.residual),
            status: if r.converged { "ok".into() } else { "not_converged".into() },
        }
    }

    pub fn failed(geometry: String, p: String, elems: String, message: &str) -> Self {
        ResultRow {
            geometry,
            p,
            elems,
            dofs: None,
            l2_error: None,
            cr_k: None,
            cr_f: None,
            cr_u: None,
            t_assemble_s: None,
            t_solve_s: None,
            residual: None,
            status: format!("error: {}", message.replace(['\n', '\r'], " ")),
        }
    }
}

pub const CROSSOVER_HEADER: [&str; 10] =
    ["geometry", "p", "elems", "dofs", "t_tt_s", "t_full_s", "time_ratio", "u_rel", "reference_l2_error", "status"];

/// TT pipeline against the full-grid reference on one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossoverRow {
    pub geometry: String,
    pub p: String,
    pub elems: String,
    pub dofs: usize,
    /// Assembly plus solve of the TT pipeline.
    pub t_tt_s: f64,
    /// Assembly plus solve of the reference; empty when refused.
    pub t_full_s: Option<f64>,
    /// `t_full_s / t_tt_s`.
    pub time_ratio: Option<f64>,
    pub u_rel: Option<f64>,
    pub reference_l2_error: Option<f64>,
    /// `ok`, `refused` or `error: <message>`.
    pub status: String,
}

impl CrossoverRow {
    pub fn new(r: &SolutionReport, cmp: std::result::Result<&Comparison, String>) -> Self {
        let t_tt_s = r.timings.assemble_s() + r.timings.solve_s;
        let base = CrossoverRow {
            geometry: r.geometry.to_string(),
            p: per_direction(r.degree),
            elems: per_direction(r.elements),
            dofs: r.dofs,
            t_tt_s,
            t_full_s: None,
            time_ratio: None,
            u_rel: None,
            reference_l2_error: None,
            status: String::new(),
        };
        match cmp {
            Ok(c) => {
                let t_full = c.reference_assemble_s + c.reference_solve_s;
                CrossoverRow {
                    t_full_s: Some(t_full),
                    time_ratio: Some(t_full / t_tt_s),
                    u_rel: Some(c.u_rel),
                    reference_l2_error: c.reference_l2_error,
                    status: "ok".into(),
                    ..base
                }
            }
            Err(status) => CrossoverRow { status, ..base },
        }
    }
}

/// Summary of the crossover study written to `crossover.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossoverSummary {
    /// Largest problem on which the reference still ran.
    pub largest_reference_dofs: Option<usize>,
    /// Reference time over TT time at that size.
    pub time_ratio_at_largest: Option<f64>,
    /// Smallest problem on which the TT pipeline was faster.
    pub tt_faster_from_dofs: Option<usize>,
    pub refused: usize,
    pub compared: usize,
}

impl CrossoverSummary {
    pub fn from_rows(rows: &[CrossoverRow]) -> Self {
        let ok: Vec<&CrossoverRow> = rows.iter().filter(|r| r.status == "ok").collect();
        let largest = ok.iter().max_by_key(|r| r.dofs);
        CrossoverSummary {
            largest_reference_dofs: largest.map(|r| r.dofs),
            time_ratio_at_largest: largest.and_then(|r| r.time_ratio),
            tt_faster_from_dofs: ok.iter().filter(|r| r.time_ratio.is_some_and(|t| t > 1.0)).map(|r| r.dofs).min(),
            refused: rows.iter().filter(|r| r.status == "refused").count(),
            compared: ok.len(),
        }
    }
}

/// Structured-grid text: a header line `# ttiga-field m m m`, then
/// `x y z u` per sample with the first parametric index fastest.
pub fn field_text(samples: &[([f64; 3], [f64; 3], f64)], m: usize) -> String {
    let mut s = format!("# ttiga-field {m} {m} {m}\n");
    for (_, x, u) in samples {
        s.push_str(&format!("{:.17e} {:.17e} {:.17e} {:.17e}\n", x[0], x[1], x[2], u));
    }
    s
}
