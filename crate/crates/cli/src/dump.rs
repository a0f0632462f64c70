//! Debugging dumps: basis tables, geometry patches and TT container summaries.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use ttiga_core::splines::{circle_basis, Basis1D, KnotVector};
use ttiga_core::{make_geometry, GeometryKind};
use ttiga_tensor::io::{read_any, Stored};
use ttiga_tensor::{compression_ratio_matrix, compression_ratio_tensor};

/// Basis from explicit knots and optional weights, or the quadratic circle
/// basis when no knots are given.
pub fn basis(knots: Option<&[f64]>, weights: Option<&[f64]>, degree: usize) -> Result<Basis1D> {
    let Some(knots) = knots else {
        if weights.is_some() {
            bail!("--weights needs --knots");
        }
        return Ok(circle_basis());
    };
    let kv = KnotVector::new(knots.to_vec(), degree)?;
    Ok(match weights {
        Some(w) => Basis1D::nurbs(kv, w.to_vec())?,
        None => Basis1D::bspline(kv),
    })
}

/// CSV with columns `xi, N0..N{n-1}` and, with derivatives, `dN0..dN{n-1}`.
pub fn basis_csv(b: &Basis1D, samples: usize, derivatives: bool) -> Result<String> {
    if samples < 2 {
        bail!("need at least two samples");
    }
    let (lo, hi) = (b.knot_vector.first(), b.knot_vector.last());
    let xs: Vec<f64> = (0..samples).map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64).collect();
    let (vals, ders) = b.tabulate(&xs)?;
    let n = b.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["xi".to_string()];
    header.extend((0..n).map(|i| format!("N{i}")));
    if derivatives {
        header.extend((0..n).map(|i| format!("dN{i}")));
    }
    w.write_record(&header)?;
    for (j, x) in xs.iter().enumerate() {
        let mut rec = vec![x.to_string()];
        rec.extend((0..n).map(|i| vals[i][j].to_string()));
        if derivatives {
            rec.extend((0..n).map(|i| ders[i][j].to_string()));
        }
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?)?)
}

pub fn parse_params(items: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in items {
        let (k, v) = item.split_once('=').with_context(|| format!("parameter `{item}` is not key=value"))?;
        let v: f64 = v.trim().parse().with_context(|| format!("parameter `{item}`"))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

pub fn geometry_json(name: &str, params: &[String]) -> Result<String> {
    let kind: GeometryKind = name.parse()?;
    let patch = make_geometry(kind, &parse_params(params)?)?;
    let mut s = serde_json::to_string_pretty(&patch)?;
    s.push('\n');
    Ok(s)
}

/// Summary of one TT container file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TtInfo {
    pub kind: String,
    pub row_modes: Vec<usize>,
    pub col_modes: Option<Vec<usize>>,
    pub ranks: Vec<usize>,
    pub params: usize,
    pub compression_ratio: f64,
    pub norm: f64,
}

pub fn tt_info(path: &Path) -> Result<TtInfo> {
    let stored = read_any(&mut BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(match stored {
        Stored::Tensor(t) => TtInfo {
            kind: "tensor".into(),
            row_modes: t.modes(),
            col_modes: None,
            ranks: t.ranks(),
            params: t.num_params(),
            compression_ratio: compression_ratio_tensor(&t),
            norm: t.norm(),
        },
        Stored::Operator(a) => TtInfo {
            kind: "operator".into(),
            row_modes: a.row_modes().to_vec(),
            col_modes: Some(a.col_modes().to_vec()),
            ranks: a.ranks(),
            params: a.num_params(),
            compression_ratio: compression_ratio_matrix(&a),
            norm: a.norm(),
        },
    })
}
