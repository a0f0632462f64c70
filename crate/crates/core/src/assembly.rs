//! TT assembly of the stiffness operator and load vector, and reduction of the
//! system to the free coefficients.
//!
//! `K = Σ_ij K_ij` with `K_ij = ∫ (∂N/∂ξ_i)ᵀ R_ij (∂N/∂ξ_j) dξ`. Each `R_ij` is
//! cross-approximated on the quadrature grid; contracting core `d` with the
//! quadrature-weighted basis tables of direction `d` (derivatives where
//! `d = i` for rows and `d = j` for columns) gives the operator core.

use std::ops::Range;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ttiga_tensor::{tt_cross, Core3, CrossOptions, CrossOracle, CrossResult, TtError, TtMatrix, TtTensor};

use crate::discretization::Discretization;
use crate::error::{IgaError, Result};
use crate::geometry::GeometryPatch;
use crate::splines::BasisEval;

/// Scalar field on physical space.
pub type ScalarFn<'a> = dyn Fn([f64; 3]) -> f64 + Sync + 'a;

#[derive(Clone, Debug)]
pub struct AssemblyOptions {
    pub eps_cross: f64,
    pub eps_round: f64,
    pub rank_cap: usize,
    pub seed: u64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { eps_cross: 1e-10, eps_round: 1e-10, rank_cap: 64, seed: 0 }
    }
}

/// Outcome of one cross approximation, for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossSummary {
    pub field: String,
    pub ranks: Vec<usize>,
    pub holdout_error: f64,
    pub sweeps: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub warning: Option<String>,
}

impl CrossSummary {
    fn from_result(field: String, r: &CrossResult) -> Self {
        CrossSummary {
            field,
            ranks: r.tt.ranks(),
            holdout_error: r.holdout_error,
            sweeps: r.sweeps,
            evaluations: r.evaluations,
            converged: r.converged,
            warning: r.warning.clone(),
        }
    }
}

/// Geometry basis evaluations at the quadrature points of each direction.
struct GeometryTables<'a> {
    patch: &'a GeometryPatch,
    evals: [Vec<BasisEval>; 3],
    points: [&'a [f64]; 3],
    modes: Vec<usize>,
}

impl<'a> GeometryTables<'a> {
    fn new(patch: &'a GeometryPatch, disc: &'a Discretization) -> Result<Self> {
        let mut evals = Vec::with_capacity(3);
        for d in 0..3 {
            let e = disc.quad[d].points.iter().map(|&x| patch.eval_direction(d, x)).collect::<Result<Vec<_>>>()?;
            evals.push(e);
        }
        let points = [&disc.quad[0].points[..], &disc.quad[1].points[..], &disc.quad[2].points[..]];
        Ok(GeometryTables {
            patch,
            evals: evals.try_into().expect("three directions"),
            points,
            modes: disc.quad_sizes().to_vec(),
        })
    }

    fn xi(&self, ix: &[usize]) -> [f64; 3] {
        [self.points[0][ix[0]], self.points[1][ix[1]], self.points[2][ix[2]]]
    }

    fn point_and_jacobian(&self, ix: &[usize]) -> ([f64; 3], nalgebra::Matrix3<f64>) {
        self.patch.point_and_jacobian_from([&self.evals[0][ix[0]], &self.evals[1][ix[1]], &self.evals[2][ix[2]]])
    }
}

fn oracle_error(ix: &[usize], e: IgaError) -> TtError {
    TtError::Oracle { index: ix.to_vec(), message: e.to_string() }
}

struct MetricOracle<'a> {
    tables: &'a GeometryTables<'a>,
    i: usize,
    j: usize,
}

impl CrossOracle for MetricOracle<'_> {
    fn mode_sizes(&self) -> &[usize] {
        &self.tables.modes
    }

    fn eval(&self, ix: &[usize]) -> ttiga_tensor::Result<f64> {
        let (_, jac) = self.tables.point_and_jacobian(ix);
        let m = self.tables.patch.metric_from_jacobian(jac, self.tables.xi(ix)).map_err(|e| oracle_error(ix, e))?;
        Ok(m.metric[(self.i, self.j)])
    }
}

struct LoadOracle<'a> {
    tables: &'a GeometryTables<'a>,
    source: &'a ScalarFn<'a>,
}

impl CrossOracle for LoadOracle<'_> {
    fn mode_sizes(&self) -> &[usize] {
        &self.tables.modes
    }

    fn eval(&self, ix: &[usize]) -> ttiga_tensor::Result<f64> {
        let (x, jac) = self.tables.point_and_jacobian(ix);
        let m = self.tables.patch.metric_from_jacobian(jac, self.tables.xi(ix)).map_err(|e| oracle_error(ix, e))?;
        Ok((self.source)(x) * m.det)
    }
}

fn cross_opts(opts: &AssemblyOptions, salt: u64, abs_tol: f64) -> CrossOptions {
    CrossOptions {
        eps: opts.eps_cross,
        rank_cap: opts.rank_cap,
        seed: opts.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(salt),
        abs_tol,
        ..Default::default()
    }
}

/// TT approximation of `R_ij` on the quadrature grid (0-based `i`, `j`).
pub fn cross_metric_coefficient(
    patch: &GeometryPatch,
    disc: &Discretization,
    i: usize,
    j: usize,
    opts: &AssemblyOptions,
) -> Result<CrossResult> {
    let tables = GeometryTables::new(patch, disc)?;
    Ok(tt_cross(&MetricOracle { tables: &tables, i, j }, &cross_opts(opts, (3 * i + j) as u64, 0.0))?)
}

/// Operator core `Σ_q G[α,q,β] w_q X[a,q] Y[b,q]` over the quadrature points of one direction.
fn contract_operator_core(g: &Core3, weights: &[f64], spans: &[usize], p: usize, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Core3 {
    let n = x.nrows();
    let (rl, nq, rr) = g.shape();
    debug_assert_eq!(nq, weights.len());
    let mut out = Core3::zeros(rl, n * n, rr);
    let gd = g.data();
    let od = out.data_mut();
    for q in 0..nq {
        let first = spans[q] - p;
        for b in first..=spans[q] {
            let yb = y[(b, q)] * weights[q];
            if yb == 0.0 {
                continue;
            }
            for a in first..=spans[q] {
                let c = x[(a, q)] * yb;
                if c == 0.0 {
                    continue;
                }
                let mode = a + n * b;
                for be in 0..rr {
                    let src = rl * (q + nq * be);
                    let dst = rl * (mode + n * n * be);
                    for al in 0..rl {
                        od[dst + al] += c * gd[src + al];
                    }
                }
            }
        }
    }
    out
}

/// `K_ij` in TT-matrix form from the TT of `R_ij`.
pub fn stiffness_term(r_ij: &TtTensor, disc: &Discretization, i: usize, j: usize) -> Result<TtMatrix> {
    let modes = disc.modes();
    let cores = (0..3)
        .map(|d| {
            let x = if d == i { &disc.derivs[d] } else { &disc.values[d] };
            let y = if d == j { &disc.derivs[d] } else { &disc.values[d] };
            contract_operator_core(r_ij.core(d), &disc.quad[d].weights, &disc.quad[d].spans, disc.degree(d), x, y)
        })
        .collect();
    Ok(TtMatrix::new(cores, modes.to_vec(), modes.to_vec())?)
}

pub struct StiffnessAssembly {
    pub k: TtMatrix,
    pub metric: Vec<CrossSummary>,
}

pub fn assemble_stiffness(patch: &GeometryPatch, disc: &Discretization, opts: &AssemblyOptions) -> Result<StiffnessAssembly> {
    let tables = GeometryTables::new(patch, disc)?;
    let diag: Vec<CrossResult> = (0..3)
        .into_par_iter()
        .map(|i| tt_cross(&MetricOracle { tables: &tables, i, j: i }, &cross_opts(opts, (4 * i) as u64, 0.0)))
        .collect::<ttiga_tensor::Result<_>>()?;
    // off-diagonal entries may vanish identically; measure them against the diagonal scale
    let scale = diag.iter().map(|r| r.value_rms).fold(0.0, f64::max);
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let off: Vec<CrossResult> = pairs
        .par_iter()
        .map(|&(i, j)| tt_cross(&MetricOracle { tables: &tables, i, j }, &cross_opts(opts, (3 * i + j) as u64, opts.eps_cross * scale)))
        .collect::<ttiga_tensor::Result<_>>()?;

    let mut metric = Vec::with_capacity(6);
    let mut terms: Vec<TtMatrix> = Vec::with_capacity(9);
    for (i, r) in diag.iter().enumerate() {
        metric.push(CrossSummary::from_result(format!("R{}{}", i + 1, i + 1), r));
        terms.push(stiffness_term(&r.tt, disc, i, i)?);
    }
    for (&(i, j), r) in pairs.iter().zip(&off) {
        metric.push(CrossSummary::from_result(format!("R{}{}", i + 1, j + 1), r));
        let kij = stiffness_term(&r.tt, disc, i, j)?;
        terms.push(kij.transpose());
        terms.push(kij);
    }
    let mut k = terms[0].round(opts.eps_round);
    for t in &terms[1..] {
        k = k.add(t)?.round(opts.eps_round);
    }
    Ok(StiffnessAssembly { k, metric })
}

pub fn assemble_load(
    patch: &GeometryPatch,
    disc: &Discretization,
    source: &ScalarFn<'_>,
    opts: &AssemblyOptions,
) -> Result<(TtTensor, CrossSummary)> {
    let tables = GeometryTables::new(patch, disc)?;
    let res = tt_cross(&LoadOracle { tables: &tables, source }, &cross_opts(opts, 97, 0.0))?;
    let summary = CrossSummary::from_result("f*detJ".into(), &res);
    let maps: Vec<DMatrix<f64>> = (0..3)
        .map(|d| {
            let mut m = disc.values[d].clone();
            for (q, w) in disc.quad[d].weights.iter().enumerate() {
                m.column_mut(q).scale_mut(*w);
            }
            m
        })
        .collect();
    let f = res.tt.map_modes(&[Some(&maps[0]), Some(&maps[1]), Some(&maps[2])])?;
    Ok((f.round(opts.eps_round), summary))
}

/// Condition on one face of the parametric box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceCondition {
    Natural,
    Dirichlet(f64),
    /// Dirichlet data taken from the configured analytic solution.
    DirichletAnalytic,
}

impl FaceCondition {
    pub fn is_dirichlet(&self) -> bool {
        !matches!(self, FaceCondition::Natural)
    }
}

/// Face conditions, keyed `xi{d}_{min,max}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    #[serde(default = "natural")]
    pub xi1_min: FaceCondition,
    #[serde(default = "natural")]
    pub xi1_max: FaceCondition,
    #[serde(default = "natural")]
    pub xi2_min: FaceCondition,
    #[serde(default = "natural")]
    pub xi2_max: FaceCondition,
    #[serde(default = "natural")]
    pub xi3_min: FaceCondition,
    #[serde(default = "natural")]
    pub xi3_max: FaceCondition,
}

fn natural() -> FaceCondition {
    FaceCondition::Natural
}

impl BoundarySpec {
    pub fn all_natural() -> Self {
        BoundarySpec {
            xi1_min: natural(),
            xi1_max: natural(),
            xi2_min: natural(),
            xi2_max: natural(),
            xi3_min: natural(),
            xi3_max: natural(),
        }
    }

    pub fn all(c: FaceCondition) -> Self {
        BoundarySpec {
            xi1_min: c.clone(),
            xi1_max: c.clone(),
            xi2_min: c.clone(),
            xi2_max: c.clone(),
            xi3_min: c.clone(),
            xi3_max: c,
        }
    }

    /// Face `(dir, side)` with `side` 0 for `ξ_dir = 0` and 1 for `ξ_dir = 1`.
    pub fn face(&self, dir: usize, side: usize) -> &FaceCondition {
        match (dir, side) {
            (0, 0) => &self.xi1_min,
            (0, _) => &self.xi1_max,
            (1, 0) => &self.xi2_min,
            (1, _) => &self.xi2_max,
            (2, 0) => &self.xi3_min,
            _ => &self.xi3_max,
        }
    }

    pub fn face_mut(&mut self, dir: usize, side: usize) -> &mut FaceCondition {
        match (dir, side) {
            (0, 0) => &mut self.xi1_min,
            (0, _) => &mut self.xi1_max,
            (1, 0) => &mut self.xi2_min,
            (1, _) => &mut self.xi2_max,
            (2, 0) => &mut self.xi3_min,
            _ => &mut self.xi3_max,
        }
    }

    pub fn has_dirichlet(&self) -> bool {
        (0..3).any(|d| (0..2).any(|s| self.face(d, s).is_dirichlet()))
    }

    /// Index range kept in each direction after removing Dirichlet faces.
    pub fn interior_ranges(&self, modes: [usize; 3]) -> [Range<usize>; 3] {
        [0, 1, 2].map(|d| {
            let lo = usize::from(self.face(d, 0).is_dirichlet());
            let hi = modes[d] - usize::from(self.face(d, 1).is_dirichlet());
            lo..hi
        })
    }
}

/// Per-direction maps from free coefficients to all coefficients (`n × n_free`):
/// Dirichlet end coefficients are dropped, and on a glued seam the last
/// coefficient is tied to the first.
pub fn reduction_maps(bc: &BoundarySpec, disc: &Discretization) -> Result<[DMatrix<f64>; 3]> {
    if !bc.has_dirichlet() {
        return Err(IgaError::SingularSystem);
    }
    let modes = disc.modes();
    let ranges = bc.interior_ranges(modes);
    let mut out = Vec::with_capacity(3);
    for d in 0..3 {
        let n = modes[d];
        if disc.periodic[d] {
            if bc.face(d, 0).is_dirichlet() || bc.face(d, 1).is_dirichlet() {
                return Err(IgaError::Config(format!("direction {} is a closed seam and cannot carry Dirichlet faces", d + 1)));
            }
            let mut e = DMatrix::zeros(n, n - 1);
            for i in 0..n - 1 {
                e[(i, i)] = 1.0;
            }
            e[(n - 1, 0)] = 1.0;
            out.push(e);
        } else {
            let r = &ranges[d];
            if r.is_empty() {
                return Err(IgaError::Config(format!("no free coefficients left in direction {}", d + 1)));
            }
            let mut e = DMatrix::zeros(n, r.len());
            for (c, i) in r.clone().enumerate() {
                e[(i, c)] = 1.0;
            }
            out.push(e);
        }
    }
    Ok(out.try_into().expect("three directions"))
}

/// Coefficients of one Dirichlet face by Greville interpolation, as a 2D array
/// over the two remaining directions (ascending order), with entries already
/// fixed by `earlier` faces zeroed.
pub fn face_coefficients(
    patch: &GeometryPatch,
    disc: &Discretization,
    dir: usize,
    side: usize,
    cond: &FaceCondition,
    boundary_fn: Option<&ScalarFn<'_>>,
    earlier: &[(usize, usize)],
) -> Result<DMatrix<f64>> {
    let (a, b) = match dir {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let modes = disc.modes();
    let mut c = match cond {
        FaceCondition::Natural => return Ok(DMatrix::zeros(modes[a], modes[b])),
        FaceCondition::Dirichlet(v) => DMatrix::from_element(modes[a], modes[b], *v),
        FaceCondition::DirichletAnalytic => {
            let f = boundary_fn.ok_or_else(|| IgaError::Config("analytic Dirichlet data requires an analytic solution".into()))?;
            let (ga, ma) = disc.greville_matrix(a)?;
            let (gb, mb) = disc.greville_matrix(b)?;
            let mut vals = DMatrix::zeros(modes[a], modes[b]);
            for (j, &xb) in gb.iter().enumerate() {
                for (i, &xa) in ga.iter().enumerate() {
                    let mut xi = [0.0; 3];
                    xi[dir] = side as f64;
                    xi[a] = xa;
                    xi[b] = xb;
                    vals[(i, j)] = f(patch.eval_point(xi)?);
                }
            }
            // C = Ma^{-1} V Mb^{-T}
            let la = ma.lu();
            let tmp = la.solve(&vals).ok_or_else(|| IgaError::Config("singular Greville system".into()))?;
            let lb = mb.lu();
            let ct = lb.solve(&tmp.transpose()).ok_or_else(|| IgaError::Config("singular Greville system".into()))?;
            ct.transpose()
        }
    };
    for &(d2, s2) in earlier {
        let idx = if s2 == 0 { 0 } else { modes[d2] - 1 };
        if d2 == a {
            c.row_mut(idx).fill(0.0);
        } else if d2 == b {
            c.column_mut(idx).fill(0.0);
        }
    }
    Ok(c)
}

/// TT of the Dirichlet lift: boundary coefficients, zero in the interior.
pub fn build_lift(
    patch: &GeometryPatch,
    disc: &Discretization,
    bc: &BoundarySpec,
    boundary_fn: Option<&ScalarFn<'_>>,
    eps: f64,
) -> Result<TtTensor> {
    let modes = disc.modes();
    let mut lift = TtTensor::zeros(&modes);
    let mut done: Vec<(usize, usize)> = Vec::new();
    for dir in 0..3 {
        for side in 0..2 {
            let cond = bc.face(dir, side);
            if !cond.is_dirichlet() {
                continue;
            }
            let c = face_coefficients(patch, disc, dir, side, cond, boundary_fn, &done)?;
            done.push((dir, side));
            if c.iter().all(|v| *v == 0.0) {
                continue;
            }
            let face = TtTensor::from_full(&row_major(&c), &[c.nrows(), c.ncols()], eps * 0.1)?;
            let mut unit = vec![0.0; modes[dir]];
            unit[if side == 0 { 0 } else { modes[dir] - 1 }] = 1.0;
            let term = insert_unit_mode(&face, dir, &unit)?;
            lift = lift.add(&term)?.round(eps * 0.1);
        }
    }
    Ok(lift)
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// Inserts a rank-1 mode `unit` at position `dir` into a 2D TT.
fn insert_unit_mode(face: &TtTensor, dir: usize, unit: &[f64]) -> Result<TtTensor> {
    let c0 = face.core(0).clone();
    let c1 = face.core(1).clone();
    let n = unit.len();
    let cores = match dir {
        0 => vec![Core3::from_fn(1, n, 1, |_, i, _| unit[i]), c0, c1],
        1 => {
            let r = c0.right();
            let mid = Core3::from_fn(r, n, r, |a, i, b| if a == b { unit[i] } else { 0.0 });
            vec![c0, mid, c1]
        }
        _ => vec![c0, c1, Core3::from_fn(1, n, 1, |_, i, _| unit[i])],
    };
    Ok(TtTensor::new(cores)?)
}

/// System over the free coefficients.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub k_int: TtMatrix,
    pub f_int: TtTensor,
    pub lift: TtTensor,
    /// Free-to-full coefficient maps per direction.
    pub maps: [DMatrix<f64>; 3],
    pub eps_round: f64,
}

impl AssembledSystem {
    pub fn interior_modes(&self) -> [usize; 3] {
        [self.maps[0].ncols(), self.maps[1].ncols(), self.maps[2].ncols()]
    }

    /// Full coefficient field `E u_free + lift`.
    pub fn expand(&self, u_free: &TtTensor) -> Result<TtTensor> {
        let u = u_free.map_modes(&[Some(&self.maps[0]), Some(&self.maps[1]), Some(&self.maps[2])])?;
        Ok(u.add(&self.lift)?.round(self.eps_round))
    }
}

pub fn apply_dirichlet(
    k: &TtMatrix,
    f: &TtTensor,
    bc: &BoundarySpec,
    patch: &GeometryPatch,
    disc: &Discretization,
    boundary_fn: Option<&ScalarFn<'_>>,
    eps_round: f64,
) -> Result<AssembledSystem> {
    let maps = reduction_maps(bc, disc)?;
    let lift = build_lift(patch, disc, bc, boundary_fn, eps_round)?;
    let et: Vec<DMatrix<f64>> = maps.iter().map(|m| m.transpose()).collect();
    let et_refs = [Some(&et[0]), Some(&et[1]), Some(&et[2])];
    let k_int = k.map_modes(&et_refs, &et_refs)?;
    let rhs = if lift.norm() == 0.0 {
        f.clone()
    } else {
        let kl = k.matvec(&lift)?.round(eps_round * 0.1);
        f.sub(&kl)?.round(eps_round * 0.1)
    };
    let f_int = rhs.map_modes(&et_refs)?;
    Ok(AssembledSystem { k_int, f_int, lift, maps, eps_round })
}
