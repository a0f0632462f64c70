//! Exact NURBS volume maps for the benchmark solids.
//!
//! Every patch is a trivariate tensor product on `[0, 1]^3`. Circular sections
//! are rational quadratic arcs, so radii are reproduced to round-off. By
//! convention `ξ1` runs through the wall thickness (or the fold of the
//! L-shape), `ξ2` around closed circles, and `ξ3` along the remaining axis.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{IgaError, Result};
use crate::splines::{insert_knot_raw, Basis1D, BasisEval, KnotVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Lshape,
    Ring,
    ClosedHemisphere,
    OpenedHemisphere,
    Hyperboloid,
    QuarterTorus,
    UnitCube,
}

impl GeometryKind {
    pub const ALL: [GeometryKind; 7] = [
        GeometryKind::Lshape,
        GeometryKind::Ring,
        GeometryKind::ClosedHemisphere,
        GeometryKind::OpenedHemisphere,
        GeometryKind::Hyperboloid,
        GeometryKind::QuarterTorus,
        GeometryKind::UnitCube,
    ];

    /// The six benchmark solids (everything except the unit-cube fixture).
    pub const BENCHMARK: [GeometryKind; 6] = [
        GeometryKind::ClosedHemisphere,
        GeometryKind::OpenedHemisphere,
        GeometryKind::Ring,
        GeometryKind::Lshape,
        GeometryKind::Hyperboloid,
        GeometryKind::QuarterTorus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GeometryKind::Lshape => "lshape",
            GeometryKind::Ring => "ring",
            GeometryKind::ClosedHemisphere => "closed_hemisphere",
            GeometryKind::OpenedHemisphere => "opened_hemisphere",
            GeometryKind::Hyperboloid => "hyperboloid",
            GeometryKind::QuarterTorus => "quarter_torus",
            GeometryKind::UnitCube => "unit_cube",
        }
    }

    /// Parameter names and default values.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            GeometryKind::Lshape => &[("height", 1.0)],
            GeometryKind::Ring => &[("r_in", 0.5), ("r_out", 1.0), ("h", 1.0)],
            GeometryKind::ClosedHemisphere => &[("r_in", 0.5), ("r_out", 1.0)],
            GeometryKind::OpenedHemisphere => &[("r_in", 0.5), ("r_out", 1.0), ("hole_deg", 18.0)],
            GeometryKind::Hyperboloid => &[("r_middle", 0.5), ("r_top", 1.0), ("thickness", 0.3), ("half_height", 1.0)],
            GeometryKind::QuarterTorus => &[("r_in", 0.5), ("r_out", 1.0), ("major_radius", 3.0)],
            GeometryKind::UnitCube => &[("scale", 1.0)],
        }
    }
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeometryKind {
    type Err = IgaError;
    fn from_str(s: &str) -> Result<Self> {
        GeometryKind::ALL
            .iter()
            .copied()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| IgaError::Config(format!("unknown geometry '{s}'")))
    }
}

/// Jacobian, its determinant and the metric `R = J^{-1} J^{-T} det J`.
#[derive(Clone, Copy, Debug)]
pub struct MetricSample {
    pub jacobian: Matrix3<f64>,
    pub det: f64,
    pub metric: Matrix3<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeometryPatch {
    pub kind: GeometryKind,
    pub params: BTreeMap<String, f64>,
    /// Polynomial bases per direction; rational weights live on the 3D grid.
    pub bases: [Basis1D; 3],
    pub shape: [usize; 3],
    /// Control grid, first index fastest: `i1 + n1*(i2 + n2*i3)`.
    pub control_points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Directions whose two end faces coincide physically (closed circles).
    pub periodic: [bool; 3],
    /// The map degenerates on part of the boundary (e.g. a pole).
    pub degenerate_boundary: bool,
    pub description: String,
}

impl GeometryPatch {
    pub fn new(
        kind: GeometryKind,
        params: BTreeMap<String, f64>,
        knots: [KnotVector; 3],
        control_points: Vec<[f64; 3]>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let shape = [knots[0].len(), knots[1].len(), knots[2].len()];
        let count = shape.iter().product::<usize>();
        if control_points.len() != count || weights.len() != count {
            return Err(IgaError::Construction(format!(
                "grid {shape:?} needs {count} points and weights, got {} and {}",
                control_points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(IgaError::Construction("weights must be strictly positive".into()));
        }
        let bases = knots.map(Basis1D::bspline);
        Ok(GeometryPatch {
            kind,
            params,
            bases,
            shape,
            control_points,
            weights,
            periodic: [false; 3],
            degenerate_boundary: false,
            description: String::new(),
        })
    }

    #[inline]
    pub fn flat(&self, i1: usize, i2: usize, i3: usize) -> usize {
        i1 + self.shape[0] * (i2 + self.shape[1] * i3)
    }

    pub fn knot_vector(&self, dir: usize) -> &KnotVector {
        &self.bases[dir].knot_vector
    }

    pub fn breakpoints(&self, dir: usize) -> Vec<f64> {
        self.knot_vector(dir).breakpoints()
    }

    /// Diagonal of the control-point bounding box (the image lies inside it).
    pub fn scale(&self) -> f64 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.control_points {
            for c in 0..3 {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        (0..3).map(|c| (hi[c] - lo[c]).powi(2)).sum::<f64>().sqrt()
    }

    /// Per-direction basis evaluation, reusable across many points.
    pub fn eval_direction(&self, dir: usize, xi: f64) -> Result<BasisEval> {
        self.bases[dir].eval(xi)
    }

    /// Point and Jacobian (`J[r][c] = ∂x_r/∂ξ_c`) from precomputed directional evaluations.
    pub fn point_and_jacobian_from(&self, e: [&BasisEval; 3]) -> ([f64; 3], Matrix3<f64>) {
        let f = [e[0].first_index(), e[1].first_index(), e[2].first_index()];
        let mut s = [0.0; 3];
        let mut w = 0.0;
        let mut ds = [[0.0; 3]; 3]; // ds[c][r]
        let mut dw = [0.0; 3];
        for (k3, (v3, d3)) in e[2].values.iter().zip(&e[2].derivs).enumerate() {
            for (k2, (v2, d2)) in e[1].values.iter().zip(&e[1].derivs).enumerate() {
                for (k1, (v1, d1)) in e[0].values.iter().zip(&e[0].derivs).enumerate() {
                    let idx = self.flat(f[0] + k1, f[1] + k2, f[2] + k3);
                    let wt = self.weights[idx];
                    let p = &self.control_points[idx];
                    let n = v1 * v2 * v3 * wt;
                    let dn = [d1 * v2 * v3 * wt, v1 * d2 * v3 * wt, v1 * v2 * d3 * wt];
                    w += n;
                    for c in 0..3 {
                        dw[c] += dn[c];
                        for r in 0..3 {
                            ds[c][r] += dn[c] * p[r];
                        }
                    }
                    for r in 0..3 {
                        s[r] += n * p[r];
                    }
                }
            }
        }
        let x = [s[0] / w, s[1] / w, s[2] / w];
        let jac = Matrix3::from_fn(|r, c| (ds[c][r] - x[r] * dw[c]) / w);
        (x, jac)
    }

    fn evals(&self, xi: [f64; 3]) -> Result<[BasisEval; 3]> {
        Ok([self.eval_direction(0, xi[0])?, self.eval_direction(1, xi[1])?, self.eval_direction(2, xi[2])?])
    }

    pub fn eval_point(&self, xi: [f64; 3]) -> Result<[f64; 3]> {
        let e = self.evals(xi)?;
        Ok(self.point_and_jacobian_from([&e[0], &e[1], &e[2]]).0)
    }

    pub fn eval_jacobian(&self, xi: [f64; 3]) -> Result<Matrix3<f64>> {
        let e = self.evals(xi)?;
        Ok(self.point_and_jacobian_from([&e[0], &e[1], &e[2]]).1)
    }

    pub fn metric_from_jacobian(&self, jacobian: Matrix3<f64>, xi: [f64; 3]) -> Result<MetricSample> {
        let det = jacobian.determinant();
        let threshold = 1e-12 * self.scale().powi(3);
        if !(det.abs() >= threshold) {
            return Err(IgaError::SingularMap { xi, det });
        }
        let inv = jacobian.try_inverse().ok_or(IgaError::SingularMap { xi, det })?;
        let r = inv * inv.transpose() * det;
        let metric = (r + r.transpose()) * 0.5;
        Ok(MetricSample { jacobian, det, metric })
    }

    pub fn eval_metric(&self, xi: [f64; 3]) -> Result<MetricSample> {
        let jac = self.eval_jacobian(xi)?;
        self.metric_from_jacobian(jac, xi)
    }

    /// Geometry-preserving knot insertion in direction `dir`.
    pub fn insert_knot(&self, dir: usize, xi: f64) -> Result<GeometryPatch> {
        let n = self.shape;
        let mut new_kv = None;
        let mut lines: Vec<Vec<Vec<f64>>> = Vec::new();
        let (oa, ob) = match dir {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for b in 0..n[ob] {
            for a in 0..n[oa] {
                let pts: Vec<Vec<f64>> = (0..n[dir])
                    .map(|t| {
                        let mut ix = [0; 3];
                        ix[dir] = t;
                        ix[oa] = a;
                        ix[ob] = b;
                        let idx = self.flat(ix[0], ix[1], ix[2]);
                        let w = self.weights[idx];
                        let p = self.control_points[idx];
                        vec![w * p[0], w * p[1], w * p[2], w]
                    })
                    .collect();
                let (kv, out) = insert_knot_raw(self.knot_vector(dir), &pts, xi)?;
                new_kv = Some(kv);
                lines.push(out);
            }
        }
        let kv = new_kv.expect("nonempty grid");
        let mut shape = n;
        shape[dir] += 1;
        let count = shape.iter().product::<usize>();
        let mut cps = vec![[0.0; 3]; count];
        let mut ws = vec![0.0; count];
        let mut line = 0;
        for b in 0..n[ob] {
            for a in 0..n[oa] {
                for (t, h) in lines[line].iter().enumerate() {
                    let mut ix = [0; 3];
                    ix[dir] = t;
                    ix[oa] = a;
                    ix[ob] = b;
                    let idx = ix[0] + shape[0] * (ix[1] + shape[1] * ix[2]);
                    ws[idx] = h[3];
                    cps[idx] = [h[0] / h[3], h[1] / h[3], h[2] / h[3]];
                }
                line += 1;
            }
        }
        let mut bases = self.bases.clone();
        bases[dir] = Basis1D::bspline(kv);
        Ok(GeometryPatch {
            kind: self.kind,
            params: self.params.clone(),
            bases,
            shape,
            control_points: cps,
            weights: ws,
            periodic: self.periodic,
            degenerate_boundary: self.degenerate_boundary,
            description: self.description.clone(),
        })
    }

    /// Reverses the parametric direction `dir`.
    fn reverse(&mut self, dir: usize) {
        let n = self.shape;
        let mut cps = self.control_points.clone();
        let mut ws = self.weights.clone();
        for i3 in 0..n[2] {
            for i2 in 0..n[1] {
                for i1 in 0..n[0] {
                    let mut ix = [i1, i2, i3];
                    ix[dir] = n[dir] - 1 - ix[dir];
                    let src = self.flat(ix[0], ix[1], ix[2]);
                    let dst = self.flat(i1, i2, i3);
                    cps[dst] = self.control_points[src];
                    ws[dst] = self.weights[src];
                }
            }
        }
        let kv = self.knot_vector(dir);
        let knots: Vec<f64> = kv.knots().iter().rev().map(|k| 1.0 - k).collect();
        self.bases[dir] = Basis1D::bspline(KnotVector::new(knots, kv.degree()).expect("reversed knots"));
        self.control_points = cps;
        self.weights = ws;
    }

    /// Makes `det J > 0`, flipping `ξ2` if needed; errors when the sign is mixed.
    fn orient(&mut self) -> Result<()> {
        let samples = [0.2, 0.5, 0.8];
        let mut pos = 0;
        let mut neg = 0;
        for &a in &samples {
            for &b in &samples {
                for &c in &samples {
                    let d = self.eval_jacobian([a, b, c])?.determinant();
                    if d > 0.0 {
                        pos += 1;
                    } else if d < 0.0 {
                        neg += 1;
                    }
                }
            }
        }
        match (pos, neg) {
            (_, 0) if pos > 0 => Ok(()),
            (0, _) => {
                self.reverse(1);
                Ok(())
            }
            _ => Err(IgaError::Construction(format!("Jacobian changes sign ({pos} positive, {neg} negative samples)"))),
        }
    }
}

/// Quadratic rational arc of the unit circle from `t0` to `t1` (radians, span < π).
fn arc(t0: f64, t1: f64) -> (Vec<[f64; 2]>, Vec<f64>) {
    let half = 0.5 * (t1 - t0);
    let mid = 0.5 * (t0 + t1);
    let c = half.cos();
    (vec![[t0.cos(), t0.sin()], [mid.cos() / c, mid.sin() / c], [t1.cos(), t1.sin()]], vec![1.0, c, 1.0])
}

fn full_circle() -> (KnotVector, Vec<[f64; 2]>, Vec<f64>) {
    let kv = KnotVector::new(vec![0.0, 0.0, 0.0, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 1.0, 1.0, 1.0], 2).expect("circle");
    let h = FRAC_1_SQRT_2;
    let pts = vec![
        [1.0, 0.0],
        [1.0, 1.0],
        [0.0, 1.0],
        [-1.0, 1.0],
        [-1.0, 0.0],
        [-1.0, -1.0],
        [0.0, -1.0],
        [1.0, -1.0],
        [1.0, 0.0],
    ];
    (kv, pts, vec![1.0, h, 1.0, h, 1.0, h, 1.0, h, 1.0])
}

fn linear() -> KnotVector {
    KnotVector::new(vec![0.0, 0.0, 1.0, 1.0], 1).expect("linear")
}

fn quadratic_single() -> KnotVector {
    KnotVector::new(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0], 2).expect("quadratic")
}

fn resolve_params(kind: GeometryKind, given: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    let defaults = kind.defaults();
    for key in given.keys() {
        if !defaults.iter().any(|(k, _)| k == key) {
            return Err(IgaError::Config(format!("unknown parameter '{key}' for geometry {kind}")));
        }
    }
    let mut out = BTreeMap::new();
    for (k, v) in defaults {
        let value = given.get(*k).copied().unwrap_or(*v);
        if !value.is_finite() {
            return Err(IgaError::Config(format!("parameter {k} must be finite")));
        }
        out.insert(k.to_string(), value);
    }
    Ok(out)
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(IgaError::Construction(msg.to_string()))
    }
}

/// Builds a grid from a per-control-point function.
fn build(
    kind: GeometryKind,
    params: BTreeMap<String, f64>,
    knots: [KnotVector; 3],
    f: impl Fn(usize, usize, usize) -> ([f64; 3], f64),
) -> Result<GeometryPatch> {
    let shape = [knots[0].len(), knots[1].len(), knots[2].len()];
    let mut cps = Vec::with_capacity(shape.iter().product());
    let mut ws = Vec::with_capacity(cps.capacity());
    for i3 in 0..shape[2] {
        for i2 in 0..shape[1] {
            for i1 in 0..shape[0] {
                let (p, w) = f(i1, i2, i3);
                cps.push(p);
                ws.push(w);
            }
        }
    }
    GeometryPatch::new(kind, params, knots, cps, ws)
}

pub fn make_geometry(kind: GeometryKind, params: &BTreeMap<String, f64>) -> Result<GeometryPatch> {
    let prm = resolve_params(kind, params)?;
    let g = |k: &str| prm[k];
    let mut patch = match kind {
        GeometryKind::UnitCube => {
            let s = g("scale");
            require(s > 0.0, "scale must be positive")?;
            let mut p = build(kind, prm.clone(), [linear(), linear(), linear()], |a, b, c| {
                ([s * a as f64, s * b as f64, s * c as f64], 1.0)
            })?;
            p.description = "trilinear box [0,s]^3".into();
            p
        }
        GeometryKind::Ring => {
            let (r_in, r_out, h) = (g("r_in"), g("r_out"), g("h"));
            require(0.0 < r_in && r_in < r_out, "need 0 < r_in < r_out")?;
            require(h > 0.0, "height must be positive")?;
            let (ckv, cpts, cw) = full_circle();
            let radii = [r_in, r_out];
            let mut p = build(kind, prm.clone(), [linear(), ckv, linear()], |a, b, c| {
                let r = radii[a];
                ([r * cpts[b][0], r * cpts[b][1], h * c as f64], cw[b])
            })?;
            p.periodic = [false, true, false];
            p.description = "xi1 radial (linear), xi2 full circle (quadratic NURBS), xi3 height (linear)".into();
            p
        }
        GeometryKind::ClosedHemisphere | GeometryKind::OpenedHemisphere => {
            let (r_in, r_out) = (g("r_in"), g("r_out"));
            require(0.0 < r_in && r_in < r_out, "need 0 < r_in < r_out")?;
            let top = if kind == GeometryKind::OpenedHemisphere {
                let hole = g("hole_deg");
                require(hole > 0.0 && hole < 90.0, "hole_deg must lie in (0, 90)")?;
                (90.0 - hole).to_radians()
            } else {
                0.5 * PI
            };
            let (ppts, pw) = arc(0.0, top);
            let (ckv, cpts, cw) = full_circle();
            let radii = [r_in, r_out];
            let mut p = build(kind, prm.clone(), [linear(), ckv, quadratic_single()], |a, b, c| {
                let r = radii[a];
                let (rho, z) = (ppts[c][0], ppts[c][1]);
                ([r * rho * cpts[b][0], r * rho * cpts[b][1], r * z], cw[b] * pw[c])
            })?;
            p.periodic = [false, true, false];
            if kind == GeometryKind::ClosedHemisphere {
                p.degenerate_boundary = true;
                p.description = "xi1 radial (linear), xi2 azimuth (full circle), xi3 elevation 0..90 deg (one quadratic arc); \
                                 the xi3 = 1 face collapses onto the pole"
                    .into();
            } else {
                p.description = format!(
                    "xi1 radial (linear), xi2 azimuth (full circle), xi3 elevation 0..{:.1} deg (one quadratic arc)",
                    top.to_degrees()
                );
            }
            p
        }
        GeometryKind::Hyperboloid => {
            let (a, b, t, hh) = (g("r_middle"), g("r_top"), g("thickness"), g("half_height"));
            require(0.0 < a && a < b, "need 0 < r_middle < r_top")?;
            require(t > 0.0 && hh > 0.0, "thickness and half_height must be positive")?;
            // one-sheet hyperbola through (a, 0) and (b, ±hh) as a rational quadratic
            let prof = [[b, -hh], [a * a / b, 0.0], [b, hh]];
            let pw = [1.0, b / a, 1.0];
            let (ckv, cpts, cw) = full_circle();
            let offs = [0.0, t];
            let mut p = build(kind, prm.clone(), [linear(), ckv, quadratic_single()], |i, j, k| {
                let rho = prof[k][0] + offs[i];
                ([rho * cpts[j][0], rho * cpts[j][1], prof[k][1]], cw[j] * pw[k])
            })?;
            p.periodic = [false, true, false];
            p.description = "xi1 wall thickness (inner hyperbola offset radially), xi2 full circle, \
                             xi3 height profile (rational quadratic hyperbola)"
                .into();
            p
        }
        GeometryKind::QuarterTorus => {
            let (r_in, r_out, big) = (g("r_in"), g("r_out"), g("major_radius"));
            require(0.0 < r_in && r_in < r_out, "need 0 < r_in < r_out")?;
            require(big > r_out, "major_radius must exceed r_out")?;
            let (ckv, cpts, cw) = full_circle();
            let (tpts, tw) = arc(0.0, 0.5 * PI);
            let radii = [r_in, r_out];
            let mut p = build(kind, prm.clone(), [linear(), ckv, quadratic_single()], |i, j, k| {
                let r = radii[i];
                let rr = big + r * cpts[j][0];
                ([rr * tpts[k][0], rr * tpts[k][1], r * cpts[j][1]], cw[j] * tw[k])
            })?;
            p.periodic = [false, true, false];
            p.description = "xi1 tube radius (linear), xi2 poloidal circle, xi3 toroidal quarter arc".into();
            p
        }
        GeometryKind::Lshape => {
            let h = g("height");
            require(h > 0.0, "height must be positive")?;
            let fold = KnotVector::new(vec![0.0, 0.0, 0.5, 1.0, 1.0], 1)?;
            let inner = [[0.0, 1.0], [0.0, 0.0], [1.0, 0.0]];
            let outer = [[-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]];
            let mut p = build(kind, prm.clone(), [fold, linear(), linear()], |i, j, k| {
                let q = if j == 0 { inner[i] } else { outer[i] };
                ([q[0], q[1], h * k as f64], 1.0)
            })?;
            p.description = "xi1 folds along the re-entrant corner (C0 knot at 0.5), xi2 from the re-entrant \
                             edges to the outer boundary, xi3 height"
                .into();
            p
        }
    };
    patch.orient()?;
    Ok(patch)
}

/// Distance from the z axis.
pub fn axial_radius(p: [f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

/// Distance from the toroidal centerline circle of radius `big` in the xy-plane.
pub fn tube_radius(p: [f64; 3], big: f64) -> f64 {
    let rho = axial_radius(p);
    ((rho - big).powi(2) + p[2] * p[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn make(kind: GeometryKind) -> GeometryPatch {
        make_geometry(kind, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn unit_cube_is_identity() {
        let p = make(GeometryKind::UnitCube);
        let x = p.eval_point([0.3, 0.7, 0.1]).unwrap();
        for (a, b) in x.iter().zip([0.3, 0.7, 0.1]) {
            assert!((a - b).abs() < 1e-15);
        }
        let m = p.eval_metric([0.2, 0.4, 0.9]).unwrap();
        assert!((m.det - 1.0).abs() < 1e-14);
        assert!((m.metric - Matrix3::identity()).norm() < 1e-14);
    }

    #[test]
    fn scaled_cube_metric() {
        let mut prm = BTreeMap::new();
        prm.insert("scale".to_string(), 2.0);
        let p = make_geometry(GeometryKind::UnitCube, &prm).unwrap();
        let m = p.eval_metric([0.5, 0.5, 0.5]).unwrap();
        assert!((m.det - 8.0).abs() < 1e-13);
        assert!((m.metric - Matrix3::identity() * 2.0).norm() < 1e-13);
    }

    #[test]
    fn every_geometry_is_positively_oriented() {
        for kind in GeometryKind::ALL {
            let p = make(kind);
            for &a in &[0.1, 0.5, 0.9] {
                for &b in &[0.05, 0.4, 0.95] {
                    for &c in &[0.1, 0.6, 0.9] {
                        assert!(p.eval_jacobian([a, b, c]).unwrap().determinant() > 0.0, "{kind} at {a},{b},{c}");
                    }
                }
            }
        }
    }

    #[test]
    fn corners_map_to_control_corners() {
        for kind in GeometryKind::ALL {
            let p = make(kind);
            let n = p.shape;
            let x = p.eval_point([1.0, 1.0, 1.0]).unwrap();
            let c = p.control_points[p.flat(n[0] - 1, n[1] - 1, n[2] - 1)];
            for k in 0..3 {
                assert!((x[k] - c[k]).abs() < 1e-12, "{kind}");
            }
        }
    }

    #[test]
    fn unknown_parameter_rejected() {
        let mut prm = BTreeMap::new();
        prm.insert("radius".to_string(), 1.0);
        assert!(make_geometry(GeometryKind::Ring, &prm).is_err());
        let mut prm = BTreeMap::new();
        prm.insert("r_in".to_string(), 2.0);
        assert!(make_geometry(GeometryKind::Ring, &prm).is_err());
    }

    #[test]
    fn pole_is_singular() {
        let p = make(GeometryKind::ClosedHemisphere);
        assert!(p.degenerate_boundary);
        assert!(matches!(p.eval_metric([0.5, 0.3, 1.0]), Err(IgaError::SingularMap { .. })));
    }
}
