//! Solution spaces and tensor-product Gauss–Legendre quadrature.

use nalgebra::DMatrix;

use crate::error::{IgaError, Result};
use crate::geometry::GeometryPatch;
use crate::splines::{Basis1D, KnotVector};

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton iteration on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Quadrature in one parametric direction, concatenated over the nonempty spans.
#[derive(Clone, Debug)]
pub struct DirectionQuadrature {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Knot-span index of each point.
    pub spans: Vec<usize>,
    pub per_span: usize,
}

pub fn span_quadrature(kv: &KnotVector, n_gauss: usize) -> DirectionQuadrature {
    let (gx, gw) = gauss_legendre(n_gauss);
    let u = kv.knots();
    let mut out = DirectionQuadrature { points: Vec::new(), weights: Vec::new(), spans: Vec::new(), per_span: n_gauss };
    for s in kv.degree()..kv.len() {
        let (a, b) = (u[s], u[s + 1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        for (x, w) in gx.iter().zip(&gw) {
            out.points.push(a + half * (x + 1.0));
            out.weights.push(half * w);
            out.spans.push(s);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct Discretization {
    pub bases: [Basis1D; 3],
    pub quad: [DirectionQuadrature; 3],
    /// Basis values, `n_d × q_d`.
    pub values: [DMatrix<f64>; 3],
    /// Basis first derivatives, `n_d × q_d`.
    pub derivs: [DMatrix<f64>; 3],
    pub n_gauss: [usize; 3],
    /// Directions whose end faces are glued (closed seams of the geometry).
    pub periodic: [bool; 3],
}

fn table(basis: &Basis1D, points: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = basis.len();
    let mut v = DMatrix::zeros(n, points.len());
    let mut d = DMatrix::zeros(n, points.len());
    for (q, &xi) in points.iter().enumerate() {
        let e = basis.eval(xi)?;
        let f = e.first_index();
        for k in 0..e.values.len() {
            v[(f + k, q)] = e.values[k];
            d[(f + k, q)] = e.derivs[k];
        }
    }
    Ok((v, d))
}

pub fn build_quadrature(bases: [Basis1D; 3], n_gauss: [usize; 3]) -> Result<Discretization> {
    for (d, b) in bases.iter().enumerate() {
        if b.weights.is_some() {
            return Err(IgaError::Config(format!("solution basis {d} must be polynomial")));
        }
        if n_gauss[d] == 0 {
            return Err(IgaError::Config("need at least one Gauss point per span".into()));
        }
    }
    let quad = [0, 1, 2].map(|d| span_quadrature(&bases[d].knot_vector, n_gauss[d]));
    let mut values = Vec::with_capacity(3);
    let mut derivs = Vec::with_capacity(3);
    for d in 0..3 {
        let (v, dd) = table(&bases[d], &quad[d].points)?;
        values.push(v);
        derivs.push(dd);
    }
    let values: [DMatrix<f64>; 3] = values.try_into().expect("three directions");
    let derivs: [DMatrix<f64>; 3] = derivs.try_into().expect("three directions");
    Ok(Discretization { bases, quad, values, derivs, n_gauss, periodic: [false; 3] })
}

impl Discretization {
    /// Uniform spaces of the given degrees and element counts on a patch.
    /// Solution breakpoints must contain the geometry breakpoints so that every
    /// quadrature cell sees a smooth geometry. Where the map itself is only C⁰
    /// (a jump in the Jacobian) the solution knot is repeated `p` times so the
    /// space can follow the kink.
    pub fn for_patch(patch: &GeometryPatch, degree: [usize; 3], elements: [usize; 3], n_gauss: Option<[usize; 3]>) -> Result<Self> {
        let mut bases = Vec::with_capacity(3);
        for d in 0..3 {
            if degree[d] == 0 {
                return Err(IgaError::Config("degree must be at least 1".into()));
            }
            let kv = KnotVector::open_uniform(degree[d], elements[d])?;
            let sol = kv.breakpoints();
            let mut knots = kv.knots().to_vec();
            for g in patch.breakpoints(d) {
                let Some(&s) = sol.iter().find(|s| (*s - g).abs() < 1e-12) else {
                    return Err(IgaError::Config(format!(
                        "{} elements in direction {} do not align with the geometry breakpoint {g} of {}",
                        elements[d],
                        d + 1,
                        patch.kind
                    )));
                };
                if s > 0.0 && s < 1.0 && degree[d] > 1 && jacobian_jumps(patch, d, s)? {
                    knots.extend(std::iter::repeat(s).take(degree[d] - 1));
                }
            }
            knots.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
            bases.push(Basis1D::bspline(KnotVector::new(knots, degree[d])?));
        }
        let bases: [Basis1D; 3] = bases.try_into().expect("three directions");
        let ng = n_gauss.unwrap_or([degree[0] + 1, degree[1] + 1, degree[2] + 1]);
        let mut disc = build_quadrature(bases, ng)?;
        disc.periodic = patch.periodic;
        Ok(disc)
    }

    pub fn modes(&self) -> [usize; 3] {
        [self.bases[0].len(), self.bases[1].len(), self.bases[2].len()]
    }

    pub fn quad_sizes(&self) -> [usize; 3] {
        [self.quad[0].points.len(), self.quad[1].points.len(), self.quad[2].points.len()]
    }

    pub fn dofs(&self) -> usize {
        self.modes().iter().product()
    }

    pub fn degree(&self, d: usize) -> usize {
        self.bases[d].degree()
    }

    /// Interpolation matrix `G[i, j] = N_j(greville_i)`.
    pub fn greville_matrix(&self, d: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let g = self.bases[d].knot_vector.greville();
        let (v, _) = table(&self.bases[d], &g)?;
        Ok((g, v.transpose()))
    }
}

/// Whether the geometry Jacobian is discontinuous across `ξ_d = s`.
fn jacobian_jumps(patch: &GeometryPatch, d: usize, s: f64) -> Result<bool> {
    let h = 1e-7;
    for a in [0.25, 0.5, 0.75] {
        for b in [0.25, 0.5, 0.75] {
            let mut lo = [a, a, a];
            let others: Vec<usize> = (0..3).filter(|&k| k != d).collect();
            lo[others[0]] = a;
            lo[others[1]] = b;
            let mut hi = lo;
            lo[d] = s - h;
            hi[d] = s + h;
            let (jl, jh) = (patch.eval_jacobian(lo)?, patch.eval_jacobian(hi)?);
            if (jl - jh).norm() > 1e-4 * jl.norm() {
                return Ok(true);
            }
        }
    }
    Ok(false)
}
