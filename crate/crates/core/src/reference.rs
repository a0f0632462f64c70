//! Classical element-loop IGA on the full coefficient grid: sparse assembly
//! with the same quadrature, and a Jacobi-preconditioned CG solve. Serves as
//! the oracle for the TT pipeline and as the baseline for timing comparisons.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::assembly::{reduction_maps, BoundarySpec, ScalarFn};
use crate::discretization::Discretization;
use crate::error::{IgaError, Result};
use crate::geometry::GeometryPatch;

/// Largest coefficient count the oracle accepts.
pub const DOF_GUARD: usize = 1_000_000;

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from unsorted triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.par_sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry") += v;
            } else {
                indices.push(c as u32);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix { nrows, ncols, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .into_par_iter()
            .map(|r| (self.indptr[r]..self.indptr[r + 1]).map(|k| self.values[k] * x[self.indices[k] as usize]).sum())
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| (self.indptr[r]..self.indptr[r + 1]).find(|&k| self.indices[k] as usize == r).map_or(0.0, |k| self.values[k]))
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                m[(r, self.indices[k] as usize)] += self.values[k];
            }
        }
        m
    }

    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Lexicographic flat index (first direction slowest), matching dense TT order.
#[inline]
pub fn lex(ix: [usize; 3], n: [usize; 3]) -> usize {
    (ix[0] * n[1] + ix[1]) * n[2] + ix[2]
}

/// CSR pattern of the tensor-product stencil: coefficients couple when every
/// per-direction index differs by at most the degree.
fn stencil_pattern(n: [usize; 3], p: [usize; 3]) -> (Vec<usize>, Vec<u32>) {
    let range = |i: usize, d: usize| (i.saturating_sub(p[d]), (i + p[d]).min(n[d] - 1));
    let rows = n[0] * n[1] * n[2];
    let mut indptr = Vec::with_capacity(rows + 1);
    indptr.push(0);
    let mut indices = Vec::new();
    for i1 in 0..n[0] {
        let (a1, b1) = range(i1, 0);
        for i2 in 0..n[1] {
            let (a2, b2) = range(i2, 1);
            for i3 in 0..n[2] {
                let (a3, b3) = range(i3, 2);
                for j1 in a1..=b1 {
                    for j2 in a2..=b2 {
                        for j3 in a3..=b3 {
                            indices.push(lex([j1, j2, j3], n) as u32);
                        }
                    }
                }
                indptr.push(indices.len());
            }
        }
    }
    (indptr, indices)
}

/// Stiffness and load on all coefficients.
pub fn assemble_full(
    patch: &GeometryPatch,
    disc: &Discretization,
    source: &ScalarFn<'_>,
) -> Result<(CsrMatrix, Vec<f64>)> {
    let n = disc.modes();
    let dofs = disc.dofs();
    if dofs > DOF_GUARD {
        return Err(IgaError::OracleRefused { dofs, limit: DOF_GUARD });
    }
    let p = [disc.degree(0), disc.degree(1), disc.degree(2)];
    let ng = disc.n_gauss;
    let elems = [0, 1, 2].map(|d| disc.quad[d].points.len() / ng[d]);
    let geo: Vec<Vec<_>> = (0..3)
        .map(|d| disc.quad[d].points.iter().map(|&x| patch.eval_direction(d, x)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let (indptr, indices) = stencil_pattern(n, p);
    let mut values = vec![0.0; indices.len()];
    let mut f = vec![0.0; dofs];
    let plane = n[1] * n[2];

    // Element slabs (fixed e1) touch coefficient planes e1..=e1+p only, which are
    // contiguous row blocks; slabs of equal e1 mod (p+1) therefore never overlap.
    for color in 0..=p[0] {
        let slabs: Vec<usize> = (color..elems[0]).step_by(p[0] + 1).collect();
        let mut vchunks: Vec<(usize, &mut [f64], &mut [f64])> = Vec::with_capacity(slabs.len());
        let mut vrest: &mut [f64] = &mut values;
        let mut frest: &mut [f64] = &mut f;
        let mut voff = 0;
        let mut foff = 0;
        for &e1 in &slabs {
            let first = disc.quad[0].spans[e1 * ng[0]] - p[0];
            let (r0, r1) = (first * plane, (first + p[0] + 1) * plane);
            let (v0, v1) = (indptr[r0], indptr[r1]);
            let (_, tail) = std::mem::take(&mut vrest).split_at_mut(v0 - voff);
            let (mine, tail) = tail.split_at_mut(v1 - v0);
            vrest = tail;
            voff = v1;
            let (_, ftail) = std::mem::take(&mut frest).split_at_mut(r0 - foff);
            let (fmine, ftail) = ftail.split_at_mut(r1 - r0);
            frest = ftail;
            foff = r1;
            vchunks.push((e1, mine, fmine));
        }
        vchunks.into_par_iter().try_for_each(|(e1, vals_out, f_out)| -> Result<()> {
            let nloc = (p[0] + 1) * (p[1] + 1) * (p[2] + 1);
            let mut ke = vec![0.0; nloc * nloc];
            let mut fe = vec![0.0; nloc];
            let mut grads = vec![[0.0; 3]; nloc];
            let mut vals = vec![0.0; nloc];
            let first1 = disc.quad[0].spans[e1 * ng[0]] - p[0];
            let row_base = first1 * plane;
            let val_base = indptr[row_base];
            for e2 in 0..elems[1] {
                for e3 in 0..elems[2] {
                    ke.iter_mut().for_each(|v| *v = 0.0);
                    fe.iter_mut().for_each(|v| *v = 0.0);
                    let q0 = [e1 * ng[0], e2 * ng[1], e3 * ng[2]];
                    let first = [0, 1, 2].map(|d| disc.quad[d].spans[q0[d]] - p[d]);
                    for a in 0..ng[0] {
                        for b in 0..ng[1] {
                            for c in 0..ng[2] {
                                let q = [q0[0] + a, q0[1] + b, q0[2] + c];
                                let xi = [disc.quad[0].points[q[0]], disc.quad[1].points[q[1]], disc.quad[2].points[q[2]]];
                                let w = disc.quad[0].weights[q[0]] * disc.quad[1].weights[q[1]] * disc.quad[2].weights[q[2]];
                                let (x, jac) = patch.point_and_jacobian_from([&geo[0][q[0]], &geo[1][q[1]], &geo[2][q[2]]]);
                                let m = patch.metric_from_jacobian(jac, xi)?;
                                let fx = source(x) * m.det * w;
                                let mut t = 0;
                                for l1 in 0..=p[0] {
                                    for l2 in 0..=p[1] {
                                        for l3 in 0..=p[2] {
                                            let (i1, i2, i3) = (first[0] + l1, first[1] + l2, first[2] + l3);
                                            let (v1, v2, v3) = (disc.values[0][(i1, q[0])], disc.values[1][(i2, q[1])], disc.values[2][(i3, q[2])]);
                                            let (d1, d2, d3) = (disc.derivs[0][(i1, q[0])], disc.derivs[1][(i2, q[1])], disc.derivs[2][(i3, q[2])]);
                                            grads[t] = [d1 * v2 * v3, v1 * d2 * v3, v1 * v2 * d3];
                                            vals[t] = v1 * v2 * v3;
                                            t += 1;
                                        }
                                    }
                                }
                                let r = m.metric * w;
                                for s in 0..nloc {
                                    fe[s] += fx * vals[s];
                                    let gs = grads[s];
                                    let rg = [
                                        r[(0, 0)] * gs[0] + r[(1, 0)] * gs[1] + r[(2, 0)] * gs[2],
                                        r[(0, 1)] * gs[0] + r[(1, 1)] * gs[1] + r[(2, 1)] * gs[2],
                                        r[(0, 2)] * gs[0] + r[(1, 2)] * gs[1] + r[(2, 2)] * gs[2],
                                    ];
                                    for u in 0..nloc {
                                        let gu = grads[u];
                                        ke[s * nloc + u] += rg[0] * gu[0] + rg[1] * gu[1] + rg[2] * gu[2];
                                    }
                                }
                            }
                        }
                    }
                    let mut s = 0;
                    for l1 in 0..=p[0] {
                        for l2 in 0..=p[1] {
                            for l3 in 0..=p[2] {
                                let row = [first[0] + l1, first[1] + l2, first[2] + l3];
                                let r = lex(row, n);
                                f_out[r - row_base] += fe[s];
                                let lo = [0, 1, 2].map(|d| row[d].saturating_sub(p[d]));
                                let hi = [0, 1, 2].map(|d| (row[d] + p[d]).min(n[d] - 1));
                                let w2 = hi[1] - lo[1] + 1;
                                let w3 = hi[2] - lo[2] + 1;
                                let mut u = 0;
                                for m1 in 0..=p[0] {
                                    for m2 in 0..=p[1] {
                                        for m3 in 0..=p[2] {
                                            let col = [first[0] + m1, first[1] + m2, first[2] + m3];
                                            let pos = indptr[r] + ((col[0] - lo[0]) * w2 + (col[1] - lo[1])) * w3 + (col[2] - lo[2]);
                                            vals_out[pos - val_base] += ke[s * nloc + u];
                                            u += 1;
                                        }
                                    }
                                }
                                s += 1;
                            }
                        }
                    }
                }
            }
            Ok(())
        })?;
    }
    let k = CsrMatrix { nrows: dofs, ncols: dofs, indptr, indices, values };
    Ok((k, f))
}

/// Reduced system from the full one, using the same free-coefficient maps as the
/// TT pipeline (entries of tied seam coefficients are summed).
pub struct ReferenceSystem {
    pub k_full: CsrMatrix,
    pub f_full: Vec<f64>,
    pub k_int: CsrMatrix,
    pub f_int: Vec<f64>,
    pub lift: Vec<f64>,
    /// Full index → free index (or none for Dirichlet coefficients).
    pub free_of: Vec<Option<usize>>,
    pub free_modes: [usize; 3],
}

fn free_index_maps(maps: &[DMatrix<f64>; 3]) -> [Vec<Option<usize>>; 3] {
    [0, 1, 2].map(|d| {
        let m = &maps[d];
        (0..m.nrows()).map(|i| (0..m.ncols()).find(|&j| m[(i, j)] != 0.0)).collect()
    })
}

pub fn reduce(
    k_full: CsrMatrix,
    f_full: Vec<f64>,
    lift: Vec<f64>,
    bc: &BoundarySpec,
    disc: &Discretization,
) -> Result<ReferenceSystem> {
    let maps = reduction_maps(bc, disc)?;
    let per = free_index_maps(&maps);
    let n = disc.modes();
    let free_modes = [maps[0].ncols(), maps[1].ncols(), maps[2].ncols()];
    let mut free_of = vec![None; disc.dofs()];
    for i1 in 0..n[0] {
        for i2 in 0..n[1] {
            for i3 in 0..n[2] {
                if let (Some(a), Some(b), Some(c)) = (per[0][i1], per[1][i2], per[2][i3]) {
                    free_of[lex([i1, i2, i3], n)] = Some(lex([a, b, c], free_modes));
                }
            }
        }
    }
    let nfree: usize = free_modes.iter().product();
    let kl = k_full.matvec(&lift);
    let mut f_int = vec![0.0; nfree];
    let mut trip = Vec::with_capacity(k_full.nnz());
    for r in 0..k_full.nrows {
        let Some(fr) = free_of[r] else { continue };
        f_int[fr] += f_full[r] - kl[r];
        for k in k_full.indptr[r]..k_full.indptr[r + 1] {
            if let Some(fc) = free_of[k_full.indices[k] as usize] {
                trip.push((fr, fc, k_full.values[k]));
            }
        }
    }
    let k_int = CsrMatrix::from_triplets(nfree, nfree, trip);
    Ok(ReferenceSystem { k_full, f_full, k_int, f_int, lift, free_of, free_modes })
}

impl ReferenceSystem {
    /// Full coefficient vector from free coefficients.
    pub fn expand(&self, u_free: &[f64]) -> Vec<f64> {
        self.free_of
            .iter()
            .zip(&self.lift)
            .map(|(f, l)| match f {
                Some(i) => u_free[*i] + l,
                None => *l,
            })
            .collect()
    }
}

/// Jacobi-preconditioned CG; returns the solution and the achieved relative residual.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iters: usize) -> (Vec<f64>, f64, usize) {
    let n = b.len();
    let inv: Vec<f64> = a.diagonal().iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return (x, 0.0, 0);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut it = 0;
    while it < max_iters {
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn <= tol * bnorm {
            break;
        }
        let ap = a.matvec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
        z = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
        let rz2: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz2 / rz;
        rz = rz2;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        it += 1;
    }
    // residual of the returned iterate, recomputed
    let ax = a.matvec(&x);
    let res = ax.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / bnorm;
    (x, res, it)
}
