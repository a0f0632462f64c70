//! Alternating minimal energy (AMEn) solver for `A x = f` with `A` symmetric
//! positive definite in TT-matrix format.
//!
//! One-site left-to-right sweeps: each core of `x` is replaced by the solution
//! of the Galerkin-projected local system, truncated, and enriched with the
//! local residual projected onto the right frame of a low-rank residual
//! approximation `z`. Between sweeps `x` and `z` are right-orthogonalized and
//! the right interfaces rebuilt.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::core3::Core3;
use crate::error::{Result, TtError};
use crate::linalg;
use crate::matrix::TtMatrix;
use crate::tensor::TtTensor;

#[derive(Clone, Debug)]
pub struct AmenOptions {
    /// Target relative residual `||A x - f|| / ||f||`.
    pub eps: f64,
    pub max_sweeps: usize,
    /// Rank of the residual approximation used for enrichment.
    pub kick: usize,
    /// Local systems up to this many unknowns are solved directly.
    pub max_direct: usize,
    pub max_local_iters: usize,
    pub max_rank: usize,
    pub seed: u64,
}

impl Default for AmenOptions {
    fn default() -> Self {
        AmenOptions {
            eps: 1e-8,
            max_sweeps: 50,
            kick: 4,
            max_direct: 1500,
            max_local_iters: 5000,
            max_rank: usize::MAX,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AmenResult {
    pub x: TtTensor,
    /// Relative residual of `x`, recomputed in exact TT arithmetic.
    pub residual: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Largest local residual seen in the final sweep (before each local solve).
    pub local_residual: f64,
}

/// Relative residual `||A x - f|| / ||f||` via exact matvec and an orthogonalized norm.
pub fn relative_residual(a: &TtMatrix, x: &TtTensor, f: &TtTensor) -> Result<f64> {
    let ax = a.matvec(x)?;
    let diff = ax.sub(f)?;
    let fnorm = f.norm();
    let r = diff.norm();
    Ok(if fnorm > 0.0 { r / fnorm } else { r })
}

pub fn amen_solve(a: &TtMatrix, f: &TtTensor, x0: Option<&TtTensor>, opts: &AmenOptions) -> Result<AmenResult> {
    let d = a.ndim();
    if a.row_modes() != a.col_modes() {
        return Err(TtError::Dimension("AMEn needs a square operator".into()));
    }
    if f.modes() != a.row_modes() {
        return Err(TtError::Dimension(format!(
            "right-hand side modes {:?} vs operator {:?}",
            f.modes(),
            a.row_modes()
        )));
    }
    if !(opts.eps > 0.0) {
        return Err(TtError::InvalidArgument(format!("solver eps must be positive, got {}", opts.eps)));
    }
    let modes = f.modes();
    if f.norm() == 0.0 {
        return Ok(AmenResult { x: TtTensor::zeros(&modes), residual: 0.0, sweeps: 0, converged: true, local_residual: 0.0 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = match x0 {
        Some(x0) => {
            if x0.modes() != modes {
                return Err(TtError::Dimension("initial guess modes differ".into()));
            }
            x0.clone()
        }
        None => TtTensor::random(&modes, 2, &mut rng),
    };
    let kick = opts.kick;
    let mut z = if kick > 0 { Some(TtTensor::random(&modes, kick, &mut rng)) } else { None };

    let ops: Vec<OpCore> = (0..d).map(|k| OpCore::from_matrix(a, k)).collect();
    let fcores: Vec<Core3> = f.cores().to_vec();

    let one_a = Iface::ones();
    let one_f = DMatrix::from_element(1, 1, 1.0);

    let mut xl_a: Vec<Iface> = vec![one_a.clone(); d + 1];
    let mut xr_a: Vec<Iface> = vec![one_a.clone(); d + 1];
    let mut xl_f: Vec<DMatrix<f64>> = vec![one_f.clone(); d + 1];
    let mut xr_f: Vec<DMatrix<f64>> = vec![one_f.clone(); d + 1];
    let mut zl_a: Vec<Iface> = vec![one_a.clone(); d + 1];
    let mut zr_a: Vec<Iface> = vec![one_a.clone(); d + 1];
    let mut zl_f: Vec<DMatrix<f64>> = vec![one_f.clone(); d + 1];
    let mut zr_f: Vec<DMatrix<f64>> = vec![one_f.clone(); d + 1];

    let mut eps_local = opts.eps / (d as f64).sqrt() * 0.5;
    let mut best: Option<(TtTensor, f64)> = None;
    let mut local_residual = f64::INFINITY;
    let mut sweeps = 0;
    let mut converged = false;

    for sweep in 0..opts.max_sweeps.max(1) {
        sweeps = sweep + 1;
        // right-orthogonalize and rebuild right interfaces
        x.orthogonalize_right();
        if let Some(z) = z.as_mut() {
            z.orthogonalize_right();
        }
        for k in (1..d).rev() {
            let xk = x.core(k);
            xr_a[k] = right_update(&xr_a[k + 1], xk, &ops[k], xk);
            xr_f[k] = right_update_vec(&xr_f[k + 1], xk, &fcores[k]);
            if let Some(z) = z.as_ref() {
                let zk = z.core(k);
                zr_a[k] = right_update(&zr_a[k + 1], zk, &ops[k], xk);
                zr_f[k] = right_update_vec(&zr_f[k + 1], zk, &fcores[k]);
            }
        }

        let mut max_res = 0.0f64;
        for k in 0..d {
            let op = LocalOp { left: &xl_a[k], core: &ops[k], right: &xr_a[k + 1] };
            let g = local_rhs(&xl_f[k], &fcores[k], &xr_f[k + 1]);
            let gnorm = g.frobenius();
            let xk = x.core(k).clone();
            let res_prev = if gnorm > 0.0 { residual_of(&op, &xk, &g) / gnorm } else { 0.0 };
            max_res = max_res.max(res_prev);

            let y = if gnorm == 0.0 {
                Core3::zeros(xk.left(), xk.mode(), xk.right())
            } else if res_prev <= eps_local * 0.1 {
                xk.clone()
            } else {
                local_solve(&op, &g, &xk, eps_local * 0.1, opts).map_err(|e| match e {
                    TtError::SingularLocal { .. } => TtError::SingularLocal { core: k },
                    other => other,
                })?
            };

            if k + 1 == d {
                if let Some(z) = z.as_mut() {
                    let zop = LocalOp { left: &zl_a[k], core: &ops[k], right: &zr_a[k + 1] };
                    let zg = local_rhs(&zl_f[k], &fcores[k], &zr_f[k + 1]);
                    let mut zres = zg;
                    sub_assign(&mut zres, &zop.apply(&y));
                    let nrm = zres.frobenius();
                    if nrm > 0.0 {
                        zres.scale(1.0 / nrm);
                        z.cores_mut()[k] = zres;
                    }
                }
                x.cores_mut()[k] = y;
                break;
            }

            // truncation driven by the local residual
            let (rl, n, rr) = y.shape();
            let dec = linalg::svd(&y.left_unfolding());
            let ynorm = y.frobenius();
            let res_y = if gnorm > 0.0 { residual_of(&op, &y, &g) / gnorm } else { 0.0 };
            let target = eps_local.max(1.5 * res_y);
            let full_rank = dec.s.len();
            let mut r = linalg::truncation_rank(&dec.s, eps_local * ynorm, opts.max_rank);
            let (u, v) = loop {
                let t = linalg::Svd { u: dec.u.clone(), s: dec.s.clone(), vt: dec.vt.clone() }.truncate(r);
                let u = t.u.clone();
                let v = t.svt();
                if r >= full_rank.min(opts.max_rank) || gnorm == 0.0 {
                    break (u, v);
                }
                let trial = Core3::from_left_unfolding(&(&u * &v), rl, n);
                if residual_of(&op, &trial, &g) / gnorm <= target {
                    break (u, v);
                }
                r += 1;
            };
            let y_trunc = Core3::from_left_unfolding(&(&u * &v), rl, n);

            let (u, v) = match z.as_ref() {
                Some(_) => {
                    let eop = LocalOp { left: &xl_a[k], core: &ops[k], right: &zr_a[k + 1] };
                    let mut enr = local_rhs(&xl_f[k], &fcores[k], &zr_f[k + 1]);
                    sub_assign(&mut enr, &eop.apply(&y_trunc));
                    let enr = enr.left_unfolding();
                    let mut both = DMatrix::zeros(rl * n, u.ncols() + enr.ncols());
                    both.columns_mut(0, u.ncols()).copy_from(&u);
                    both.columns_mut(u.ncols(), enr.ncols()).copy_from(&enr);
                    let (q, _) = linalg::thin_qr(&both);
                    let coef = q.transpose() * &u;
                    (q, coef * v)
                }
                None => (u, v),
            };
            let _ = rr;
            x.cores_mut()[k] = Core3::from_left_unfolding(&u, rl, n);
            let next = x.core(k + 1).mul_left(&v);
            x.cores_mut()[k + 1] = next;

            if let Some(z) = z.as_mut() {
                let zop = LocalOp { left: &zl_a[k], core: &ops[k], right: &zr_a[k + 1] };
                let mut zres = local_rhs(&zl_f[k], &fcores[k], &zr_f[k + 1]);
                sub_assign(&mut zres, &zop.apply(&y_trunc));
                let (zl, zn, _) = zres.shape();
                let (q, _) = linalg::thin_qr(&zres.left_unfolding());
                let q = if q.ncols() > kick { q.columns(0, kick).into_owned() } else { q };
                let newz = Core3::from_left_unfolding(&q, zl, zn);
                let zr_old = z.core(k + 1).clone();
                // keep the rank chain consistent; the next core is overwritten when visited
                let bridge = Core3::from_fn(newz.right(), zr_old.mode(), zr_old.right(), |a, i, b| {
                    if a < zr_old.left() { zr_old.get(a, i, b) } else { 0.0 }
                });
                z.cores_mut()[k] = newz;
                z.cores_mut()[k + 1] = bridge;
            }

            let xk = x.core(k);
            xl_a[k + 1] = left_update(&xl_a[k], xk, &ops[k], xk);
            xl_f[k + 1] = left_update_vec(&xl_f[k], xk, &fcores[k]);
            if let Some(z) = z.as_ref() {
                let zk = z.core(k);
                zl_a[k + 1] = left_update(&zl_a[k], zk, &ops[k], xk);
                zl_f[k + 1] = left_update_vec(&zl_f[k], zk, &fcores[k]);
            }
        }
        local_residual = max_res;

        let last = sweep + 1 == opts.max_sweeps.max(1);
        if max_res <= opts.eps || last {
            let res = relative_residual(a, &x, f)?;
            if best.as_ref().map_or(true, |(_, r)| res < *r) {
                best = Some((x.clone(), res));
            }
            if res <= opts.eps {
                converged = true;
                break;
            }
            eps_local *= 0.25;
        }
    }

    let (x, residual) = match best {
        Some(b) => b,
        None => {
            let r = relative_residual(a, &x, f)?;
            (x, r)
        }
    };
    Ok(AmenResult { x, residual, sweeps, converged, local_residual })
}

/// Interface tensor `(test, op, trial)`, test index fastest.
#[derive(Clone, Debug)]
struct Iface {
    rt: usize,
    ra: usize,
    rx: usize,
    data: Vec<f64>,
}

impl Iface {
    fn ones() -> Self {
        Iface { rt: 1, ra: 1, rx: 1, data: vec![1.0] }
    }
    #[inline]
    fn get(&self, a: usize, al: usize, b: usize) -> f64 {
        self.data[a + self.rt * (al + self.ra * b)]
    }
}

/// Nonzero entries of one operator core, `(alpha, i, j, beta, value)`.
#[derive(Clone, Debug)]
struct OpCore {
    ra: usize,
    n: usize,
    m: usize,
    rb: usize,
    nz: Vec<(u32, u32, u32, u32, f64)>,
}

impl OpCore {
    fn from_matrix(a: &TtMatrix, k: usize) -> Self {
        let core = a.core(k);
        let n = a.row_modes()[k];
        let m = a.col_modes()[k];
        let (ra, _, rb) = core.shape();
        let mut nz = Vec::new();
        for be in 0..rb {
            for i in 0..n {
                for j in 0..m {
                    for al in 0..ra {
                        let v = core.get(al, i + n * j, be);
                        if v != 0.0 {
                            nz.push((al as u32, i as u32, j as u32, be as u32, v));
                        }
                    }
                }
            }
        }
        OpCore { ra, n, m, rb, nz }
    }

    fn reversed(&self) -> OpCore {
        let mut nz: Vec<_> = self.nz.iter().map(|&(al, i, j, be, v)| (be, i, j, al, v)).collect();
        nz.sort_by_key(|&(al, i, j, be, _)| (be, i, j, al));
        OpCore { ra: self.rb, n: self.n, m: self.m, rb: self.ra, nz }
    }
}

fn reverse_core(c: &Core3) -> Core3 {
    Core3::from_fn(c.right(), c.mode(), c.left(), |b, i, a| c.get(a, i, b))
}

fn reverse_iface_vec(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone()
}

/// Contracts the left interface and the operator core with a trial core:
/// returns `Q[(a + rt*i), (b' + rx2*beta)] = sum phi[a,al,a'] A[al,i,j,beta] x[a',j,b']`.
fn half_apply(left: &Iface, op: &OpCore, x: &Core3) -> DMatrix<f64> {
    let (rx, m, rx2) = x.shape();
    debug_assert_eq!(rx, left.rx);
    debug_assert_eq!(m, op.m);
    let rt = left.rt;
    let ra = op.ra;
    // T[(a + rt*al), (j + m*b')]
    let phi = DMatrix::from_column_slice(rt * ra, rx, &left.data);
    let t = phi * x.right_unfolding();
    // P[al][j][a][b'] blocks of size rt*rx2
    let blk = rt * rx2;
    let mut p = vec![0.0; ra * m * blk];
    for bp in 0..rx2 {
        for j in 0..m {
            for al in 0..ra {
                let base = (al * m + j) * blk;
                for a in 0..rt {
                    p[base + a * rx2 + bp] = t[(a + rt * al, j + m * bp)];
                }
            }
        }
    }
    let n = op.n;
    let mut q = vec![0.0; op.rb * n * blk];
    for &(al, i, j, be, v) in &op.nz {
        let src = (al as usize * m + j as usize) * blk;
        let dst = (be as usize * n + i as usize) * blk;
        let (s, dd) = (&p[src..src + blk], &mut q[dst..dst + blk]);
        for (o, s) in dd.iter_mut().zip(s) {
            *o += v * s;
        }
    }
    DMatrix::from_fn(rt * n, rx2 * op.rb, |row, col| {
        let a = row % rt;
        let i = row / rt;
        let bp = col % rx2;
        let be = col / rx2;
        q[((be * n + i) * rt + a) * rx2 + bp]
    })
}

fn left_update(left: &Iface, test: &Core3, op: &OpCore, trial: &Core3) -> Iface {
    let q = half_apply(left, op, trial);
    let rt2 = test.right();
    let rx2 = trial.right();
    let m = test.left_unfolding().transpose() * q; // (rt2) x (rx2 * rb)
    let rb = op.rb;
    let mut data = vec![0.0; rt2 * rb * rx2];
    for be in 0..rb {
        for bp in 0..rx2 {
            for a2 in 0..rt2 {
                data[a2 + rt2 * (be + rb * bp)] = m[(a2, bp + rx2 * be)];
            }
        }
    }
    Iface { rt: rt2, ra: rb, rx: rx2, data }
}

fn right_update(right: &Iface, test: &Core3, op: &OpCore, trial: &Core3) -> Iface {
    left_update(right, &reverse_core(test), &op.reversed(), &reverse_core(trial))
}

fn left_update_vec(left: &DMatrix<f64>, test: &Core3, f: &Core3) -> DMatrix<f64> {
    let w = left * f.right_unfolding();
    let w = Core3::from_right_unfolding(&w, f.mode(), f.right());
    test.left_unfolding().transpose() * w.left_unfolding()
}

fn right_update_vec(right: &DMatrix<f64>, test: &Core3, f: &Core3) -> DMatrix<f64> {
    left_update_vec(&reverse_iface_vec(right), &reverse_core(test), &reverse_core(f))
}

fn local_rhs(left: &DMatrix<f64>, f: &Core3, right: &DMatrix<f64>) -> Core3 {
    let w = left * f.right_unfolding();
    let w = Core3::from_right_unfolding(&w, f.mode(), f.right());
    w.mul_right(&right.transpose())
}

struct LocalOp<'a> {
    left: &'a Iface,
    core: &'a OpCore,
    right: &'a Iface,
}

impl LocalOp<'_> {
    fn out_shape(&self) -> (usize, usize, usize) {
        (self.left.rt, self.core.n, self.right.rt)
    }

    fn apply(&self, x: &Core3) -> Core3 {
        let q = half_apply(self.left, self.core, x);
        let (rt, n, rb) = self.out_shape();
        let rx2 = x.right();
        let rbop = self.core.rb;
        // R[(b' + rx2*beta), b] = right[b, beta, b']
        let r = DMatrix::from_fn(rx2 * rbop, rb, |row, b| {
            let bp = row % rx2;
            let be = row / rx2;
            self.right.get(b, be, bp)
        });
        Core3::from_left_unfolding(&(q * r), rt, n)
    }

    fn diagonal(&self) -> Vec<f64> {
        let (rt, n, rb) = self.out_shape();
        let mut diag = vec![0.0; rt * n * rb];
        for &(al, i, j, be, v) in &self.core.nz {
            if i != j {
                continue;
            }
            let (al, i, be) = (al as usize, i as usize, be as usize);
            for b in 0..rb {
                let rv = self.right.get(b, be, b) * v;
                if rv == 0.0 {
                    continue;
                }
                for a in 0..rt {
                    diag[a + rt * (i + n * b)] += self.left.get(a, al, a) * rv;
                }
            }
        }
        diag
    }

    fn dense(&self) -> DMatrix<f64> {
        let (rt, n, rb) = self.out_shape();
        let (rx, m, rx2) = (self.left.rx, self.core.m, self.right.rx);
        let size_r = rt * n * rb;
        let size_c = rx * m * rx2;
        let mut out = DMatrix::zeros(size_r, size_c);
        let mut s = DMatrix::zeros(rt, rx);
        let nz = &self.core.nz;
        let mut idx: Vec<usize> = (0..nz.len()).collect();
        idx.sort_by_key(|&t| (nz[t].3, nz[t].1, nz[t].2, nz[t].0));
        let mut start = 0;
        while start < idx.len() {
            let (_, i, j, be, _) = nz[idx[start]];
            let mut end = start;
            s.fill(0.0);
            while end < idx.len() {
                let (al, i2, j2, be2, v) = nz[idx[end]];
                if (i2, j2, be2) != (i, j, be) {
                    break;
                }
                for ap in 0..rx {
                    for a in 0..rt {
                        s[(a, ap)] += v * self.left.get(a, al as usize, ap);
                    }
                }
                end += 1;
            }
            let (i, j, be) = (i as usize, j as usize, be as usize);
            for bp in 0..rx2 {
                for b in 0..rb {
                    let c = self.right.get(b, be, bp);
                    if c == 0.0 {
                        continue;
                    }
                    let r0 = rt * (i + n * b);
                    let c0 = rx * (j + m * bp);
                    for ap in 0..rx {
                        for a in 0..rt {
                            out[(r0 + a, c0 + ap)] += c * s[(a, ap)];
                        }
                    }
                }
            }
            start = end;
        }
        out
    }
}

fn sub_assign(a: &mut Core3, b: &Core3) {
    a.data_mut().iter_mut().zip(b.data()).for_each(|(x, y)| *x -= y);
}

fn residual_of(op: &LocalOp<'_>, x: &Core3, g: &Core3) -> f64 {
    let mut r = op.apply(x);
    sub_assign(&mut r, g);
    r.frobenius()
}

fn local_solve(op: &LocalOp<'_>, g: &Core3, x0: &Core3, tol: f64, opts: &AmenOptions) -> Result<Core3> {
    let (rt, n, rb) = op.out_shape();
    let size = rt * n * rb;
    if size <= opts.max_direct {
        let b = op.dense();
        let rhs = DVector::from_column_slice(g.data());
        let sol = match b.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => b.lu().solve(&rhs).ok_or(TtError::SingularLocal { core: 0 })?,
        };
        return Core3::from_vec(rt, n, rb, sol.as_slice().to_vec());
    }
    Ok(pcg(op, g, x0, tol, opts.max_local_iters))
}

/// Jacobi-preconditioned conjugate gradients on the local system.
fn pcg(op: &LocalOp<'_>, g: &Core3, x0: &Core3, tol: f64, max_iters: usize) -> Core3 {
    let diag = op.diagonal();
    let inv: Vec<f64> = diag.iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let gnorm = g.frobenius();
    let mut x = x0.clone();
    let mut r = g.clone();
    sub_assign(&mut r, &op.apply(&x));
    let mut zv: Vec<f64> = r.data().iter().zip(&inv).map(|(a, b)| a * b).collect();
    let mut p = Core3::from_vec(x.left(), x.mode(), x.right(), zv.clone()).expect("shape");
    let mut rz: f64 = r.data().iter().zip(&zv).map(|(a, b)| a * b).sum();
    for _ in 0..max_iters {
        if r.frobenius() <= tol * gnorm {
            break;
        }
        let ap = op.apply(&p);
        let pap: f64 = p.data().iter().zip(ap.data()).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        x.data_mut().iter_mut().zip(p.data()).for_each(|(xi, pi)| *xi += alpha * pi);
        r.data_mut().iter_mut().zip(ap.data()).for_each(|(ri, ai)| *ri -= alpha * ai);
        zv = r.data().iter().zip(&inv).map(|(a, b)| a * b).collect();
        let rz_new: f64 = r.data().iter().zip(&zv).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        p.data_mut().iter_mut().zip(&zv).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn laplace_1d(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        })
    }

    fn laplace_3d(n: usize) -> TtMatrix {
        let l = laplace_1d(n);
        let id = DMatrix::identity(n, n);
        let t1 = TtMatrix::rank_one(&[l.clone(), id.clone(), id.clone()]);
        let t2 = TtMatrix::rank_one(&[id.clone(), l.clone(), id.clone()]);
        let t3 = TtMatrix::rank_one(&[id.clone(), id, l]);
        t1.add(&t2).unwrap().add(&t3).unwrap().round(1e-14)
    }

    #[test]
    fn local_dense_matches_apply() {
        let a = laplace_3d(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = TtTensor::random(&[4, 4, 4], 2, &mut rng);
        let ops: Vec<OpCore> = (0..3).map(|k| OpCore::from_matrix(&a, k)).collect();
        let xl = left_update(&Iface::ones(), x.core(0), &ops[0], x.core(0));
        let xr = right_update(&Iface::ones(), x.core(2), &ops[2], x.core(2));
        let op = LocalOp { left: &xl, core: &ops[1], right: &xr };
        let v = x.core(1).clone();
        let via_apply = op.apply(&v);
        let via_dense = op.dense() * DVector::from_column_slice(v.data());
        for (p, q) in via_apply.data().iter().zip(via_dense.iter()) {
            assert!((p - q).abs() < 1e-11);
        }
        let diag = op.diagonal();
        let dense = op.dense();
        for (i, dv) in diag.iter().enumerate() {
            assert!((dense[(i, i)] - dv).abs() < 1e-11);
        }
    }

    #[test]
    fn identity_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = TtTensor::random(&[5, 6, 4], 2, &mut rng);
        let id = TtMatrix::identity(&[5, 6, 4]);
        let res = amen_solve(&id, &f, None, &AmenOptions { eps: 1e-12, ..Default::default() }).unwrap();
        assert!(res.converged);
        assert!(res.residual <= 1e-12);
    }

    #[test]
    fn pcg_path_matches_direct() {
        let a = laplace_3d(6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = TtTensor::random(&[6, 6, 6], 2, &mut rng);
        let direct = amen_solve(&a, &f, None, &AmenOptions { eps: 1e-10, ..Default::default() }).unwrap();
        let iterative = amen_solve(&a, &f, None, &AmenOptions { eps: 1e-10, max_direct: 10, ..Default::default() }).unwrap();
        assert!(direct.converged && iterative.converged, "{direct:?} {iterative:?}");
        let diff = direct.x.sub(&iterative.x).unwrap().norm() / direct.x.norm();
        assert!(diff < 1e-8, "diff {diff}");
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplace_3d(3);
        let res = amen_solve(&a, &TtTensor::zeros(&[3, 3, 3]), None, &AmenOptions::default()).unwrap();
        assert_eq!(res.x.norm(), 0.0);
        assert!(res.converged);
    }

    #[test]
    fn rejects_mismatched_rhs() {
        let a = laplace_3d(3);
        assert!(amen_solve(&a, &TtTensor::zeros(&[3, 3, 4]), None, &AmenOptions::default()).is_err());
    }
}
