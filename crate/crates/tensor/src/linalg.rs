//! Dense factorization helpers shared by rounding, cross and the solver.

use nalgebra::{DMatrix, DVector};

/// Thin SVD with singular values sorted in decreasing order.
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub vt: DMatrix<f64>,
}

pub(crate) fn thin_qr(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.clone().qr();
    (qr.q(), qr.r())
}

/// Thin SVD by Householder QR followed by one-sided Jacobi on the triangular
/// factor. nalgebra's bidiagonal SVD mishandles some nearly singular 2×2
/// subproblems (wrong singular vectors), which rank-deficient TT cores hit.
pub(crate) fn svd(m: &DMatrix<f64>) -> Svd {
    let (rows, cols) = m.shape();
    if rows < cols {
        let t = svd(&m.transpose());
        return Svd { u: t.vt.transpose(), s: t.s, vt: t.u.transpose() };
    }
    if cols == 0 {
        return Svd { u: DMatrix::zeros(rows, 0), s: Vec::new(), vt: DMatrix::zeros(0, 0) };
    }
    let (q, r) = thin_qr(m);
    let (ur, s, vt) = jacobi_svd(r);
    Svd { u: q * ur, s, vt }
}

/// One-sided Jacobi SVD of a square matrix; singular values in decreasing order.
fn jacobi_svd(mut w: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let n = w.ncols();
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = f64::EPSILON * n as f64;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut a, mut b, mut g) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    a += x * x;
                    b += y * y;
                    g += x * y;
                }
                if g == 0.0 || g.abs() <= tol * (a * b).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for mat in [&mut w, &mut v] {
                    for i in 0..n {
                        let (x, y) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = c * x - sn * y;
                        mat[(i, q)] = sn * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut u = DMatrix::zeros(n, n);
    let mut zero_cols = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        if norms[j] > 0.0 && norms[j].is_finite() {
            u.set_column(k, &(w.column(j) / norms[j]));
        } else {
            zero_cols.push(k);
        }
    }
    // complete the basis where the matrix has an exact null space
    let mut e = 0;
    for k in zero_cols {
        loop {
            let mut c = DVector::zeros(n);
            c[e % n] = 1.0;
            e += 1;
            for _ in 0..2 {
                for j in 0..n {
                    if j != k {
                        let uj = u.column(j).clone_owned();
                        let d = uj.dot(&c);
                        c -= uj * d;
                    }
                }
            }
            let nc = c.norm();
            if nc > 0.5 {
                u.set_column(k, &(c / nc));
                break;
            }
        }
    }
    let vt = DMatrix::from_fn(n, n, |i, j| v[(j, order[i])]);
    (u, s, vt)
}

/// Smallest rank whose discarded tail has Frobenius norm at most `abs_tol`,
/// clamped to `[1, max_rank]`.
pub(crate) fn truncation_rank(s: &[f64], abs_tol: f64, max_rank: usize) -> usize {
    let mut tail = 0.0;
    let mut r = s.len();
    while r > 0 {
        let next = tail + s[r - 1] * s[r - 1];
        if next.sqrt() > abs_tol {
            break;
        }
        tail = next;
        r -= 1;
    }
    r.max(1).min(max_rank.max(1)).min(s.len().max(1))
}

impl Svd {
    pub fn truncate(self, r: usize) -> Svd {
        let r = r.min(self.s.len());
        Svd {
            u: self.u.columns(0, r).into_owned(),
            s: self.s[..r].to_vec(),
            vt: self.vt.rows(0, r).into_owned(),
        }
    }

    /// `diag(s) * vt`
    pub fn svt(&self) -> DMatrix<f64> {
        let mut m = self.vt.clone();
        for (i, s) in self.s.iter().enumerate() {
            m.row_mut(i).scale_mut(*s);
        }
        m
    }
}

pub(crate) fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_reconstructs_tall_and_wide() {
        for &(r, c) in &[(20usize, 3usize), (3, 20), (5, 5), (1, 4), (4, 1)] {
            let m = DMatrix::from_fn(r, c, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0 + (i as f64) * 0.1);
            let d = svd(&m);
            assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
            let back = &d.u * d.svt();
            assert!((back - &m).norm() < 1e-11 * m.norm());
        }
    }

    #[test]
    fn nearly_singular_triangular_2x2() {
        // nalgebra's bidiagonal SVD returns wrong vectors for this one
        let m = DMatrix::from_row_slice(2, 2, &[2.1085281406737617, 20.979590107561556, 0.0, 3.7566902446706864e-14]);
        let d = svd(&m);
        assert!((&d.u * d.svt() - &m).norm() < 1e-14 * m.norm());
        assert!(d.s[1] < 1e-13);
        let rank1 = d.u.columns(0, 1) * d.svt().rows(0, 1);
        assert!((rank1 - &m).norm() < 1e-13);
    }

    #[test]
    fn rank_deficient_has_orthonormal_factors() {
        let mut m = DMatrix::zeros(6, 4);
        m[(0, 0)] = 1.0;
        m[(2, 1)] = 3.0;
        let d = svd(&m);
        assert!((d.u.transpose() * &d.u - DMatrix::identity(4, 4)).norm() < 1e-14);
        assert!((d.vt.transpose() * &d.vt - DMatrix::identity(4, 4)).norm() < 1e-14);
        assert_eq!(d.s, vec![3.0, 1.0, 0.0, 0.0]);
        assert!((&d.u * d.svt() - &m).norm() < 1e-14);
    }

    #[test]
    fn truncation_rank_respects_tail() {
        let s = [10.0, 1.0, 1e-3, 1e-6];
        assert_eq!(truncation_rank(&s, 1e-2, 10), 2);
        assert_eq!(truncation_rank(&s, 0.0, 10), 4);
        assert_eq!(truncation_rank(&s, 100.0, 10), 1);
        assert_eq!(truncation_rank(&s, 0.0, 3), 3);
    }
}
