//! Quasi-maximum-volume row selection.

use nalgebra::DMatrix;

use crate::error::{Result, TtError};

pub const DEFAULT_TOL: f64 = 1.01;
const MAX_SWAPS_PER_COL: usize = 100;

/// Selects `r = M.ncols()` rows of the tall matrix `M` such that every entry of
/// `M * inv(M[rows])` has magnitude at most `tol`.
///
/// Rows are returned in column order: `rows[j]` is the row pivoting column `j`.
/// On equal magnitude the lowest row index wins.
pub fn maxvol(m: &DMatrix<f64>, tol: f64) -> Result<Vec<usize>> {
    let (n, r) = m.shape();
    if tol < 1.0 {
        return Err(TtError::InvalidArgument(format!("maxvol tolerance {tol} < 1")));
    }
    if r == 0 {
        return Ok(Vec::new());
    }
    if n < r {
        return Err(TtError::Dimension(format!("maxvol needs a tall matrix, got {n}x{r}")));
    }
    let mut rows = initial_rows(m)?;
    let sub = DMatrix::from_fn(r, r, |i, j| m[(rows[i], j)]);
    let inv = sub.clone().lu().try_inverse().ok_or(TtError::DegeneratePivot { column: 0, magnitude: 0.0 })?;
    let mut b = m * inv;

    for _ in 0..MAX_SWAPS_PER_COL * r {
        let (mut bi, mut bj, mut best) = (0, 0, -1.0f64);
        for i in 0..n {
            for j in 0..r {
                let v = b[(i, j)].abs();
                if v > best {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        if best <= tol {
            break;
        }
        // B <- B - B[:, j] (B[i, :] - e_j) / B[i, j]
        let pivot = b[(bi, bj)];
        let col = b.column(bj).clone_owned();
        let mut row = b.row(bi).clone_owned();
        row[bj] -= 1.0;
        for jj in 0..r {
            let f = row[jj] / pivot;
            if f != 0.0 {
                for ii in 0..n {
                    b[(ii, jj)] -= col[ii] * f;
                }
            }
        }
        rows[bj] = bi;
    }
    Ok(rows)
}

/// Greedy start from Gaussian elimination with partial row pivoting.
fn initial_rows(m: &DMatrix<f64>) -> Result<Vec<usize>> {
    let (n, r) = m.shape();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut work = m.clone();
    let mut used = vec![false; n];
    let mut rows = Vec::with_capacity(r);
    for j in 0..r {
        let (mut p, mut best) = (usize::MAX, -1.0f64);
        for i in 0..n {
            if !used[i] && work[(i, j)].abs() > best {
                best = work[(i, j)].abs();
                p = i;
            }
        }
        if p == usize::MAX || best <= 1e-14 * scale || scale == 0.0 {
            return Err(TtError::DegeneratePivot { column: j, magnitude: best.max(0.0) });
        }
        used[p] = true;
        rows.push(p);
        let piv = work[(p, j)];
        for i in 0..n {
            if used[i] {
                continue;
            }
            let f = work[(i, j)] / piv;
            if f != 0.0 {
                for jj in j..r {
                    work[(i, jj)] -= f * work[(p, jj)];
                }
            }
        }
    }
    Ok(rows)
}
