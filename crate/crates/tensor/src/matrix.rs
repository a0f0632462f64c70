use nalgebra::DMatrix;

use crate::core3::Core3;
use crate::error::{Result, TtError};
use crate::tensor::TtTensor;

/// A linear operator in TT-matrix format. Core `k` has shape
/// `(r_{k-1}, n_k, m_k, r_k)` and is stored as an order-3 core whose mode index
/// is `i + n_k * j` (row index fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct TtMatrix {
    tt: TtTensor,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl TtMatrix {
    pub fn from_tt(tt: TtTensor, rows: Vec<usize>, cols: Vec<usize>) -> Result<Self> {
        if rows.len() != tt.ndim() || cols.len() != tt.ndim() {
            return Err(TtError::Dimension("row/column modes must match the core count".into()));
        }
        for (k, c) in tt.cores().iter().enumerate() {
            if c.mode() != rows[k] * cols[k] {
                return Err(TtError::Layout(format!(
                    "core {k} mode {} is not {}x{}",
                    c.mode(),
                    rows[k],
                    cols[k]
                )));
            }
        }
        Ok(TtMatrix { tt, rows, cols })
    }

    pub fn new(cores: Vec<Core3>, rows: Vec<usize>, cols: Vec<usize>) -> Result<Self> {
        Self::from_tt(TtTensor::new(cores)?, rows, cols)
    }

    /// Kronecker product `M1 ⊗ M2 ⊗ ... ⊗ Md` as a rank-one TT-matrix.
    pub fn rank_one(mats: &[DMatrix<f64>]) -> Self {
        let cores: Vec<Core3> = mats
            .iter()
            .map(|m| Core3::from_vec(1, m.nrows() * m.ncols(), 1, m.as_slice().to_vec()).expect("shape"))
            .collect();
        let rows = mats.iter().map(|m| m.nrows()).collect();
        let cols = mats.iter().map(|m| m.ncols()).collect();
        TtMatrix { tt: TtTensor::new(cores).expect("rank one"), rows, cols }
    }

    pub fn identity(modes: &[usize]) -> Self {
        Self::rank_one(&modes.iter().map(|&n| DMatrix::identity(n, n)).collect::<Vec<_>>())
    }

    pub fn zeros(rows: &[usize], cols: &[usize]) -> Self {
        let mats: Vec<DMatrix<f64>> = rows.iter().zip(cols).map(|(&n, &m)| DMatrix::zeros(n, m)).collect();
        Self::rank_one(&mats)
    }

    pub fn as_tt(&self) -> &TtTensor {
        &self.tt
    }

    pub fn into_tt(self) -> TtTensor {
        self.tt
    }

    pub fn core(&self, k: usize) -> &Core3 {
        self.tt.core(k)
    }

    pub fn ndim(&self) -> usize {
        self.tt.ndim()
    }

    pub fn row_modes(&self) -> &[usize] {
        &self.rows
    }

    pub fn col_modes(&self) -> &[usize] {
        &self.cols
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.tt.ranks()
    }

    pub fn num_params(&self) -> usize {
        self.tt.num_params()
    }

    /// Entry count of the dense operator (as `f64`).
    pub fn full_size(&self) -> f64 {
        self.tt.full_size()
    }

    /// `M_k(a, i, j, b)`
    #[inline]
    pub fn entry(&self, k: usize, a: usize, i: usize, j: usize, b: usize) -> f64 {
        self.tt.core(k).get(a, i + self.rows[k] * j, b)
    }

    pub fn get(&self, row: &[usize], col: &[usize]) -> f64 {
        let idx: Vec<usize> = row.iter().zip(col).zip(&self.rows).map(|((i, j), n)| i + n * j).collect();
        self.tt.get(&idx)
    }

    /// Dense matrix with lexicographic (first index slowest) row and column flattening.
    pub fn full(&self) -> DMatrix<f64> {
        let d = self.ndim();
        let nrows: usize = self.rows.iter().product();
        let ncols: usize = self.cols.iter().product();
        let flat = self.tt.full();
        let combined: Vec<usize> = self.rows.iter().zip(&self.cols).map(|(n, m)| n * m).collect();
        let mut out = DMatrix::zeros(nrows, ncols);
        let mut idx = vec![0usize; d];
        for v in flat {
            let mut r = 0;
            let mut c = 0;
            for k in 0..d {
                let i = idx[k] % self.rows[k];
                let j = idx[k] / self.rows[k];
                r = r * self.rows[k] + i;
                c = c * self.cols[k] + j;
            }
            out[(r, c)] = v;
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < combined[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }

    fn check_same_shape(&self, other: &TtMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(TtError::Dimension(format!(
                "operator shapes {:?}x{:?} vs {:?}x{:?}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &TtMatrix) -> Result<TtMatrix> {
        self.check_same_shape(other)?;
        Ok(TtMatrix { tt: self.tt.add(&other.tt)?, rows: self.rows.clone(), cols: self.cols.clone() })
    }

    pub fn sub(&self, other: &TtMatrix) -> Result<TtMatrix> {
        self.add(&other.scaled(-1.0))
    }

    pub fn scaled(&self, c: f64) -> TtMatrix {
        TtMatrix { tt: self.tt.scaled(c), rows: self.rows.clone(), cols: self.cols.clone() }
    }

    pub fn round(&self, eps: f64) -> TtMatrix {
        TtMatrix { tt: self.tt.round(eps), rows: self.rows.clone(), cols: self.cols.clone() }
    }

    pub fn round_with(&self, eps: f64, max_rank: usize) -> TtMatrix {
        TtMatrix { tt: self.tt.round_with(eps, max_rank), rows: self.rows.clone(), cols: self.cols.clone() }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.tt.norm()
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &TtMatrix) -> Result<f64> {
        self.check_same_shape(other)?;
        self.tt.dot(&other.tt)
    }

    /// Core-wise index swap.
    pub fn transpose(&self) -> TtMatrix {
        let cores = self
            .tt
            .cores()
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let (n, m) = (self.rows[k], self.cols[k]);
                Core3::from_fn(c.left(), n * m, c.right(), |a, q, b| {
                    let j = q % m;
                    let i = q / m;
                    c.get(a, i + n * j, b)
                })
            })
            .collect();
        TtMatrix { tt: TtTensor::new(cores).expect("same ranks"), rows: self.cols.clone(), cols: self.rows.clone() }
    }

    /// Exact TT matrix-vector product; ranks multiply.
    pub fn matvec(&self, x: &TtTensor) -> Result<TtTensor> {
        if x.modes() != self.cols {
            return Err(TtError::Dimension(format!(
                "operator columns {:?} vs vector modes {:?}",
                self.cols,
                x.modes()
            )));
        }
        let cores = (0..self.ndim())
            .map(|k| {
                let a = self.tt.core(k);
                let xc = x.core(k);
                let (ra, _, ra2) = a.shape();
                let (rx, m, rx2) = xc.shape();
                let n = self.rows[k];
                let mut out = Core3::zeros(ra * rx, n, ra2 * rx2);
                let ad = a.data();
                for b2 in 0..rx2 {
                    for a2 in 0..ra2 {
                        let ob = a2 + ra2 * b2;
                        for j in 0..m {
                            for b in 0..rx {
                                let xv = xc.get(b, j, b2);
                                if xv == 0.0 {
                                    continue;
                                }
                                for i in 0..n {
                                    let src = ra * (i + n * (j + m * a2));
                                    let col = &ad[src..src + ra];
                                    for (aa, av) in col.iter().enumerate() {
                                        if *av != 0.0 {
                                            out.add_at(aa + ra * b, i, ob, av * xv);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                out
            })
            .collect();
        TtTensor::new(cores)
    }

    /// Restricts rows and columns per direction. Ranks are preserved.
    pub fn slice(&self, row_ranges: &[std::ops::Range<usize>], col_ranges: &[std::ops::Range<usize>]) -> Result<TtMatrix> {
        let d = self.ndim();
        if row_ranges.len() != d || col_ranges.len() != d {
            return Err(TtError::Dimension("one range per direction required".into()));
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let (rr, cr) = (&row_ranges[k], &col_ranges[k]);
            if rr.end > self.rows[k] || cr.end > self.cols[k] || rr.is_empty() || cr.is_empty() {
                return Err(TtError::Dimension(format!("invalid slice for direction {k}")));
            }
            let c = self.tt.core(k);
            let n = self.rows[k];
            let (nr, nc) = (rr.len(), cr.len());
            cores.push(Core3::from_fn(c.left(), nr * nc, c.right(), |a, q, b| {
                let i = q % nr;
                let j = q / nr;
                c.get(a, rr.start + i + n * (cr.start + j), b)
            }));
        }
        TtMatrix::new(
            cores,
            row_ranges.iter().map(|r| r.len()).collect(),
            col_ranges.iter().map(|r| r.len()).collect(),
        )
    }

    /// Applies `L_k · A_k · R_kᵀ` to every operator slice, with `L_k` (`n' × n`)
    /// acting on rows and `R_k` (`m' × m`) on columns; `None` keeps a direction.
    pub fn map_modes(&self, row_maps: &[Option<&DMatrix<f64>>], col_maps: &[Option<&DMatrix<f64>>]) -> Result<TtMatrix> {
        let d = self.ndim();
        if row_maps.len() != d || col_maps.len() != d {
            return Err(TtError::Dimension("one map per direction required".into()));
        }
        let mut cores = Vec::with_capacity(d);
        let mut rows = Vec::with_capacity(d);
        let mut cols = Vec::with_capacity(d);
        for k in 0..d {
            let (n, m) = (self.rows[k], self.cols[k]);
            for (map, size) in [(row_maps[k], n), (col_maps[k], m)] {
                if let Some(mm) = map {
                    if mm.ncols() != size {
                        return Err(TtError::Dimension(format!("map for direction {k} has {} columns, mode is {size}", mm.ncols())));
                    }
                }
            }
            let n2 = row_maps[k].map_or(n, |mm| mm.nrows());
            let m2 = col_maps[k].map_or(m, |mm| mm.nrows());
            let c = self.tt.core(k);
            let (ra, _, rb) = c.shape();
            let mut out = Core3::zeros(ra, n2 * m2, rb);
            for b in 0..rb {
                for a in 0..ra {
                    let slice = DMatrix::from_fn(n, m, |i, j| c.get(a, i + n * j, b));
                    let left = match row_maps[k] {
                        Some(l) => l * slice,
                        None => slice,
                    };
                    let both = match col_maps[k] {
                        Some(r) => left * r.transpose(),
                        None => left,
                    };
                    for j in 0..m2 {
                        for i in 0..n2 {
                            out.set(a, i + n2 * j, b, both[(i, j)]);
                        }
                    }
                }
            }
            cores.push(out);
            rows.push(n2);
            cols.push(m2);
        }
        TtMatrix::new(cores, rows, cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: &[usize], cols: &[usize], rank: usize, seed: u64) -> TtMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<usize> = rows.iter().zip(cols).map(|(n, m)| n * m).collect();
        TtMatrix::from_tt(TtTensor::random(&modes, rank, &mut rng), rows.to_vec(), cols.to_vec()).unwrap()
    }

    #[test]
    fn matvec_matches_dense() {
        let a = random_matrix(&[3, 4, 2], &[2, 3, 4], 2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = TtTensor::random(&[2, 3, 4], 3, &mut rng);
        let y = a.matvec(&x).unwrap();
        let dense = a.full() * nalgebra::DVector::from_vec(x.full());
        for (u, v) in y.full().iter().zip(dense.iter()) {
            assert!((u - v).abs() < 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn identity_matvec_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = TtTensor::random(&[4, 3, 5], 2, &mut rng);
        let y = TtMatrix::identity(&[4, 3, 5]).matvec(&x).unwrap().round(1e-12);
        for (u, v) in y.full().iter().zip(x.full()) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn transpose_matches_dense() {
        let a = random_matrix(&[3, 2], &[2, 4], 2, 8);
        let t = a.transpose();
        assert_eq!(t.full(), a.full().transpose());
    }

    #[test]
    fn map_modes_matches_dense_sandwich() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = TtMatrix::from_tt(TtTensor::random(&[12, 6], 2, &mut rng), vec![4, 3], vec![3, 2]).unwrap();
        let l0 = DMatrix::from_fn(2, 4, |i, j| (i + 2 * j) as f64 - 1.5);
        let r1 = DMatrix::from_fn(3, 2, |i, j| (i * j) as f64 + 0.5);
        let mapped = a.map_modes(&[Some(&l0), None], &[None, Some(&r1)]).unwrap();
        let id0 = DMatrix::identity(3, 3);
        let want = l0.kronecker(&DMatrix::identity(3, 3)) * a.full() * id0.kronecker(&r1).transpose();
        assert!((mapped.full() - want).norm() < 1e-12);
    }

    #[test]
    fn slice_matches_dense_submatrix() {
        let a = random_matrix(&[3, 3], &[3, 3], 2, 9);
        let s = a.slice(&[1..3, 0..2], &[0..2, 1..3]).unwrap();
        assert!((s.get(&[0, 1], &[1, 0]) - a.get(&[1, 1], &[1, 1])).abs() < 1e-14);
    }
}
