use nalgebra::DMatrix;

use crate::error::{Result, TtError};

/// Order-3 TT core of shape `(left, mode, right)`.
///
/// Storage is column-major with the left rank index fastest, so both the left
/// unfolding `(left*mode) x right` and the right unfolding `left x (mode*right)`
/// are plain reinterpretations of `data`.
#[derive(Clone, Debug, PartialEq)]
pub struct Core3 {
    left: usize,
    mode: usize,
    right: usize,
    data: Vec<f64>,
}

impl Core3 {
    pub fn zeros(left: usize, mode: usize, right: usize) -> Self {
        Core3 { left, mode, right, data: vec![0.0; left * mode * right] }
    }

    pub fn from_vec(left: usize, mode: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != left * mode * right {
            return Err(TtError::Layout(format!(
                "core ({left},{mode},{right}) needs {} entries, got {}",
                left * mode * right,
                data.len()
            )));
        }
        Ok(Core3 { left, mode, right, data })
    }

    /// Builds a core from a closure over `(a, i, b)`.
    pub fn from_fn(left: usize, mode: usize, right: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(left * mode * right);
        for b in 0..right {
            for i in 0..mode {
                for a in 0..left {
                    data.push(f(a, i, b));
                }
            }
        }
        Core3 { left, mode, right, data }
    }

    #[inline]
    pub fn left(&self) -> usize {
        self.left
    }
    #[inline]
    pub fn mode(&self) -> usize {
        self.mode
    }
    #[inline]
    pub fn right(&self) -> usize {
        self.right
    }
    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.left, self.mode, self.right)
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, a: usize, i: usize, b: usize) -> usize {
        a + self.left * (i + self.mode * b)
    }
    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[self.index(a, i, b)]
    }
    #[inline]
    pub fn set(&mut self, a: usize, i: usize, b: usize, v: f64) {
        let k = self.index(a, i, b);
        self.data[k] = v;
    }
    #[inline]
    pub fn add_at(&mut self, a: usize, i: usize, b: usize, v: f64) {
        let k = self.index(a, i, b);
        self.data[k] += v;
    }

    pub fn left_unfolding(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.left * self.mode, self.right, &self.data)
    }

    pub fn right_unfolding(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.left, self.mode * self.right, &self.data)
    }

    pub fn from_left_unfolding(m: &DMatrix<f64>, left: usize, mode: usize) -> Self {
        assert_eq!(m.nrows(), left * mode, "left unfolding row count");
        Core3 { left, mode, right: m.ncols(), data: m.as_slice().to_vec() }
    }

    pub fn from_right_unfolding(m: &DMatrix<f64>, mode: usize, right: usize) -> Self {
        assert_eq!(m.ncols(), mode * right, "right unfolding column count");
        Core3 { left: m.nrows(), mode, right, data: m.as_slice().to_vec() }
    }

    /// `M * core` along the left rank: result shape `(M.rows, mode, right)`.
    pub fn mul_left(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!(m.ncols(), self.left);
        let prod = m * self.right_unfolding();
        Core3::from_right_unfolding(&prod, self.mode, self.right)
    }

    /// `core * M` along the right rank: result shape `(left, mode, M.cols)`.
    pub fn mul_right(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), self.right);
        let prod = self.left_unfolding() * m;
        Core3::from_left_unfolding(&prod, self.left, self.mode)
    }

    /// Applies a linear map along the mode index: `out[a, q, b] = sum_i map[q, i] core[a, i, b]`.
    pub fn map_mode(&self, map: &DMatrix<f64>) -> Self {
        assert_eq!(map.ncols(), self.mode);
        let q = map.nrows();
        let mut out = Core3::zeros(self.left, q, self.right);
        for b in 0..self.right {
            for i in 0..self.mode {
                let src = &self.data[self.left * (i + self.mode * b)..self.left * (i + 1 + self.mode * b)];
                if src.iter().all(|v| *v == 0.0) {
                    continue;
                }
                for qq in 0..q {
                    let w = map[(qq, i)];
                    if w == 0.0 {
                        continue;
                    }
                    let base = self.left * (qq + q * b);
                    for (a, s) in src.iter().enumerate() {
                        out.data[base + a] += w * s;
                    }
                }
            }
        }
        out
    }

    /// Keeps the mode indices in `range`.
    pub fn slice_mode(&self, range: std::ops::Range<usize>) -> Self {
        let n = range.len();
        Core3::from_fn(self.left, n, self.right, |a, i, b| self.get(a, range.start + i, b))
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unfoldings_share_layout() {
        let c = Core3::from_fn(2, 3, 4, |a, i, b| (a * 100 + i * 10 + b) as f64);
        let l = c.left_unfolding();
        let r = c.right_unfolding();
        for a in 0..2 {
            for i in 0..3 {
                for b in 0..4 {
                    assert_eq!(l[(a + 2 * i, b)], c.get(a, i, b));
                    assert_eq!(r[(a, i + 3 * b)], c.get(a, i, b));
                }
            }
        }
    }

    #[test]
    fn map_mode_matches_loop() {
        let c = Core3::from_fn(2, 3, 2, |a, i, b| (1 + a + 2 * i + 3 * b) as f64);
        let m = DMatrix::from_fn(4, 3, |q, i| (q as f64) - (i as f64) * 0.5);
        let out = c.map_mode(&m);
        for a in 0..2 {
            for q in 0..4 {
                for b in 0..2 {
                    let want: f64 = (0..3).map(|i| m[(q, i)] * c.get(a, i, b)).sum();
                    assert!((out.get(a, q, b) - want).abs() < 1e-14);
                }
            }
        }
    }
}
