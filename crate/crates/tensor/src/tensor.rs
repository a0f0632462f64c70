use nalgebra::DMatrix;
use rand::Rng;

use crate::core3::Core3;
use crate::error::{Result, TtError};
use crate::linalg;

/// A tensor in tensor-train format: `X(i1..id) = G1[i1] G2[i2] ... Gd[id]`
/// with boundary ranks equal to one.
#[derive(Clone, Debug, PartialEq)]
pub struct TtTensor {
    cores: Vec<Core3>,
}

impl TtTensor {
    pub fn new(cores: Vec<Core3>) -> Result<Self> {
        if cores.is_empty() {
            return Err(TtError::Layout("a TT needs at least one core".into()));
        }
        if cores[0].left() != 1 || cores[cores.len() - 1].right() != 1 {
            return Err(TtError::Layout("boundary ranks must be 1".into()));
        }
        for (k, w) in cores.windows(2).enumerate() {
            if w[0].right() != w[1].left() {
                return Err(TtError::Layout(format!(
                    "rank mismatch between cores {k} and {}: {} vs {}",
                    k + 1,
                    w[0].right(),
                    w[1].left()
                )));
            }
        }
        if let Some(k) = cores.iter().position(|c| c.mode() == 0) {
            return Err(TtError::Layout(format!("core {k} has an empty mode")));
        }
        Ok(TtTensor { cores })
    }

    /// Rank-one tensor `v1 ∘ v2 ∘ ... ∘ vd`.
    pub fn rank_one(vectors: &[Vec<f64>]) -> Self {
        let cores = vectors
            .iter()
            .map(|v| Core3::from_vec(1, v.len(), 1, v.clone()).expect("shape"))
            .collect();
        TtTensor { cores }
    }

    pub fn zeros(modes: &[usize]) -> Self {
        TtTensor { cores: modes.iter().map(|&n| Core3::zeros(1, n, 1)).collect() }
    }

    pub fn ones(modes: &[usize]) -> Self {
        Self::rank_one(&modes.iter().map(|&n| vec![1.0; n]).collect::<Vec<_>>())
    }

    /// Gaussian-free random TT with uniform entries in `[-1, 1]` and constant inner rank.
    pub fn random<R: Rng + ?Sized>(modes: &[usize], rank: usize, rng: &mut R) -> Self {
        let d = modes.len();
        let cores = (0..d)
            .map(|k| {
                let l = if k == 0 { 1 } else { rank };
                let r = if k + 1 == d { 1 } else { rank };
                Core3::from_fn(l, modes[k], r, |_, _, _| rng.gen_range(-1.0..1.0))
            })
            .collect();
        TtTensor { cores }
    }

    pub fn cores(&self) -> &[Core3] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &Core3 {
        &self.cores[k]
    }

    pub(crate) fn cores_mut(&mut self) -> &mut Vec<Core3> {
        &mut self.cores
    }

    pub fn into_cores(self) -> Vec<Core3> {
        self.cores
    }

    pub fn ndim(&self) -> usize {
        self.cores.len()
    }

    pub fn modes(&self) -> Vec<usize> {
        self.cores.iter().map(Core3::mode).collect()
    }

    /// Ranks `r_0..r_d` (length `d + 1`, both ends equal to one).
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.cores.iter().map(Core3::left).collect();
        r.push(1);
        r
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    /// Number of stored core entries.
    pub fn num_params(&self) -> usize {
        self.cores.iter().map(Core3::len).sum()
    }

    /// Number of entries of the represented full tensor (as `f64` to avoid overflow).
    pub fn full_size(&self) -> f64 {
        self.cores.iter().map(|c| c.mode() as f64).product()
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.ndim());
        let mut v = vec![1.0];
        for (core, &i) in self.cores.iter().zip(index) {
            let mut next = vec![0.0; core.right()];
            for (b, nb) in next.iter_mut().enumerate() {
                *nb = v.iter().enumerate().map(|(a, va)| va * core.get(a, i, b)).sum();
            }
            v = next;
        }
        v[0]
    }

    /// Dense entries in lexicographic order (first index slowest).
    pub fn full(&self) -> Vec<f64> {
        let mut acc = DMatrix::from_element(1, 1, 1.0);
        for core in &self.cores {
            let (_, n, r) = core.shape();
            let p = acc.nrows();
            let prod = &acc * core.right_unfolding();
            let mut next = DMatrix::zeros(p * n, r);
            for b in 0..r {
                for i in 0..n {
                    for row in 0..p {
                        next[(row * n + i, b)] = prod[(row, i + n * b)];
                    }
                }
            }
            acc = next;
        }
        acc.as_slice().to_vec()
    }

    /// TT-SVD of a dense tensor given in lexicographic order, with relative
    /// Frobenius accuracy `eps`.
    pub fn from_full(data: &[f64], modes: &[usize], eps: f64) -> Result<Self> {
        let total: usize = modes.iter().product();
        if total != data.len() || modes.is_empty() {
            return Err(TtError::Dimension(format!(
                "{} entries do not match modes {modes:?}",
                data.len()
            )));
        }
        let d = modes.len();
        let norm = data.iter().map(|v| v * v).sum::<f64>().sqrt();
        let delta = if d > 1 { eps * norm / ((d - 1) as f64).sqrt() } else { 0.0 };
        let mut cores = Vec::with_capacity(d);
        // rem: rows = (rank, current mode) pairs, cols = remaining modes, row-major data
        let mut rank = 1usize;
        let mut rest = total;
        let mut rem: Vec<f64> = data.to_vec(); // rem[a * rest + j]
        for &n in modes.iter().take(d - 1) {
            let rest_next = rest / n;
            let m = DMatrix::from_fn(rank * n, rest_next, |row, j| {
                let a = row % rank;
                let i = row / rank;
                rem[a * rest + i * rest_next + j]
            });
            let dec = linalg::svd(&m);
            let r = linalg::truncation_rank(&dec.s, delta, usize::MAX);
            let dec = dec.truncate(r);
            cores.push(Core3::from_left_unfolding(&dec.u, rank, n));
            let svt = dec.svt();
            rem = (0..r).flat_map(|a| (0..rest_next).map(move |j| (a, j))).map(|(a, j)| svt[(a, j)]).collect();
            rank = r;
            rest = rest_next;
        }
        let n = modes[d - 1];
        cores.push(Core3::from_fn(rank, n, 1, |a, i, _| rem[a * rest + i]));
        TtTensor::new(cores)
    }

    fn check_same_modes(&self, other: &TtTensor) -> Result<()> {
        if self.modes() != other.modes() {
            return Err(TtError::Dimension(format!(
                "mode sizes {:?} vs {:?}",
                self.modes(),
                other.modes()
            )));
        }
        Ok(())
    }

    /// Exact sum; ranks add.
    pub fn add(&self, other: &TtTensor) -> Result<TtTensor> {
        self.check_same_modes(other)?;
        let d = self.ndim();
        if d == 1 {
            let mut c = self.cores[0].clone();
            c.data_mut().iter_mut().zip(other.cores[0].data()).for_each(|(x, y)| *x += y);
            return Ok(TtTensor { cores: vec![c] });
        }
        let cores = (0..d)
            .map(|k| {
                let a = &self.cores[k];
                let b = &other.cores[k];
                let n = a.mode();
                if k == 0 {
                    Core3::from_fn(1, n, a.right() + b.right(), |_, i, r| {
                        if r < a.right() { a.get(0, i, r) } else { b.get(0, i, r - a.right()) }
                    })
                } else if k + 1 == d {
                    Core3::from_fn(a.left() + b.left(), n, 1, |l, i, _| {
                        if l < a.left() { a.get(l, i, 0) } else { b.get(l - a.left(), i, 0) }
                    })
                } else {
                    Core3::from_fn(a.left() + b.left(), n, a.right() + b.right(), |l, i, r| {
                        match (l < a.left(), r < a.right()) {
                            (true, true) => a.get(l, i, r),
                            (false, false) => b.get(l - a.left(), i, r - a.right()),
                            _ => 0.0,
                        }
                    })
                }
            })
            .collect();
        Ok(TtTensor { cores })
    }

    pub fn sub(&self, other: &TtTensor) -> Result<TtTensor> {
        self.add(&other.scaled(-1.0))
    }

    pub fn scaled(&self, c: f64) -> TtTensor {
        let mut out = self.clone();
        out.cores[0].scale(c);
        out
    }

    /// Exact inner product by left-to-right contraction.
    pub fn dot(&self, other: &TtTensor) -> Result<f64> {
        self.check_same_modes(other)?;
        let mut phi = DMatrix::from_element(1, 1, 1.0);
        for (a, b) in self.cores.iter().zip(&other.cores) {
            // w[b0, i, a1] = sum_a0 phi[a0, b0] a[a0, i, a1]
            let w = phi.transpose() * a.right_unfolding();
            let w = Core3::from_right_unfolding(&w, a.mode(), a.right());
            phi = w.left_unfolding().transpose() * b.left_unfolding();
        }
        Ok(phi[(0, 0)])
    }

    /// Frobenius norm, computed from an orthogonalized copy.
    pub fn norm(&self) -> f64 {
        let mut t = self.clone();
        t.orthogonalize_left();
        t.cores[t.ndim() - 1].frobenius()
    }

    /// Makes cores `0..d-1` left-orthonormal; the norm moves into the last core.
    pub fn orthogonalize_left(&mut self) {
        let d = self.ndim();
        for k in 0..d.saturating_sub(1) {
            let (l, n, _) = self.cores[k].shape();
            let (q, r) = linalg::thin_qr(&self.cores[k].left_unfolding());
            self.cores[k] = Core3::from_left_unfolding(&q, l, n);
            self.cores[k + 1] = self.cores[k + 1].mul_left(&r);
        }
    }

    /// Makes cores `1..d` right-orthonormal; the norm moves into the first core.
    pub fn orthogonalize_right(&mut self) {
        let d = self.ndim();
        for k in (1..d).rev() {
            let (_, n, r) = self.cores[k].shape();
            let (q, rr) = linalg::thin_qr(&self.cores[k].right_unfolding().transpose());
            self.cores[k] = Core3::from_right_unfolding(&q.transpose(), n, r);
            self.cores[k - 1] = self.cores[k - 1].mul_right(&rr.transpose());
        }
    }

    /// TT-rounding to relative Frobenius accuracy `eps`.
    pub fn round(&self, eps: f64) -> TtTensor {
        self.round_with(eps, usize::MAX)
    }

    /// TT-rounding with an additional rank cap (the accuracy bound only holds
    /// when the cap is not active).
    pub fn round_with(&self, eps: f64, max_rank: usize) -> TtTensor {
        let d = self.ndim();
        let mut t = self.clone();
        t.orthogonalize_right();
        let norm = t.cores[0].frobenius();
        if norm == 0.0 || !norm.is_finite() {
            return TtTensor::zeros(&self.modes());
        }
        if d == 1 {
            return t;
        }
        let delta = eps.max(0.0) * norm / ((d - 1) as f64).sqrt();
        for k in 0..d - 1 {
            let (l, n, _) = t.cores[k].shape();
            let dec = linalg::svd(&t.cores[k].left_unfolding());
            let r = linalg::truncation_rank(&dec.s, delta, max_rank);
            let dec = dec.truncate(r);
            t.cores[k] = Core3::from_left_unfolding(&dec.u, l, n);
            t.cores[k + 1] = t.cores[k + 1].mul_left(&dec.svt());
        }
        t
    }

    /// Applies a per-direction linear map to the mode index (`None` leaves the
    /// direction unchanged). Ranks are preserved.
    pub fn map_modes(&self, maps: &[Option<&DMatrix<f64>>]) -> Result<TtTensor> {
        if maps.len() != self.ndim() {
            return Err(TtError::Dimension(format!("{} maps for {} cores", maps.len(), self.ndim())));
        }
        let mut cores = Vec::with_capacity(self.ndim());
        for (k, (core, map)) in self.cores.iter().zip(maps).enumerate() {
            cores.push(match map {
                Some(m) => {
                    if m.ncols() != core.mode() {
                        return Err(TtError::Dimension(format!(
                            "map for core {k} has {} columns, mode is {}",
                            m.ncols(),
                            core.mode()
                        )));
                    }
                    core.map_mode(m)
                }
                None => core.clone(),
            });
        }
        Ok(TtTensor { cores })
    }

    /// Restricts every direction to an index range. Ranks are preserved.
    pub fn slice(&self, ranges: &[std::ops::Range<usize>]) -> Result<TtTensor> {
        if ranges.len() != self.ndim() {
            return Err(TtError::Dimension("one range per direction required".into()));
        }
        for (k, (c, r)) in self.cores.iter().zip(ranges).enumerate() {
            if r.end > c.mode() || r.is_empty() {
                return Err(TtError::Dimension(format!("range {r:?} invalid for mode {k} of size {}", c.mode())));
            }
        }
        let cores = self.cores.iter().zip(ranges).map(|(c, r)| c.slice_mode(r.clone())).collect();
        Ok(TtTensor { cores })
    }

    /// Embeds into larger modes, placing the current entries at `offsets` and zeros elsewhere.
    pub fn pad(&self, modes: &[usize], offsets: &[usize]) -> Result<TtTensor> {
        if modes.len() != self.ndim() || offsets.len() != self.ndim() {
            return Err(TtError::Dimension("one size/offset per direction required".into()));
        }
        let mut cores = Vec::with_capacity(self.ndim());
        for (k, c) in self.cores.iter().enumerate() {
            if offsets[k] + c.mode() > modes[k] {
                return Err(TtError::Dimension(format!("padding of mode {k} out of range")));
            }
            let off = offsets[k];
            cores.push(Core3::from_fn(c.left(), modes[k], c.right(), |a, i, b| {
                if i >= off && i < off + c.mode() { c.get(a, i - off, b) } else { 0.0 }
            }));
        }
        Ok(TtTensor { cores })
    }
}
