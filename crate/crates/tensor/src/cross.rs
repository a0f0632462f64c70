//! Rank-adaptive TT-cross interpolation with maxvol pivoting.
//!
//! Alternating left/right sweeps over one-site fibers. Each fiber matrix is
//! augmented with a few random multi-indices on the far side, compressed by a
//! truncated SVD, and its rows selected by maxvol to form the nested index
//! sets for the next core. Convergence is judged on a fixed random holdout set.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::core3::Core3;
use crate::error::{Result, TtError};
use crate::linalg;
use crate::maxvol::{maxvol, DEFAULT_TOL};
use crate::tensor::TtTensor;

/// A function sampled on a multi-index grid. Implementations must be
/// deterministic and reentrant.
pub trait CrossOracle: Sync {
    fn mode_sizes(&self) -> &[usize];
    fn eval(&self, index: &[usize]) -> Result<f64>;
}

/// Wraps an infallible closure as an oracle.
pub struct FnOracle<F> {
    modes: Vec<usize>,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    pub fn new(modes: Vec<usize>, f: F) -> Self {
        FnOracle { modes, f }
    }
}

impl<F> CrossOracle for FnOracle<F>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    fn mode_sizes(&self) -> &[usize] {
        &self.modes
    }
    fn eval(&self, index: &[usize]) -> Result<f64> {
        Ok((self.f)(index))
    }
}

#[derive(Clone, Debug)]
pub struct CrossOptions {
    /// Relative holdout RMS target.
    pub eps: f64,
    pub rank_cap: usize,
    pub max_sweeps: usize,
    pub holdout: usize,
    /// Random multi-indices added to each fiber per step.
    pub kick: usize,
    pub seed: u64,
    /// Absolute RMS error below which the approximation is accepted regardless
    /// of the relative target (for functions that vanish up to round-off).
    pub abs_tol: f64,
}

impl Default for CrossOptions {
    fn default() -> Self {
        CrossOptions { eps: 1e-10, rank_cap: 64, max_sweeps: 20, holdout: 1000, kick: 2, seed: 0, abs_tol: 0.0 }
    }
}

#[derive(Clone, Debug)]
pub struct CrossResult {
    pub tt: TtTensor,
    /// Holdout RMS error relative to the holdout RMS of the function.
    pub holdout_error: f64,
    /// Holdout RMS of the sampled function values.
    pub value_rms: f64,
    pub sweeps: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub warning: Option<String>,
}

type MultiIndex = Vec<usize>;

pub fn tt_cross<O: CrossOracle + ?Sized>(oracle: &O, opts: &CrossOptions) -> Result<CrossResult> {
    if !(opts.eps > 0.0) {
        return Err(TtError::InvalidArgument(format!("cross eps must be positive, got {}", opts.eps)));
    }
    if opts.rank_cap == 0 {
        return Err(TtError::InvalidArgument("rank_cap must be at least 1".into()));
    }
    let modes = oracle.mode_sizes().to_vec();
    let d = modes.len();
    if d == 0 || modes.contains(&0) {
        return Err(TtError::Dimension(format!("invalid cross modes {modes:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut evaluations = 0usize;

    let holdout: Vec<MultiIndex> =
        (0..opts.holdout.max(1)).map(|_| modes.iter().map(|&n| rng.gen_range(0..n)).collect()).collect();
    let holdout_vals = eval_batch(oracle, &holdout)?;
    evaluations += holdout.len();
    let value_rms = rms(&holdout_vals);

    if d == 1 {
        let idx: Vec<MultiIndex> = (0..modes[0]).map(|i| vec![i]).collect();
        let vals = eval_batch(oracle, &idx)?;
        evaluations += vals.len();
        let tt = TtTensor::new(vec![Core3::from_vec(1, modes[0], 1, vals)?])?;
        return Ok(CrossResult {
            tt,
            holdout_error: 0.0,
            value_rms,
            sweeps: 1,
            evaluations,
            converged: true,
            warning: None,
        });
    }

    let delta_rel = opts.eps / ((d - 1) as f64).sqrt();
    // left[k]: multi-indices over modes 0..k (bond k); right[k]: over modes k..d.
    let mut left: Vec<Vec<MultiIndex>> = vec![Vec::new(); d + 1];
    let mut right: Vec<Vec<MultiIndex>> = vec![Vec::new(); d + 1];
    left[0] = vec![Vec::new()];
    right[d] = vec![Vec::new()];
    for k in 1..d {
        right[k] = vec![random_tail(&modes, k, &mut rng)];
        left[k] = vec![random_head(&modes, k, &mut rng)];
    }

    let mut best: Option<(TtTensor, f64, f64)> = None;
    let mut sweeps = 0;
    let mut converged = false;
    let mut capped = false;
    for sweep in 0..opts.max_sweeps.max(1) {
        sweeps = sweep + 1;
        let forward = sweep % 2 == 0;
        let mut cores: Vec<Option<Core3>> = vec![None; d];
        capped = false;
        if forward {
            for k in 0..d {
                let n = modes[k];
                let mut cols = right[k + 1].clone();
                if k + 1 < d {
                    for _ in 0..opts.kick {
                        cols.push(random_tail(&modes, k + 1, &mut rng));
                    }
                }
                let rl = left[k].len();
                let idx: Vec<MultiIndex> = (0..cols.len())
                    .flat_map(|b| (0..n).flat_map(move |i| (0..rl).map(move |a| (a, i, b))))
                    .map(|(a, i, b)| join(&left[k][a], i, &cols[b]))
                    .collect();
                let vals = eval_batch(oracle, &idx)?;
                evaluations += vals.len();
                let fiber = DMatrix::from_vec(rl * n, cols.len(), vals);
                if k + 1 == d {
                    cores[k] = Some(Core3::from_left_unfolding(&fiber, rl, n));
                    break;
                }
                let (basis, rank_hit) = compress(&fiber, delta_rel, opts.abs_tol, opts.rank_cap);
                capped |= rank_hit;
                let rows = maxvol(&basis, DEFAULT_TOL)?;
                let core = interpolating(&basis, &rows)?;
                left[k + 1] = rows.iter().map(|&p| extend_head(&left[k][p % rl], p / rl)).collect();
                cores[k] = Some(Core3::from_left_unfolding(&core, rl, n));
            }
        } else {
            for k in (0..d).rev() {
                let n = modes[k];
                let mut rows_set = left[k].clone();
                if k > 0 {
                    for _ in 0..opts.kick {
                        rows_set.push(random_head(&modes, k, &mut rng));
                    }
                }
                let rr = right[k + 1].len();
                let rl = rows_set.len();
                // column-major over (a) fastest then (i, b): right unfolding layout
                let idx: Vec<MultiIndex> = (0..rr)
                    .flat_map(|b| (0..n).flat_map(move |i| (0..rl).map(move |a| (a, i, b))))
                    .map(|(a, i, b)| join(&rows_set[a], i, &right[k + 1][b]))
                    .collect();
                let vals = eval_batch(oracle, &idx)?;
                evaluations += vals.len();
                let fiber = DMatrix::from_vec(rl, n * rr, vals);
                if k == 0 {
                    cores[0] = Some(Core3::from_right_unfolding(&fiber, n, rr));
                    break;
                }
                let (basis, rank_hit) = compress(&fiber.transpose(), delta_rel, opts.abs_tol, opts.rank_cap);
                capped |= rank_hit;
                let rows = maxvol(&basis, DEFAULT_TOL)?;
                let core = interpolating(&basis, &rows)?;
                right[k] = rows.iter().map(|&p| extend_tail(p % n, &right[k + 1][p / n])).collect();
                cores[k] = Some(Core3::from_right_unfolding(&core.transpose(), n, rr));
            }
        }
        let tt = TtTensor::new(cores.into_iter().map(|c| c.expect("every core visited")).collect())?;
        let err_abs = holdout_rmse(&tt, &holdout, &holdout_vals);
        let rel = if value_rms > 0.0 { err_abs / value_rms } else if err_abs == 0.0 { 0.0 } else { f64::INFINITY };
        let better = best.as_ref().map_or(true, |(_, e, _)| err_abs < *e);
        if better {
            best = Some((tt, err_abs, rel));
        }
        if rel <= opts.eps || err_abs <= opts.abs_tol {
            converged = true;
            break;
        }
        if capped && sweep >= 1 {
            break;
        }
    }
    let (tt, _, rel) = best.expect("at least one sweep");
    let warning = if !converged && (capped || rel > 10.0 * opts.eps) {
        Some(format!(
            "cross not converged after {sweeps} sweeps: holdout error {rel:.3e} (target {:.1e}, rank cap {}{})",
            opts.eps,
            opts.rank_cap,
            if capped { ", reached" } else { "" }
        ))
    } else {
        None
    };
    Ok(CrossResult { tt, holdout_error: rel, value_rms, sweeps, evaluations, converged, warning })
}

/// Orthonormal column basis of the truncated fiber, and whether the rank cap was active.
fn compress(fiber: &DMatrix<f64>, delta_rel: f64, abs_tol: f64, rank_cap: usize) -> (DMatrix<f64>, bool) {
    let nrm = linalg::frobenius(fiber);
    let dec = linalg::svd(fiber);
    let tol = (delta_rel * nrm).max(abs_tol * ((fiber.nrows() * fiber.ncols()) as f64).sqrt());
    let free = linalg::truncation_rank(&dec.s, tol, usize::MAX);
    let r = free.min(rank_cap).min(fiber.nrows());
    (dec.truncate(r).u, free > rank_cap)
}

/// `U * inv(U[rows])`
fn interpolating(u: &DMatrix<f64>, rows: &[usize]) -> Result<DMatrix<f64>> {
    let r = u.ncols();
    let sub = DMatrix::from_fn(r, r, |i, j| u[(rows[i], j)]);
    let inv = sub.lu().try_inverse().ok_or(TtError::DegeneratePivot { column: 0, magnitude: 0.0 })?;
    Ok(u * inv)
}

fn eval_batch<O: CrossOracle + ?Sized>(oracle: &O, idx: &[MultiIndex]) -> Result<Vec<f64>> {
    idx.par_iter().map(|i| oracle.eval(i)).collect()
}

fn holdout_rmse(tt: &TtTensor, idx: &[MultiIndex], vals: &[f64]) -> f64 {
    let sq: f64 = idx.iter().zip(vals).map(|(i, v)| (tt.get(i) - v).powi(2)).sum();
    (sq / idx.len() as f64).sqrt()
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

fn join(head: &[usize], i: usize, tail: &[usize]) -> MultiIndex {
    let mut v = Vec::with_capacity(head.len() + 1 + tail.len());
    v.extend_from_slice(head);
    v.push(i);
    v.extend_from_slice(tail);
    v
}

fn extend_head(head: &[usize], i: usize) -> MultiIndex {
    let mut v = head.to_vec();
    v.push(i);
    v
}

fn extend_tail(i: usize, tail: &[usize]) -> MultiIndex {
    let mut v = Vec::with_capacity(tail.len() + 1);
    v.push(i);
    v.extend_from_slice(tail);
    v
}

fn random_head(modes: &[usize], k: usize, rng: &mut ChaCha8Rng) -> MultiIndex {
    modes[..k].iter().map(|&n| rng.gen_range(0..n)).collect()
}

fn random_tail(modes: &[usize], k: usize, rng: &mut ChaCha8Rng) -> MultiIndex {
    modes[k..].iter().map(|&n| rng.gen_range(0..n)).collect()
}
