//! Reductions over target buffers.
//!
//! The two-phase shape is deliberate: the application builds the input
//! array with ordinary kernels, then hands it to a reduction — there is no
//! fused kernel-plus-reduce. Summation comes in two flavors:
//!
//! * deterministic — a fixed pairwise tree over 256-element blocks. The
//!   tree depends only on `n`, never on worker count or backend, so the
//!   result is bitwise reproducible and its rounding error grows like
//!   `O(log n)` instead of the left-fold's `O(n)`.
//! * non-deterministic — per-worker left folds combined at the end; cheap,
//!   and within `1e-12 * n * max|x|` of the serial left-to-right sum.
//!
//! Min and max are exact either way.

use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

use crate::exec::{Backend, LaunchConfig};
use crate::memspace::{MemError, TargetBuffer};

/// Elements per leaf block of the deterministic summation tree.
pub const SUM_BLOCK: usize = 256;

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("reduction over {n} elements exceeds buffer count {count}")]
    OutOfBounds { n: usize, count: usize },
    #[error(transparent)]
    Mem(#[from] MemError),
}

/// The supported reduction operators. Sum is associative-and-commutative
/// only up to floating-point reassociation; min and max are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionOp {
    Sum,
    Min,
    Max,
}

/// Apply a reduction operator to `buf[0..n)`.
pub fn reduce(
    op: ReductionOp,
    buf: &TargetBuffer<f64>,
    n: usize,
    cfg: &LaunchConfig,
) -> Result<f64, ReduceError> {
    match op {
        ReductionOp::Sum => target_double_sum(buf, n, cfg),
        ReductionOp::Min => target_double_min(buf, n, cfg),
        ReductionOp::Max => target_double_max(buf, n, cfg),
    }
}

/// Sum `buf[0..n)`.
///
/// With `cfg.deterministic` the combination tree is fixed (pairwise over
/// [`SUM_BLOCK`]-element blocks) and the result is bitwise identical for
/// any backend and worker count. Otherwise the grouping follows the worker
/// decomposition.
pub fn target_double_sum(
    buf: &TargetBuffer<f64>,
    n: usize,
    cfg: &LaunchConfig,
) -> Result<f64, ReduceError> {
    let data = checked_prefix(buf, n)?;
    if cfg.deterministic {
        Ok(deterministic_sum(data, workers(cfg)))
    } else {
        Ok(folded_sum(data, workers(cfg)))
    }
}

/// Exact minimum of `buf[0..n)`, `n >= 1`. Inputs are expected NaN-free;
/// `-0.0` compares equal to `+0.0` and either may be returned.
pub fn target_double_min(
    buf: &TargetBuffer<f64>,
    n: usize,
    cfg: &LaunchConfig,
) -> Result<f64, ReduceError> {
    extremum(buf, n, cfg, f64::min)
}

/// Exact maximum of `buf[0..n)`, `n >= 1`.
pub fn target_double_max(
    buf: &TargetBuffer<f64>,
    n: usize,
    cfg: &LaunchConfig,
) -> Result<f64, ReduceError> {
    extremum(buf, n, cfg, f64::max)
}

fn checked_prefix(buf: &TargetBuffer<f64>, n: usize) -> Result<&[f64], ReduceError> {
    let data = buf.as_slice()?;
    if n > data.len() {
        return Err(ReduceError::OutOfBounds {
            n,
            count: data.len(),
        });
    }
    Ok(&data[..n])
}

fn workers(cfg: &LaunchConfig) -> usize {
    match cfg.backend {
        Backend::Serial => 1,
        Backend::Threads => cfg.nworkers.max(1),
    }
}

/// The reference pairwise tree: split at the midpoint down to single
/// elements. This function defines the deterministic result.
fn pairwise(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        len => {
            let mid = len / 2;
            pairwise(&xs[..mid]) + pairwise(&xs[mid..])
        }
    }
}

fn deterministic_sum(data: &[f64], nworkers: usize) -> f64 {
    let nblocks = data.len().div_ceil(SUM_BLOCK);
    if nblocks <= 1 || nworkers <= 1 {
        // The parallel path computes exactly this; skip the thread setup.
        let block_sums: Vec<f64> = data.chunks(SUM_BLOCK).map(pairwise).collect();
        return pairwise(&block_sums);
    }

    let mut block_sums = vec![0.0; nblocks];
    let nworkers = nworkers.min(nblocks);
    std::thread::scope(|s| {
        let mut rest: &mut [f64] = &mut block_sums;
        let mut lo = 0;
        for w in 0..nworkers {
            let hi = (w + 1) * nblocks / nworkers;
            let (mine, tail) = rest.split_at_mut(hi - lo);
            rest = tail;
            let first_block = lo;
            s.spawn(move || {
                for (i, out) in mine.iter_mut().enumerate() {
                    let block = first_block + i;
                    let start = block * SUM_BLOCK;
                    let end = (start + SUM_BLOCK).min(data.len());
                    *out = pairwise(&data[start..end]);
                }
            });
            lo = hi;
        }
    });
    pairwise(&block_sums)
}

fn folded_sum(data: &[f64], nworkers: usize) -> f64 {
    let nworkers = nworkers.min(data.len()).max(1);
    if nworkers == 1 {
        return data.iter().sum();
    }
    let mut partials = vec![0.0; nworkers];
    std::thread::scope(|s| {
        for (w, out) in partials.iter_mut().enumerate() {
            let lo = w * data.len() / nworkers;
            let hi = (w + 1) * data.len() / nworkers;
            s.spawn(move || *out = data[lo..hi].iter().sum());
        }
    });
    partials.iter().sum()
}

fn extremum(
    buf: &TargetBuffer<f64>,
    n: usize,
    cfg: &LaunchConfig,
    combine: fn(f64, f64) -> f64,
) -> Result<f64, ReduceError> {
    if n == 0 {
        return Err(ReduceError::InvalidArgument(
            "extremum of an empty range".into(),
        ));
    }
    let data = checked_prefix(buf, n)?;
    let nworkers = workers(cfg).min(data.len());
    if nworkers <= 1 {
        return Ok(data.iter().copied().fold(data[0], combine));
    }

    let mut partials = vec![f64::NAN; nworkers];
    let next = AtomicUsize::new(0);
    let nranges = nworkers;
    std::thread::scope(|s| {
        for out in partials.iter_mut() {
            let next = &next;
            s.spawn(move || {
                let mut acc: Option<f64> = None;
                loop {
                    let r = next.fetch_add(1, Ordering::Relaxed);
                    if r >= nranges {
                        break;
                    }
                    let lo = r * data.len() / nranges;
                    let hi = (r + 1) * data.len() / nranges;
                    let local = data[lo..hi].iter().copied().fold(data[lo], combine);
                    acc = Some(match acc {
                        Some(a) => combine(a, local),
                        None => local,
                    });
                }
                if let Some(a) = acc {
                    *out = a;
                }
            });
        }
    });
    Ok(partials
        .into_iter()
        .filter(|v| !v.is_nan())
        .fold(data[0], combine))
}
