//! Timing harness and in-process STREAM measurement.
//!
//! The reported statistic is the minimum over repetitions — the least
//! noise-contaminated estimate of the true cost on an otherwise idle
//! machine — with mean and standard deviation kept for diagnostics. Byte
//! and flop totals are analytic, from the kernel cost models, not from
//! hardware counters.

pub mod record;
pub mod roofline;

use std::time::Instant;

use thiserror::Error;

pub use record::BenchRecord;
pub use roofline::{
    attainable_flops, classify, pct_of_stream, ridge_point, BoundClass, MachineModel,
};

use crate::exec::LaunchConfig;
use crate::kernels::{kernel_triad, KernelError, TRIAD_COST};
use crate::layout::{LayoutDescriptor, LayoutError, LayoutScheme};
use crate::memspace::{ConstantTable, FieldPair, MemError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Mem(#[from] MemError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

/// Wall-clock statistics over the timed repetitions, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub min_s: f64,
    pub mean_s: f64,
    pub stddev_s: f64,
    pub reps: usize,
}

/// Run `warmup` untimed and `reps` timed executions of a kernel closure and
/// return the timing statistics. Uses a monotonic clock; a kernel failure
/// aborts the measurement.
pub fn measure(
    mut run: impl FnMut() -> Result<(), KernelError>,
    warmup: usize,
    reps: usize,
) -> Result<Timing, BenchError> {
    if reps == 0 {
        return Err(BenchError::InvalidArgument("reps must be >= 1".into()));
    }
    for _ in 0..warmup {
        run()?;
    }
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        run()?;
        times.push(start.elapsed().as_secs_f64());
    }
    let min_s = times.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_s = times.iter().sum::<f64>() / reps as f64;
    let var = if reps > 1 {
        times.iter().map(|t| (t - mean_s) * (t - mean_s)).sum::<f64>() / (reps - 1) as f64
    } else {
        0.0
    };
    Ok(Timing {
        min_s,
        mean_s,
        stddev_s: var.sqrt(),
        reps,
    })
}

/// Working-set advice for STREAM sizing when nothing better is known.
pub const DEFAULT_LLC_ESTIMATE_BYTES: usize = 32 * 1024 * 1024;

/// Default STREAM site count: three arrays four times the last-level-cache
/// estimate, 24 bytes per site.
pub fn default_stream_sites() -> usize {
    4 * DEFAULT_LLC_ESTIMATE_BYTES / 24
}

/// One in-process STREAM measurement.
#[derive(Debug, Clone)]
pub struct StreamMeasurement {
    /// `24 * n_sites / min_time`.
    pub bandwidth_bytes_per_s: f64,
    pub timing: Timing,
    pub n_sites: usize,
    /// Set when the working set does not comfortably exceed the cache; the
    /// number is then an in-cache rate, not a memory bandwidth. Recorded as
    /// a warning, not an error.
    pub below_cache_threshold: bool,
}

/// Measure practically attainable memory bandwidth by timing the triad
/// kernel over three `n_sites`-element fields.
///
/// The output field is validated against `b + q * c` once before any
/// timing is accepted.
pub fn stream_triad_bandwidth(
    n_sites: usize,
    warmup: usize,
    reps: usize,
    cfg: &LaunchConfig,
) -> Result<StreamMeasurement, BenchError> {
    if n_sites == 0 {
        return Err(BenchError::InvalidArgument("n_sites must be >= 1".into()));
    }
    let layout = LayoutDescriptor::new(n_sites, 1, LayoutScheme::Aos, cfg.vvl)?;
    let mut a = FieldPair::new(layout.clone())?;
    let mut b = FieldPair::new(layout.clone())?;
    let mut c = FieldPair::new(layout)?;
    let b_at = |i: usize| 1.0 + (i % 7) as f64 * 0.125;
    let c_at = |i: usize| 2.0 - (i % 5) as f64 * 0.25;
    for (i, v) in b.host_mut().iter_mut().enumerate() {
        *v = b_at(i);
    }
    for (i, v) in c.host_mut().iter_mut().enumerate() {
        *v = c_at(i);
    }
    b.copy_to_target()?;
    c.copy_to_target()?;
    let q = 3.0;
    let mut constants = ConstantTable::new();
    constants.set("q", q);

    // Correctness gate before the stopwatch starts. The check reads the
    // target buffer directly and recomputes the expected values, so it
    // leaves no host-side pages hot that the timed passes would then
    // compete with.
    kernel_triad(&mut a, &b, &c, &constants, cfg)?;
    {
        let got = a.target().as_slice()?;
        for (site, out) in got.iter().enumerate().take(n_sites) {
            let want = b_at(site) + q * c_at(site);
            if out.to_bits() != want.to_bits() {
                return Err(BenchError::InvalidArgument(format!(
                    "triad validation failed at site {site}: got {out}, want {want}"
                )));
            }
        }
    }

    let timing = measure(
        || kernel_triad(&mut a, &b, &c, &constants, cfg),
        warmup,
        reps,
    )?;
    Ok(StreamMeasurement {
        bandwidth_bytes_per_s: TRIAD_COST.bytes(n_sites) as f64 / timing.min_s,
        timing,
        n_sites,
        below_cache_threshold: TRIAD_COST.bytes(n_sites) < 4 * DEFAULT_LLC_ESTIMATE_BYTES as u64,
    })
}
