//! The benchmark kernel suite: the scale and triad bandwidth kernels here,
//! the lattice-Boltzmann pair in [`lb`].
//!
//! Every kernel carries an analytic cost model — flops and bytes per site,
//! counting each logically read and each logically written element once at
//! 8 bytes, with no cache modeling. That convention matches how
//! operational intensity is used against STREAM-style bandwidth figures.

pub mod lb;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::exec::{launch, synchronize, ExecError, LaunchConfig};
use crate::layout::LayoutError;
use crate::memspace::{ConstantTable, FieldPair, MemError};
use crate::reduce::ReduceError;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("nonpositive density at site {site} (coords {coords:?})")]
    NonpositiveDensity { site: usize, coords: Vec<usize> },
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<KernelError>,
    },
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Mem(#[from] MemError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
}

/// Analytic per-site cost of one kernel application.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelCostModel {
    pub flops_per_site: u64,
    pub bytes_per_site: u64,
}

impl KernelCostModel {
    /// Operational intensity in flops per byte.
    pub fn oi(&self) -> f64 {
        self.flops_per_site as f64 / self.bytes_per_site as f64
    }

    /// Total flops over a grid of `nsites` logical sites.
    pub fn flops(&self, nsites: usize) -> u64 {
        self.flops_per_site * nsites as u64
    }

    /// Total bytes over a grid of `nsites` logical sites.
    pub fn bytes(&self, nsites: usize) -> u64 {
        self.bytes_per_site * nsites as u64
    }
}

/// scale: 3 components read and written (48 B), one multiply each (3 flops).
pub const SCALE_COST: KernelCostModel = KernelCostModel {
    flops_per_site: 3,
    bytes_per_site: 48,
};

/// triad: reads b and c, writes a (24 B); multiply plus add (2 flops).
pub const TRIAD_COST: KernelCostModel = KernelCostModel {
    flops_per_site: 2,
    bytes_per_site: 24,
};

/// The kernels driven by the benchmark harness and CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SuiteKernel {
    Scale,
    Triad,
    Collision,
    Propagation,
}

impl SuiteKernel {
    pub const ALL: [SuiteKernel; 4] = [
        SuiteKernel::Scale,
        SuiteKernel::Triad,
        SuiteKernel::Collision,
        SuiteKernel::Propagation,
    ];

    pub fn cost_model(&self) -> KernelCostModel {
        match self {
            SuiteKernel::Scale => SCALE_COST,
            SuiteKernel::Triad => TRIAD_COST,
            SuiteKernel::Collision => lb::COLLISION_COST,
            SuiteKernel::Propagation => lb::PROPAGATION_COST,
        }
    }
}

impl FromStr for SuiteKernel {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scale" => Ok(SuiteKernel::Scale),
            "triad" => Ok(SuiteKernel::Triad),
            "collision" => Ok(SuiteKernel::Collision),
            "propagation" => Ok(SuiteKernel::Propagation),
            other => Err(KernelError::InvalidField(format!(
                "unknown kernel `{other}` (expected scale, triad, collision or propagation)"
            ))),
        }
    }
}

impl fmt::Display for SuiteKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SuiteKernel::Scale => write!(f, "scale"),
            SuiteKernel::Triad => write!(f, "triad"),
            SuiteKernel::Collision => write!(f, "collision"),
            SuiteKernel::Propagation => write!(f, "propagation"),
        }
    }
}

/// Multiply every element of a 3-component field by the constant `a`:
/// `field[c, s] <- a * field[c, s]`.
pub fn kernel_scale(
    field: &mut FieldPair,
    constants: &ConstantTable,
    cfg: &LaunchConfig,
) -> Result<(), KernelError> {
    let ncomp = field.layout().ncomponents();
    if ncomp != 3 {
        return Err(KernelError::InvalidField(format!(
            "scale expects 3 components per site, got {ncomp}"
        )));
    }
    let a = constants.get("a")?;
    let layout = field.layout().clone();
    let view = field.write_view()?;
    launch(cfg, &layout, |chunk| {
        for comp in 0..3 {
            // Contiguous-run fast path where the layout allows, identical
            // arithmetic either way.
            let run = view.with_lane_run(chunk, comp, |run| {
                for v in run {
                    *v *= a;
                }
            });
            if run.is_none() {
                chunk.for_each_lane(|lane| {
                    view.set(chunk, lane, comp, a * view.get(chunk, lane, comp));
                });
            }
        }
    })?;
    synchronize();
    Ok(())
}

/// STREAM triad over single-component fields: `a[s] <- b[s] + q * c[s]`.
pub fn kernel_triad(
    a_out: &mut FieldPair,
    b_in: &FieldPair,
    c_in: &FieldPair,
    constants: &ConstantTable,
    cfg: &LaunchConfig,
) -> Result<(), KernelError> {
    for (name, pair) in [("a", &*a_out), ("b", b_in), ("c", c_in)] {
        if pair.layout().ncomponents() != 1 {
            return Err(KernelError::InvalidField(format!(
                "triad field `{name}` must have 1 component per site"
            )));
        }
    }
    let nsites = a_out.layout().nsites_logical();
    if b_in.layout().nsites_logical() != nsites || c_in.layout().nsites_logical() != nsites {
        return Err(KernelError::InvalidField(format!(
            "triad fields differ in size: a {nsites}, b {}, c {}",
            b_in.layout().nsites_logical(),
            c_in.layout().nsites_logical()
        )));
    }
    let q = constants.get("q")?;
    let layout = a_out.layout().clone();
    let a = a_out.write_view()?;
    let b = b_in.read_view()?;
    let c = c_in.read_view()?;
    launch(cfg, &layout, |chunk| {
        // Single-component fields are always lane-contiguous; the run form
        // lets the compiler vectorize the lane loop.
        let fast = a.with_lane_run(chunk, 0, |dst| {
            match (b.lane_run(chunk, 0), c.lane_run(chunk, 0)) {
                (Some(bs), Some(cs)) => {
                    for ((d, &bv), &cv) in dst.iter_mut().zip(bs).zip(cs) {
                        *d = bv + q * cv;
                    }
                    true
                }
                _ => false,
            }
        });
        if fast != Some(true) {
            chunk.for_each_lane(|lane| {
                let site = chunk.site(lane);
                a.set(chunk, lane, 0, b.get(0, site) + q * c.get(0, site));
            });
        }
    })?;
    synchronize();
    Ok(())
}
