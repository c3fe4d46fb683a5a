//! Seeded benchmark workloads: one set of fields per sweep point.
//!
//! Field contents are generated logically (per component and site) from a
//! SplitMix64 stream, then written through the index map, so every layout
//! and vector length sees bitwise-identical logical data. That is what
//! makes the correctness gate meaningful.

use gridlane_core::kernels::lb::equilibrium;
use gridlane_core::rng::SplitMix64;
use gridlane_core::{
    kernel_lb_collision, kernel_lb_propagation, kernel_scale, kernel_triad, ConstantTable,
    FieldPair, GridShape, KernelError, LaunchConfig, LayoutDescriptor, LayoutScheme, SuiteKernel,
};

/// Relaxation time used by benchmark collisions.
pub const BENCH_TAU: f64 = 0.8;

/// Scale constant for the correctness gate: visibly transforms the field.
pub const GATE_SCALE_A: f64 = 2.0;

/// Scale constant for timed runs: identical memory traffic, but values stay
/// bounded no matter how many repetitions run.
pub const TIMED_SCALE_A: f64 = 1.0;

const TRIAD_Q: f64 = 3.0;

pub enum Workload {
    Scale {
        field: FieldPair,
        constants: ConstantTable,
    },
    Triad {
        a: FieldPair,
        b: FieldPair,
        c: FieldPair,
        constants: ConstantTable,
    },
    Collision {
        f: FieldPair,
        shape: GridShape,
    },
    Propagation {
        cur: FieldPair,
        next: FieldPair,
        shape: GridShape,
    },
}

fn seeded_field(
    shape: &GridShape,
    ncomp: usize,
    scheme: LayoutScheme,
    vvl: usize,
    fill: impl Fn(&mut SplitMix64, &mut Vec<f64>),
    rng: &mut SplitMix64,
) -> Result<FieldPair, KernelError> {
    let layout = LayoutDescriptor::new(shape.nsites(), ncomp, scheme, vvl)?;
    let mut pair = FieldPair::new(layout)?;
    let mut values = Vec::with_capacity(shape.nsites() * ncomp);
    fill(rng, &mut values);
    pair.write_logical(&values)?;
    Ok(pair)
}

/// A distribution field near equilibrium: density in [0.9, 1.1), small
/// velocities. Stable under arbitrarily many collision steps.
fn distribution_values(nsites: usize, rng: &mut SplitMix64, out: &mut Vec<f64>) {
    for _ in 0..nsites {
        let rho = rng.next_in(0.9, 1.1);
        let ux = rng.next_in(-0.05, 0.05);
        let uy = rng.next_in(-0.05, 0.05);
        out.extend_from_slice(&equilibrium(rho, ux, uy));
    }
}

impl Workload {
    /// Build the fields for one kernel at one sweep point. `scale_a` picks
    /// the scale constant (gate vs timed).
    pub fn build(
        kernel: SuiteKernel,
        shape: &GridShape,
        scheme: LayoutScheme,
        vvl: usize,
        seed: u64,
        scale_a: f64,
    ) -> Result<Self, KernelError> {
        let mut rng = SplitMix64::new(seed);
        let nsites = shape.nsites();
        match kernel {
            SuiteKernel::Scale => {
                let field = seeded_field(
                    shape,
                    3,
                    scheme,
                    vvl,
                    |rng, out| {
                        for _ in 0..nsites * 3 {
                            out.push(rng.next_in(0.5, 2.0));
                        }
                    },
                    &mut rng,
                )?;
                let mut constants = ConstantTable::new();
                constants.set("a", scale_a);
                Ok(Workload::Scale { field, constants })
            }
            SuiteKernel::Triad => {
                let random = |rng: &mut SplitMix64, out: &mut Vec<f64>| {
                    for _ in 0..nsites {
                        out.push(rng.next_in(-1.0, 1.0));
                    }
                };
                let b = seeded_field(shape, 1, scheme, vvl, random, &mut rng)?;
                let c = seeded_field(shape, 1, scheme, vvl, random, &mut rng)?;
                let a = seeded_field(shape, 1, scheme, vvl, |_, out| out.resize(nsites, 0.0), &mut rng)?;
                let mut constants = ConstantTable::new();
                constants.set("q", TRIAD_Q);
                Ok(Workload::Triad { a, b, c, constants })
            }
            SuiteKernel::Collision => {
                let f = seeded_field(
                    shape,
                    9,
                    scheme,
                    vvl,
                    |rng, out| distribution_values(nsites, rng, out),
                    &mut rng,
                )?;
                Ok(Workload::Collision {
                    f,
                    shape: shape.clone(),
                })
            }
            SuiteKernel::Propagation => {
                let cur = seeded_field(
                    shape,
                    9,
                    scheme,
                    vvl,
                    |rng, out| distribution_values(nsites, rng, out),
                    &mut rng,
                )?;
                let next = FieldPair::new(LayoutDescriptor::new(nsites, 9, scheme, vvl)?)?;
                Ok(Workload::Propagation {
                    cur,
                    next,
                    shape: shape.clone(),
                })
            }
        }
    }

    /// One kernel application.
    pub fn step(&mut self, cfg: &LaunchConfig) -> Result<(), KernelError> {
        match self {
            Workload::Scale { field, constants } => kernel_scale(field, constants, cfg),
            Workload::Triad { a, b, c, constants } => kernel_triad(a, b, c, constants, cfg),
            Workload::Collision { f, shape } => kernel_lb_collision(f, shape, BENCH_TAU, cfg),
            Workload::Propagation { cur, next, shape } => {
                kernel_lb_propagation(next, cur, shape, cfg)?;
                std::mem::swap(cur, next);
                Ok(())
            }
        }
    }

    /// Logical contents of the field the kernel writes.
    pub fn output(&mut self) -> Result<Vec<f64>, KernelError> {
        let pair = match self {
            Workload::Scale { field, .. } => field,
            Workload::Triad { a, .. } => a,
            Workload::Collision { f, .. } => f,
            Workload::Propagation { cur, .. } => cur,
        };
        Ok(pair.read_logical()?)
    }
}
