//! Portable data-parallel kernels for structured grids.
//!
//! The crate separates the four concerns that decide performance of
//! bandwidth-bound grid codes, so each can be tuned without touching kernel
//! code:
//!
//! * [`layout`] — how multi-valued grid data is linearized in memory
//!   (AoS, SoA, or AoSoA with a tunable short-array length);
//! * [`memspace`] — explicit host/target buffer pairs with whole-field,
//!   subset and constant copies;
//! * [`exec`] — kernel launches over chunks of sites distributed across
//!   workers, with an inner lane loop of tunable extent (the virtual
//!   vector length) as the vectorization target;
//! * [`mod@reduce`] — sum/min/max reductions over target buffers, with a
//!   bitwise-reproducible deterministic mode.
//!
//! On top sit [`kernels`] — a scale kernel, the STREAM triad and a D2Q9
//! lattice-Boltzmann collision/propagation pair with analytic cost models —
//! and [`mod@bench`], a minimum-of-repetitions timing harness with roofline
//! arithmetic (ridge points, attainable flop rates, percent-of-STREAM).

pub mod bench;
pub mod exec;
pub mod kernels;
pub mod layout;
pub mod memspace;
pub mod reduce;
pub mod rng;

pub use bench::{
    attainable_flops, classify, measure, pct_of_stream, ridge_point, stream_triad_bandwidth,
    BenchError, BenchRecord, BoundClass, MachineModel, StreamMeasurement, Timing,
};
pub use exec::{
    launch, synchronize, Backend, ExecError, LaunchConfig, ReadView, SiteChunk, WriteView,
};
pub use kernels::{
    kernel_scale, kernel_triad, KernelCostModel, KernelError, SuiteKernel, SCALE_COST, TRIAD_COST,
};
pub use kernels::lb::{
    kernel_lb_collision, kernel_lb_propagation, run_lb_miniapp, D2Q9State, StepDiagnostics,
    COLLISION_COST, PROPAGATION_COST,
};
pub use layout::{GridShape, LayoutDescriptor, LayoutError, LayoutScheme};
pub use memspace::{
    copy_from_target, copy_to_target, target_calloc, target_free, target_malloc, Coherence,
    ConstantTable, FieldPair, MemError, TargetBuffer,
};
pub use reduce::{
    reduce, target_double_max, target_double_min, target_double_sum, ReduceError, ReductionOp,
};
