//! The launch engine: two nested levels of parallelism over a padded grid.
//!
//! A launch walks the padded site range in chunks of `vvl` sites. Chunks are
//! distributed across workers (thread-level parallelism); inside a chunk the
//! kernel runs a short lane loop of extent `vvl` (instruction-level
//! parallelism, the vectorization target). Lanes whose site falls beyond the
//! logical grid are masked: the framework skips them rather than trusting
//! each kernel to guard its own tail.
//!
//! Kernels receive a [`SiteChunk`] plus whatever buffer views and constants
//! they captured. Writes go through [`WriteView`], which only accepts
//! (chunk, lane) addressing — a kernel cannot express a store outside its
//! own chunk.

use std::panic::{self, AssertUnwindSafe};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use thiserror::Error;

use crate::layout::LayoutDescriptor;
use crate::memspace::{FieldPair, MemError};

/// Errors from launch configuration and execution.
#[derive(Debug, Error)]
pub enum ExecError {
    #[error("invalid launch config: {0}")]
    InvalidConfig(String),
    #[error("buffer of {got} elements does not match layout total {expected}")]
    BufferMismatch { expected: usize, got: usize },
    #[error("padded site count {padded} is not a multiple of vvl {vvl}")]
    IncompatibleVvl { padded: usize, vvl: usize },
    #[error("kernel panicked: {0}")]
    KernelPanicked(String),
    #[error(transparent)]
    Mem(#[from] MemError),
}

/// Where kernels execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    /// One control thread walks every chunk in order. Reference semantics.
    Serial,
    /// Chunks distributed over `nworkers` OS threads.
    Threads,
}

impl FromStr for Backend {
    type Err = ExecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "serial" => Ok(Backend::Serial),
            "threads" => Ok(Backend::Threads),
            other => Err(ExecError::InvalidConfig(format!(
                "unknown backend `{other}` (expected `serial` or `threads`)"
            ))),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Serial => write!(f, "serial"),
            Backend::Threads => write!(f, "threads"),
        }
    }
}

/// Launch parameters: backend, worker count, virtual vector length and
/// scheduling determinism.
///
/// `vvl` is both the stride of the chunk loop and the extent of the lane
/// loop. `nworkers` is ignored by the serial backend. With
/// `deterministic` set, chunks map to workers by contiguous block
/// decomposition; otherwise workers pull chunks from a shared queue.
/// Either way each site is written by exactly one chunk, so kernel output
/// does not depend on the schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaunchConfig {
    pub backend: Backend,
    pub nworkers: usize,
    pub vvl: usize,
    pub deterministic: bool,
}

impl LaunchConfig {
    /// Serial reference configuration: vvl 1, no threading.
    pub fn serial() -> Self {
        Self {
            backend: Backend::Serial,
            nworkers: 1,
            vvl: 1,
            deterministic: true,
        }
    }

    /// Threaded configuration with the given worker count.
    pub fn threads(nworkers: usize) -> Self {
        Self {
            backend: Backend::Threads,
            nworkers,
            vvl: 1,
            deterministic: false,
        }
    }

    pub fn with_vvl(mut self, vvl: usize) -> Self {
        self.vvl = vvl;
        self
    }

    pub fn with_deterministic(mut self, deterministic: bool) -> Self {
        self.deterministic = deterministic;
        self
    }

    fn validate(&self) -> Result<(), ExecError> {
        if self.vvl == 0 {
            return Err(ExecError::InvalidConfig("vvl must be >= 1".into()));
        }
        if self.backend == Backend::Threads && self.nworkers == 0 {
            return Err(ExecError::InvalidConfig("nworkers must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for LaunchConfig {
    fn default() -> Self {
        Self::serial()
    }
}

/// One chunk of `vvl` consecutive sites handed to a kernel invocation.
///
/// `base_site` is a multiple of `vvl`; lanes `0..active_lanes` map to
/// logical sites, the rest are padding. Only the launch engine constructs
/// chunks, and they are deliberately neither clonable nor copyable: a
/// kernel cannot retain one past its invocation, which is what lets the
/// write views trust chunk-based addressing to be race-free.
#[derive(Debug)]
pub struct SiteChunk {
    base: usize,
    vvl: usize,
    active: usize,
}

impl SiteChunk {
    pub fn base_site(&self) -> usize {
        self.base
    }

    pub fn vvl(&self) -> usize {
        self.vvl
    }

    /// Lanes whose site lies inside the logical grid. Always a prefix of
    /// the lane range; all-true except possibly in the final chunk(s).
    pub fn active_lanes(&self) -> usize {
        self.active
    }

    pub fn is_active(&self, lane: usize) -> bool {
        lane < self.active
    }

    /// Site addressed by a lane.
    #[inline]
    pub fn site(&self, lane: usize) -> usize {
        debug_assert!(lane < self.vvl);
        self.base + lane
    }

    /// The lane loop: run `body` for every active lane in ascending order.
    /// Inactive (padding) lanes are skipped, so a store can never escape
    /// the logical grid. Lane order is fixed; together with the layout's
    /// lane-contiguity property this keeps the innermost accesses
    /// consecutive in memory.
    #[inline]
    pub fn for_each_lane<F: FnMut(usize)>(&self, mut body: F) {
        for lane in 0..self.active {
            body(lane);
        }
    }

    /// Offset and length of the contiguous element run covering this
    /// chunk's active lanes for `comp`, when the layout yields one: either
    /// the field has a single component, or the whole chunk sits inside
    /// one short array.
    #[inline]
    fn lane_run(&self, layout: &LayoutDescriptor, comp: usize) -> Option<(usize, usize)> {
        if self.active == 0 {
            // Pure padding chunk: an empty run, valid for any layout (the
            // base site may lie beyond a smaller field's padded range).
            return Some((0, 0));
        }
        let contiguous = layout.ncomponents() == 1
            || (self.base % layout.sal()) + self.vvl <= layout.sal();
        contiguous.then(|| (layout.index(comp, self.base), self.active))
    }
}

/// Read-only kernel view of a target buffer. Any site may be read, which
/// is what stencil kernels need.
pub struct ReadView<'a> {
    data: &'a [f64],
    layout: &'a LayoutDescriptor,
}

impl<'a> ReadView<'a> {
    pub(crate) fn new(data: &'a [f64], layout: &'a LayoutDescriptor) -> Result<Self, ExecError> {
        if data.len() != layout.total() {
            return Err(ExecError::BufferMismatch {
                expected: layout.total(),
                got: data.len(),
            });
        }
        Ok(Self { data, layout })
    }

    pub fn layout(&self) -> &LayoutDescriptor {
        self.layout
    }

    #[inline]
    pub fn get(&self, comp: usize, site: usize) -> f64 {
        assert!(comp < self.layout.ncomponents(), "component out of range");
        self.data[self.layout.index(comp, site)]
    }

    /// Contiguous view of the chunk's active-lane elements for `comp`,
    /// when the layout makes them one run. Fast path for the suite
    /// kernels; the lane loop is the general form.
    #[inline]
    pub(crate) fn lane_run(&self, chunk: &SiteChunk, comp: usize) -> Option<&[f64]> {
        assert!(comp < self.layout.ncomponents(), "component out of range");
        let (start, len) = chunk.lane_run(self.layout, comp)?;
        Some(&self.data[start..start + len])
    }
}

/// Write view of a target buffer, shared by all workers of one launch.
///
/// Element addressing goes through `(chunk, lane, comp)`, so a kernel can
/// only store into the chunk it was handed, and only into active lanes.
/// Reading through [`get`](Self::get) is likewise chunk-gated: it is meant
/// for kernels that update a site in place.
pub struct WriteView<'a> {
    ptr: *mut f64,
    len: usize,
    layout: &'a LayoutDescriptor,
}

// Safety: a WriteView is built from an exclusive borrow of the buffer, so
// for its lifetime nothing else references the storage. Workers of one
// launch share the view, but every store lands at index(comp, base + lane)
// of the caller's own chunk; chunks partition the padded site range, each
// chunk runs on exactly one worker, and the index map is injective, so two
// workers never touch the same element.
unsafe impl Send for WriteView<'_> {}
unsafe impl Sync for WriteView<'_> {}

impl<'a> WriteView<'a> {
    pub(crate) fn new(data: &'a mut [f64], layout: &'a LayoutDescriptor) -> Result<Self, ExecError> {
        if data.len() != layout.total() {
            return Err(ExecError::BufferMismatch {
                expected: layout.total(),
                got: data.len(),
            });
        }
        Ok(Self {
            ptr: data.as_mut_ptr(),
            len: data.len(),
            layout,
        })
    }

    pub fn layout(&self) -> &LayoutDescriptor {
        self.layout
    }

    #[inline]
    fn element_index(&self, chunk: &SiteChunk, lane: usize, comp: usize) -> usize {
        assert!(chunk.is_active(lane), "lane {lane} is not active");
        assert!(comp < self.layout.ncomponents(), "component out of range");
        let idx = self.layout.index(comp, chunk.site(lane));
        debug_assert!(idx < self.len);
        idx
    }

    /// Store into an active lane of the caller's own chunk.
    #[inline]
    pub fn set(&self, chunk: &SiteChunk, lane: usize, comp: usize, value: f64) {
        let idx = self.element_index(chunk, lane, comp);
        unsafe { *self.ptr.add(idx) = value }
    }

    /// Read back an element of the caller's own chunk (in-place updates).
    #[inline]
    pub fn get(&self, chunk: &SiteChunk, lane: usize, comp: usize) -> f64 {
        let idx = self.element_index(chunk, lane, comp);
        unsafe { *self.ptr.add(idx) }
    }

    /// Run `f` over the contiguous slice of the chunk's active-lane
    /// elements for `comp`, when the layout makes them one run. Returns
    /// `None` (without calling `f`) otherwise.
    ///
    /// Crate-internal fast path: the exclusive slice is carved out of the
    /// shared view, so callers must not nest invocations for the same
    /// chunk and component. The suite kernels call it once per
    /// (chunk, comp), straight-line.
    #[inline]
    pub(crate) fn with_lane_run<R>(
        &self,
        chunk: &SiteChunk,
        comp: usize,
        f: impl FnOnce(&mut [f64]) -> R,
    ) -> Option<R> {
        assert!(comp < self.layout.ncomponents(), "component out of range");
        let (start, len) = chunk.lane_run(self.layout, comp)?;
        debug_assert!(start + len <= self.len);
        // Safety: the same disjointness argument as `set` — the run covers
        // exactly this chunk's active elements for this component, and no
        // other worker owns the chunk.
        let slice = unsafe { std::slice::from_raw_parts_mut(self.ptr.add(start), len) };
        Some(f(slice))
    }
}

impl FieldPair {
    /// Read-only kernel view of the target buffer.
    pub fn read_view(&self) -> Result<ReadView<'_>, ExecError> {
        let layout = self.layout();
        ReadView::new(self.target().as_slice()?, layout)
    }

    /// Write view of the target buffer; marks the target side dirty.
    pub fn write_view(&mut self) -> Result<WriteView<'_>, ExecError> {
        // Borrow dance: layout and target are disjoint fields.
        let (target, layout) = self.target_mut_and_layout();
        WriteView::new(target.as_mut_slice()?, layout)
    }
}

/// Apply `kernel` to every chunk of the padded site range described by
/// `layout`.
///
/// Chunk bases are `0, vvl, 2*vvl, ...` below `nsites_padded`. The kernel
/// must be re-entrant: with the threaded backend it runs on several workers
/// concurrently, and its only side effects may be stores through its own
/// chunk's write views. A panic in any worker fails the whole launch with
/// the panic message as diagnostic; the output buffers then hold
/// unspecified (but initialized) logical content.
pub fn launch<F>(cfg: &LaunchConfig, layout: &LayoutDescriptor, kernel: F) -> Result<(), ExecError>
where
    F: Fn(&SiteChunk) + Sync,
{
    cfg.validate()?;
    let padded = layout.nsites_padded();
    if !padded.is_multiple_of(cfg.vvl) {
        return Err(ExecError::IncompatibleVvl {
            padded,
            vvl: cfg.vvl,
        });
    }
    let logical = layout.nsites_logical();
    let nchunks = padded / cfg.vvl;
    let chunk_at = |i: usize| {
        let base = i * cfg.vvl;
        SiteChunk {
            base,
            vvl: cfg.vvl,
            active: logical.saturating_sub(base).min(cfg.vvl),
        }
    };

    match cfg.backend {
        Backend::Serial => {
            let result = panic::catch_unwind(AssertUnwindSafe(|| {
                for i in 0..nchunks {
                    kernel(&chunk_at(i));
                }
            }));
            result.map_err(|payload| ExecError::KernelPanicked(panic_message(payload)))
        }
        Backend::Threads => {
            let nworkers = cfg.nworkers.min(nchunks).max(1);
            let abort = AtomicBool::new(false);
            let next = AtomicUsize::new(0);
            let kernel = &kernel;

            let worker = |mut take: Box<dyn FnMut() -> Option<usize> + Send>| {
                let result = panic::catch_unwind(AssertUnwindSafe(|| {
                    while let Some(i) = take() {
                        if abort.load(Ordering::Relaxed) {
                            break;
                        }
                        kernel(&chunk_at(i));
                    }
                }));
                result.map_err(|payload| {
                    abort.store(true, Ordering::Relaxed);
                    panic_message(payload)
                })
            };

            let mut first_panic: Option<String> = None;
            std::thread::scope(|s| {
                let mut handles = Vec::with_capacity(nworkers);
                for w in 0..nworkers {
                    let take: Box<dyn FnMut() -> Option<usize> + Send> = if cfg.deterministic {
                        // Contiguous block decomposition, fixed per worker.
                        let lo = w * nchunks / nworkers;
                        let hi = (w + 1) * nchunks / nworkers;
                        let mut i = lo;
                        Box::new(move || {
                            if i < hi {
                                i += 1;
                                Some(i - 1)
                            } else {
                                None
                            }
                        })
                    } else {
                        // Shared queue: workers claim batches of chunks so
                        // the atomic is touched once per ~4096 sites, not
                        // once per chunk.
                        let next = &next;
                        let batch = (4096 / cfg.vvl).max(1);
                        let mut lo = 0usize;
                        let mut hi = 0usize;
                        Box::new(move || {
                            if lo == hi {
                                lo = next.fetch_add(batch, Ordering::Relaxed);
                                if lo >= nchunks {
                                    return None;
                                }
                                hi = (lo + batch).min(nchunks);
                            }
                            lo += 1;
                            Some(lo - 1)
                        })
                    };
                    handles.push(s.spawn(move || worker(take)));
                }
                for handle in handles {
                    match handle.join() {
                        Ok(Ok(())) => {}
                        Ok(Err(msg)) => {
                            first_panic.get_or_insert(msg);
                        }
                        Err(payload) => {
                            first_panic.get_or_insert(panic_message(payload));
                        }
                    }
                }
            });
            match first_panic {
                Some(msg) => Err(ExecError::KernelPanicked(msg)),
                None => Ok(()),
            }
        }
    }
}

/// Wait for outstanding kernel launches to complete.
///
/// Both backends here are synchronous, so this is a no-op, but call sites
/// keep it so an asynchronous backend can be added without API changes.
pub fn synchronize() {}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "opaque panic payload".to_string()
    }
}
