//! Explicit host/target memory discipline.
//!
//! Every data-parallel field exists twice: a host buffer that ordinary code
//! reads and writes, and a target buffer that only kernels and copy
//! operations may touch. The two are always physically distinct, even though
//! this implementation runs host and target on the same hardware; keeping
//! them separate makes the copy discipline testable and the behavior
//! identical across backends.

use std::collections::BTreeMap;
use std::collections::HashSet;

use thiserror::Error;

use crate::layout::LayoutDescriptor;

/// Errors from allocation, copies and constant-table access.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("buffer has been freed")]
    BufferFreed,
    #[error("element count mismatch: destination {dst}, source {src}")]
    CountMismatch { dst: usize, src: usize },
    #[error("site {site} out of range (nsites_logical {limit})")]
    SiteOutOfBounds { site: usize, limit: usize },
    #[error("duplicate site {0} in subset list")]
    DuplicateSite(usize),
    #[error("unknown constant `{0}`")]
    UnknownConstant(String),
}

/// Element types a target buffer may hold.
///
/// The trait is sealed; the supported set is double-precision reals and
/// 32/64-bit integers.
pub trait Element: Copy + PartialEq + std::fmt::Debug + private::Sealed {
    /// Pattern written into freshly malloc'd storage so that reads of
    /// never-written elements are conspicuous. Not part of the contract:
    /// malloc'd contents are unspecified.
    const UNINIT: Self;
}

mod private {
    pub trait Sealed {}
    impl Sealed for f64 {}
    impl Sealed for i32 {}
    impl Sealed for i64 {}
}

impl Element for f64 {
    // A quiet NaN with a recognizable payload.
    const UNINIT: Self = f64::from_bits(0x7ff8_0000_dead_0000);
}

impl Element for i32 {
    const UNINIT: Self = 0x5ead_0000_u32 as i32;
}

impl Element for i64 {
    const UNINIT: Self = 0x5ead_0000_dead_0000_u64 as i64;
}

/// Storage in the target memory space.
///
/// The contents are reachable only through copy operations and kernel
/// buffer views; host code never holds a direct reference. `free`
/// invalidates the handle, and any later use is reported as an error
/// rather than undefined behavior.
#[derive(Debug)]
pub struct TargetBuffer<T: Element> {
    storage: Option<Vec<T>>,
    count: usize,
}

impl<T: Element> TargetBuffer<T> {
    /// Element count fixed at allocation.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_freed(&self) -> bool {
        self.storage.is_none()
    }

    /// Release the storage and invalidate the handle. Freeing twice is
    /// detected and reported.
    pub fn free(&mut self) -> Result<(), MemError> {
        if self.storage.take().is_none() {
            return Err(MemError::BufferFreed);
        }
        Ok(())
    }

    pub(crate) fn as_slice(&self) -> Result<&[T], MemError> {
        self.storage.as_deref().ok_or(MemError::BufferFreed)
    }

    pub(crate) fn as_mut_slice(&mut self) -> Result<&mut [T], MemError> {
        self.storage.as_deref_mut().ok_or(MemError::BufferFreed)
    }
}

/// Allocate `count` elements of target storage with unspecified contents.
pub fn target_malloc<T: Element>(count: usize) -> Result<TargetBuffer<T>, MemError> {
    if count == 0 {
        return Err(MemError::InvalidArgument("count must be >= 1".into()));
    }
    Ok(TargetBuffer {
        storage: Some(vec![T::UNINIT; count]),
        count,
    })
}

/// Allocate `count` elements of target storage, every element zero.
pub fn target_calloc<T: Element + Default>(count: usize) -> Result<TargetBuffer<T>, MemError> {
    if count == 0 {
        return Err(MemError::InvalidArgument("count must be >= 1".into()));
    }
    Ok(TargetBuffer {
        storage: Some(vec![T::default(); count]),
        count,
    })
}

/// Release a target buffer. Equivalent to [`TargetBuffer::free`].
pub fn target_free<T: Element>(buf: &mut TargetBuffer<T>) -> Result<(), MemError> {
    buf.free()
}

/// Copy host data into a target buffer. Counts must match exactly; the
/// destination becomes a bitwise copy of the source. Synchronous: the data
/// is fully transferred on return.
pub fn copy_to_target<T: Element>(dst: &mut TargetBuffer<T>, src: &[T]) -> Result<(), MemError> {
    let slice = dst.as_mut_slice()?;
    if slice.len() != src.len() {
        return Err(MemError::CountMismatch {
            dst: slice.len(),
            src: src.len(),
        });
    }
    slice.copy_from_slice(src);
    Ok(())
}

/// Copy a target buffer back into host data. Counts must match exactly.
pub fn copy_from_target<T: Element>(dst: &mut [T], src: &TargetBuffer<T>) -> Result<(), MemError> {
    let slice = src.as_slice()?;
    if slice.len() != dst.len() {
        return Err(MemError::CountMismatch {
            dst: dst.len(),
            src: slice.len(),
        });
    }
    dst.copy_from_slice(slice);
    Ok(())
}

/// Which side of a field pair holds the newest data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coherence {
    Coherent,
    HostDirty,
    TargetDirty,
}

/// Paired host and target allocations for one multi-valued grid field.
///
/// Both buffers hold `layout.total()` double-precision elements. The
/// coherence flag tracks which side was written last; it transitions only
/// through copies, host mutation and kernel write views.
#[derive(Debug)]
pub struct FieldPair {
    host: Vec<f64>,
    target: TargetBuffer<f64>,
    layout: LayoutDescriptor,
    coherence: Coherence,
}

impl FieldPair {
    /// Allocate a zero-initialized pair for the given layout.
    pub fn new(layout: LayoutDescriptor) -> Result<Self, MemError> {
        let total = layout.total();
        Ok(Self {
            host: vec![0.0; total],
            target: target_calloc(total)?,
            layout,
            coherence: Coherence::Coherent,
        })
    }

    pub fn layout(&self) -> &LayoutDescriptor {
        &self.layout
    }

    pub fn coherence(&self) -> Coherence {
        self.coherence
    }

    pub fn host(&self) -> &[f64] {
        &self.host
    }

    /// Mutable host access; marks the host side dirty.
    pub fn host_mut(&mut self) -> &mut [f64] {
        self.coherence = Coherence::HostDirty;
        &mut self.host
    }

    pub(crate) fn target(&self) -> &TargetBuffer<f64> {
        &self.target
    }

    #[cfg(test)]
    pub(crate) fn target_mut(&mut self) -> &mut TargetBuffer<f64> {
        self.coherence = Coherence::TargetDirty;
        &mut self.target
    }

    /// Split borrow for view construction: the target buffer and the layout
    /// are disjoint fields.
    pub(crate) fn target_mut_and_layout(&mut self) -> (&mut TargetBuffer<f64>, &LayoutDescriptor) {
        self.coherence = Coherence::TargetDirty;
        (&mut self.target, &self.layout)
    }

    /// Whole-field host → target copy.
    pub fn copy_to_target(&mut self) -> Result<(), MemError> {
        copy_to_target(&mut self.target, &self.host)?;
        self.coherence = Coherence::Coherent;
        Ok(())
    }

    /// Whole-field target → host copy.
    pub fn copy_from_target(&mut self) -> Result<(), MemError> {
        copy_from_target(&mut self.host, &self.target)?;
        self.coherence = Coherence::Coherent;
        Ok(())
    }

    /// Copy all components of the listed sites host → target, leaving every
    /// other element untouched. Sites must be logical, duplicate-free.
    pub fn copy_subset_to_target(&mut self, sites: &[usize]) -> Result<(), MemError> {
        let layout = self.layout.clone();
        let indices = subset_indices(&layout, sites)?;
        let target = self.target.as_mut_slice()?;
        for idx in indices {
            target[idx] = self.host[idx];
        }
        self.coherence = Coherence::TargetDirty;
        Ok(())
    }

    /// Copy all components of the listed sites target → host.
    pub fn copy_subset_from_target(&mut self, sites: &[usize]) -> Result<(), MemError> {
        let indices = subset_indices(&self.layout, sites)?;
        let target = self.target.as_slice()?;
        for idx in indices {
            self.host[idx] = target[idx];
        }
        self.coherence = Coherence::HostDirty;
        Ok(())
    }

    /// Fill the padding sites of both buffers with `sentinel`. Padded sites
    /// hold unspecified values and kernels must never let them reach logical
    /// results; tests poison them to catch leaks.
    pub fn poison_padding(&mut self, sentinel: f64) -> Result<(), MemError> {
        let layout = self.layout.clone();
        let target = self.target.as_mut_slice()?;
        for site in layout.nsites_logical()..layout.nsites_padded() {
            for comp in 0..layout.ncomponents() {
                let idx = layout.index(comp, site);
                self.host[idx] = sentinel;
                target[idx] = sentinel;
            }
        }
        Ok(())
    }

    /// Read the logical field contents through the index map, site-major:
    /// `out[site * ncomponents + comp]`. Copies from the target first, so
    /// the result reflects kernel writes. The readout is layout-independent,
    /// which makes it the comparison form for equivalence checks.
    pub fn read_logical(&mut self) -> Result<Vec<f64>, MemError> {
        self.copy_from_target()?;
        let l = &self.layout;
        let mut out = Vec::with_capacity(l.nsites_logical() * l.ncomponents());
        for site in 0..l.nsites_logical() {
            for comp in 0..l.ncomponents() {
                out.push(self.host[l.index(comp, site)]);
            }
        }
        Ok(out)
    }

    /// Write logical contents through the index map (inverse of
    /// [`read_logical`](Self::read_logical)) and copy to the target.
    pub fn write_logical(&mut self, values: &[f64]) -> Result<(), MemError> {
        let l = self.layout.clone();
        let expected = l.nsites_logical() * l.ncomponents();
        if values.len() != expected {
            return Err(MemError::CountMismatch {
                dst: expected,
                src: values.len(),
            });
        }
        for site in 0..l.nsites_logical() {
            for comp in 0..l.ncomponents() {
                self.host[l.index(comp, site)] = values[site * l.ncomponents() + comp];
            }
        }
        self.coherence = Coherence::HostDirty;
        self.copy_to_target()
    }
}

fn subset_indices(layout: &LayoutDescriptor, sites: &[usize]) -> Result<Vec<usize>, MemError> {
    let mut seen = HashSet::with_capacity(sites.len());
    let mut indices = Vec::with_capacity(sites.len() * layout.ncomponents());
    for &site in sites {
        if site >= layout.nsites_logical() {
            return Err(MemError::SiteOutOfBounds {
                site,
                limit: layout.nsites_logical(),
            });
        }
        if !seen.insert(site) {
            return Err(MemError::DuplicateSite(site));
        }
        for comp in 0..layout.ncomponents() {
            indices.push(layout.index(comp, site));
        }
    }
    Ok(indices)
}

/// Named double-precision constants visible read-only to kernels.
///
/// Kernels receive `&ConstantTable`; updating a value needs `&mut self`,
/// so a write during an in-flight launch is rejected by the borrow checker
/// rather than at runtime.
#[derive(Debug, Clone, Default)]
pub struct ConstantTable {
    values: BTreeMap<String, f64>,
}

impl ConstantTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Set a constant; subsequent launches observe the new value.
    pub fn set(&mut self, name: &str, value: f64) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Result<f64, MemError> {
        self.values
            .get(name)
            .copied()
            .ok_or_else(|| MemError::UnknownConstant(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::LayoutScheme;
    use proptest::prelude::*;

    fn layout(nsites: usize, ncomp: usize, scheme: LayoutScheme) -> LayoutDescriptor {
        LayoutDescriptor::new(nsites, ncomp, scheme, 1).unwrap()
    }

    #[test]
    fn calloc_is_zero() {
        let mut buf = target_calloc::<f64>(5).unwrap();
        let mut host = vec![1.0; 5];
        copy_from_target(&mut host, &buf).unwrap();
        assert_eq!(host, vec![0.0; 5]);
        buf.free().unwrap();
    }

    #[test]
    fn malloc_allocates_requested_count() {
        // The 4-site x 3-component field needs 12 elements.
        let buf = target_malloc::<f64>(12).unwrap();
        assert_eq!(buf.count(), 12);
    }

    #[test]
    fn zero_count_alloc_rejected() {
        assert!(target_malloc::<f64>(0).is_err());
        assert!(target_calloc::<i64>(0).is_err());
    }

    #[test]
    fn use_after_free_is_detected() {
        let mut buf = target_malloc::<f64>(4).unwrap();
        target_free(&mut buf).unwrap();
        assert!(buf.is_freed());
        assert_eq!(
            copy_to_target(&mut buf, &[0.0; 4]).unwrap_err(),
            MemError::BufferFreed
        );
        let mut host = [0.0; 4];
        assert_eq!(
            copy_from_target(&mut host, &buf).unwrap_err(),
            MemError::BufferFreed
        );
        assert_eq!(buf.free().unwrap_err(), MemError::BufferFreed);
    }

    #[test]
    fn count_mismatch_is_an_error() {
        let mut buf = target_calloc::<f64>(4).unwrap();
        assert!(matches!(
            copy_to_target(&mut buf, &[1.0; 3]),
            Err(MemError::CountMismatch { dst: 4, src: 3 })
        ));
    }

    #[test]
    fn integer_round_trip() {
        let mut buf = target_malloc::<i64>(3).unwrap();
        copy_to_target(&mut buf, &[-1, 0, i64::MAX]).unwrap();
        let mut host = [0i64; 3];
        copy_from_target(&mut host, &buf).unwrap();
        assert_eq!(host, [-1, 0, i64::MAX]);
    }

    #[test]
    fn field_pair_coherence_transitions() {
        let mut pair = FieldPair::new(layout(4, 3, LayoutScheme::Aos)).unwrap();
        assert_eq!(pair.coherence(), Coherence::Coherent);
        pair.host_mut()[0] = 1.0;
        assert_eq!(pair.coherence(), Coherence::HostDirty);
        pair.copy_to_target().unwrap();
        assert_eq!(pair.coherence(), Coherence::Coherent);
        let _ = pair.target_mut();
        assert_eq!(pair.coherence(), Coherence::TargetDirty);
        pair.copy_from_target().unwrap();
        assert_eq!(pair.coherence(), Coherence::Coherent);
    }

    #[test]
    fn host_and_target_are_physically_distinct() {
        let mut pair = FieldPair::new(layout(4, 1, LayoutScheme::Aos)).unwrap();
        pair.host_mut().copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        pair.copy_to_target().unwrap();
        // Mutating the host must not reach the target until the next copy.
        pair.host_mut().fill(-9.0);
        let target_copy = pair.target().as_slice().unwrap().to_vec();
        assert_eq!(target_copy, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn subset_copy_touches_exactly_the_listed_sites() {
        let sentinel = -777.0;
        let mut pair = FieldPair::new(layout(16, 3, LayoutScheme::Aosoa { sal: 4 })).unwrap();
        copy_to_target(pair.target_mut(), &vec![sentinel; 48]).unwrap();
        for (i, v) in pair.host_mut().iter_mut().enumerate() {
            *v = i as f64;
        }
        let subset = [0usize, 5, 7];
        pair.copy_subset_to_target(&subset).unwrap();

        // Oracle: full copy on a masked reference.
        let target = pair.target().as_slice().unwrap();
        let l = layout(16, 3, LayoutScheme::Aosoa { sal: 4 });
        let mut changed = 0;
        for site in 0..16 {
            for comp in 0..3 {
                let idx = l.index(comp, site);
                if subset.contains(&site) {
                    assert_eq!(target[idx], pair.host()[idx]);
                    changed += 1;
                } else {
                    assert_eq!(target[idx], sentinel);
                }
            }
        }
        assert_eq!(changed, 9);
    }

    #[test]
    fn subset_of_all_sites_is_a_full_copy() {
        let mut pair = FieldPair::new(layout(8, 2, LayoutScheme::Soa)).unwrap();
        for (i, v) in pair.host_mut().iter_mut().enumerate() {
            *v = (i * i) as f64;
        }
        let all: Vec<usize> = (0..8).collect();
        pair.copy_subset_to_target(&all).unwrap();
        let host = pair.host().to_vec();
        assert_eq!(pair.target().as_slice().unwrap(), &host[..]);
    }

    #[test]
    fn empty_subset_leaves_target_unchanged() {
        let mut pair = FieldPair::new(layout(8, 2, LayoutScheme::Aos)).unwrap();
        pair.host_mut().fill(3.5);
        let before = pair.target().as_slice().unwrap().to_vec();
        pair.copy_subset_to_target(&[]).unwrap();
        assert_eq!(pair.target().as_slice().unwrap(), &before[..]);
    }

    #[test]
    fn subset_rejects_out_of_range_and_duplicates() {
        let mut pair = FieldPair::new(layout(8, 2, LayoutScheme::Aos)).unwrap();
        assert!(matches!(
            pair.copy_subset_to_target(&[8]),
            Err(MemError::SiteOutOfBounds { site: 8, .. })
        ));
        assert!(matches!(
            pair.copy_subset_to_target(&[1, 1]),
            Err(MemError::DuplicateSite(1))
        ));
    }

    #[test]
    fn subset_copy_from_target() {
        let mut pair = FieldPair::new(layout(6, 2, LayoutScheme::Aos)).unwrap();
        copy_to_target(pair.target_mut(), &(0..12).map(f64::from).collect::<Vec<_>>()).unwrap();
        pair.host_mut().fill(-1.0);
        pair.copy_subset_from_target(&[2]).unwrap();
        let l = layout(6, 2, LayoutScheme::Aos);
        for site in 0..6 {
            for comp in 0..2 {
                let idx = l.index(comp, site);
                if site == 2 {
                    assert_eq!(pair.host()[idx], idx as f64);
                } else {
                    assert_eq!(pair.host()[idx], -1.0);
                }
            }
        }
    }

    #[test]
    fn constant_table_get_set() {
        let mut table = ConstantTable::new();
        table.set("a", 2.0);
        assert_eq!(table.get("a").unwrap(), 2.0);
        table.set("a", 0.5);
        assert_eq!(table.get("a").unwrap(), 0.5);
        assert!(matches!(table.get("q"), Err(MemError::UnknownConstant(_))));
    }

    #[test]
    fn logical_round_trip_across_layouts() {
        let values: Vec<f64> = (0..30).map(|i| i as f64 * 0.25).collect();
        for scheme in [
            LayoutScheme::Aos,
            LayoutScheme::Soa,
            LayoutScheme::Aosoa { sal: 4 },
        ] {
            let mut pair =
                FieldPair::new(LayoutDescriptor::new(10, 3, scheme, 4).unwrap()).unwrap();
            pair.write_logical(&values).unwrap();
            assert_eq!(pair.read_logical().unwrap(), values);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip_is_bitwise_identity(data in prop::collection::vec(prop::num::f64::ANY, 1..64)) {
            let mut buf = target_malloc::<f64>(data.len()).unwrap();
            copy_to_target(&mut buf, &data).unwrap();
            let mut back = vec![0.0; data.len()];
            copy_from_target(&mut back, &buf).unwrap();
            for (a, b) in data.iter().zip(&back) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
