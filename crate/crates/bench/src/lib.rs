//! Shared builders for the criterion benchmarks.

use gridlane_core::kernels::lb::equilibrium;
use gridlane_core::rng::SplitMix64;
use gridlane_core::{FieldPair, GridShape, LayoutDescriptor, LayoutScheme};

/// A single-component field with uniform random contents.
pub fn random_field(nsites: usize, scheme: LayoutScheme, vvl: usize, seed: u64) -> FieldPair {
    let layout = LayoutDescriptor::new(nsites, 1, scheme, vvl).unwrap();
    let mut pair = FieldPair::new(layout).unwrap();
    let mut rng = SplitMix64::new(seed);
    let values: Vec<f64> = (0..nsites).map(|_| rng.next_in(-1.0, 1.0)).collect();
    pair.write_logical(&values).unwrap();
    pair
}

/// A three-component field with uniform random contents.
pub fn random_field3(nsites: usize, scheme: LayoutScheme, vvl: usize, seed: u64) -> FieldPair {
    let layout = LayoutDescriptor::new(nsites, 3, scheme, vvl).unwrap();
    let mut pair = FieldPair::new(layout).unwrap();
    let mut rng = SplitMix64::new(seed);
    let values: Vec<f64> = (0..nsites * 3).map(|_| rng.next_in(0.5, 2.0)).collect();
    pair.write_logical(&values).unwrap();
    pair
}

/// A near-equilibrium distribution field, stable under repeated collisions.
pub fn distribution_field(
    shape: &GridShape,
    scheme: LayoutScheme,
    vvl: usize,
    seed: u64,
) -> FieldPair {
    let nsites = shape.nsites();
    let layout = LayoutDescriptor::new(nsites, 9, scheme, vvl).unwrap();
    let mut pair = FieldPair::new(layout).unwrap();
    let mut rng = SplitMix64::new(seed);
    let mut values = Vec::with_capacity(nsites * 9);
    for _ in 0..nsites {
        let rho = rng.next_in(0.9, 1.1);
        let ux = rng.next_in(-0.05, 0.05);
        let uy = rng.next_in(-0.05, 0.05);
        values.extend_from_slice(&equilibrium(rho, ux, uy));
    }
    pair.write_logical(&values).unwrap();
    pair
}
