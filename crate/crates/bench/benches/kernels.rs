//! Micro-benchmarks for the kernel suite: the virtual-vector-length and
//! layout axes that decide memory bandwidth on real hardware.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use gridlane_bench::{distribution_field, random_field, random_field3};
use gridlane_core::rng::SplitMix64;
use gridlane_core::{
    copy_to_target, kernel_lb_collision, kernel_lb_propagation, kernel_scale, kernel_triad,
    target_double_sum, target_malloc, ConstantTable, GridShape, LaunchConfig, LayoutScheme,
    SuiteKernel,
};

const N_SITES: usize = 1 << 20;

fn triad_by_vvl(c: &mut Criterion) {
    let mut group = c.benchmark_group("triad");
    group.throughput(Throughput::Bytes(
        SuiteKernel::Triad.cost_model().bytes(N_SITES),
    ));
    for vvl in [1usize, 2, 4, 8] {
        let cfg = LaunchConfig::serial().with_vvl(vvl);
        let mut a = random_field(N_SITES, LayoutScheme::Aos, vvl, 1);
        let b = random_field(N_SITES, LayoutScheme::Aos, vvl, 2);
        let cc = random_field(N_SITES, LayoutScheme::Aos, vvl, 3);
        let mut constants = ConstantTable::new();
        constants.set("q", 3.0);
        group.bench_with_input(BenchmarkId::new("vvl", vvl), &vvl, |bench, _| {
            bench.iter(|| kernel_triad(&mut a, &b, &cc, &constants, &cfg).unwrap());
        });
    }
    group.finish();
}

fn scale_by_layout(c: &mut Criterion) {
    let mut group = c.benchmark_group("scale");
    group.throughput(Throughput::Bytes(
        SuiteKernel::Scale.cost_model().bytes(N_SITES),
    ));
    let vvl = 4;
    let cfg = LaunchConfig::serial().with_vvl(vvl);
    for scheme in [
        LayoutScheme::Aos,
        LayoutScheme::Soa,
        LayoutScheme::Aosoa { sal: 4 },
        LayoutScheme::Aosoa { sal: 16 },
    ] {
        let mut field = random_field3(N_SITES, scheme, vvl, 5);
        let mut constants = ConstantTable::new();
        constants.set("a", 1.0);
        group.bench_with_input(
            BenchmarkId::new("layout", scheme.to_string()),
            &scheme,
            |bench, _| {
                bench.iter(|| kernel_scale(&mut field, &constants, &cfg).unwrap());
            },
        );
    }
    group.finish();
}

fn lb_by_layout(c: &mut Criterion) {
    let shape = GridShape::new(&[512, 512]).unwrap();
    let nsites = shape.nsites();
    let vvl = 4;
    let cfg = LaunchConfig::serial().with_vvl(vvl);

    let mut group = c.benchmark_group("collision");
    group.throughput(Throughput::Bytes(
        SuiteKernel::Collision.cost_model().bytes(nsites),
    ));
    for scheme in [
        LayoutScheme::Aos,
        LayoutScheme::Soa,
        LayoutScheme::Aosoa { sal: 4 },
    ] {
        let mut f = distribution_field(&shape, scheme, vvl, 7);
        group.bench_with_input(
            BenchmarkId::new("layout", scheme.to_string()),
            &scheme,
            |bench, _| {
                bench.iter(|| kernel_lb_collision(&mut f, &shape, 0.8, &cfg).unwrap());
            },
        );
    }
    group.finish();

    let mut group = c.benchmark_group("propagation");
    group.throughput(Throughput::Bytes(
        SuiteKernel::Propagation.cost_model().bytes(nsites),
    ));
    for scheme in [
        LayoutScheme::Aos,
        LayoutScheme::Soa,
        LayoutScheme::Aosoa { sal: 4 },
    ] {
        let mut cur = distribution_field(&shape, scheme, vvl, 9);
        let mut next = distribution_field(&shape, scheme, vvl, 10);
        group.bench_with_input(
            BenchmarkId::new("layout", scheme.to_string()),
            &scheme,
            |bench, _| {
                bench.iter(|| {
                    kernel_lb_propagation(&mut next, &cur, &shape, &cfg).unwrap();
                    std::mem::swap(&mut cur, &mut next);
                });
            },
        );
    }
    group.finish();
}

fn reductions(c: &mut Criterion) {
    let mut rng = SplitMix64::new(11);
    let values: Vec<f64> = (0..N_SITES).map(|_| rng.next_in(-1.0, 1.0)).collect();
    let mut buf = target_malloc::<f64>(N_SITES).unwrap();
    copy_to_target(&mut buf, &values).unwrap();

    let mut group = c.benchmark_group("sum");
    group.throughput(Throughput::Bytes(8 * N_SITES as u64));
    for (name, cfg) in [
        ("serial", LaunchConfig::serial()),
        ("det-4w", LaunchConfig::threads(4).with_deterministic(true)),
        ("fold-4w", LaunchConfig::threads(4)),
    ] {
        group.bench_function(name, |bench| {
            bench.iter(|| target_double_sum(&buf, N_SITES, &cfg).unwrap());
        });
    }
    group.finish();
}

criterion_group!(benches, triad_by_vvl, scale_by_layout, lb_by_layout, reductions);
criterion_main!(benches);
