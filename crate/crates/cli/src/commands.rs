//! Subcommand implementations and the exit-code contract:
//! 0 success, 1 correctness or conservation failure, 2 usage error.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gridlane_core::{
    classify, measure, pct_of_stream, run_lb_miniapp, stream_triad_bandwidth, Backend,
    BenchRecord, GridShape, KernelError, LaunchConfig, LayoutScheme, MachineModel, StepDiagnostics,
    SuiteKernel,
};

use crate::plan::{MachineSource, RunPlan, SweepPoint};
use crate::workload::{Workload, GATE_SCALE_A, TIMED_SCALE_A};

/// Relative total-mass drift beyond which the mini-app run is reported as a
/// conservation failure.
const LB_MASS_DRIFT_LIMIT: f64 = 1e-10;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or malformed input files: exit code 2.
    Usage(String),
    /// Correctness, conservation or runtime failure: exit code 1.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(msg) | CliError::Failure(msg) => msg,
        }
    }
}

fn fail(err: impl std::fmt::Display) -> CliError {
    CliError::Failure(err.to_string())
}

fn usage(err: impl std::fmt::Display) -> CliError {
    CliError::Usage(err.to_string())
}

fn oracle_config(deterministic: bool) -> LaunchConfig {
    LaunchConfig::serial().with_deterministic(deterministic)
}

fn point_config(point: &SweepPoint, deterministic: bool) -> LaunchConfig {
    LaunchConfig {
        backend: point.backend,
        nworkers: point.workers,
        vvl: point.vvl,
        deterministic,
    }
}

/// Resolve the machine model, measuring STREAM in-process when asked. The
/// boolean reports whether a measured working set was below the cache
/// threshold (a warning, not an error).
fn resolve_machine(
    source: &MachineSource,
    peak_gflops: Option<f64>,
    stream_sites: Option<usize>,
    warmup: usize,
    reps: usize,
) -> Result<(MachineModel, bool), CliError> {
    match source {
        MachineSource::Preset(name) => {
            let model = MachineModel::preset(name).ok_or_else(|| {
                let names: Vec<String> = MachineModel::presets()
                    .into_iter()
                    .map(|m| m.name)
                    .collect();
                usage(format!(
                    "unknown machine preset `{name}` (available: {})",
                    names.join(", ")
                ))
            })?;
            Ok((model, false))
        }
        MachineSource::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read machine file {}: {e}", path.display())))?;
            Ok((MachineModel::from_config(&text).map_err(usage)?, false))
        }
        MachineSource::Measure => {
            let n = stream_sites.unwrap_or_else(gridlane_core::bench::default_stream_sites);
            // Bandwidth-friendly configuration: all workers, contiguous
            // block scheduling, a vectorizable lane width.
            let cfg = LaunchConfig::threads(available_workers())
                .with_vvl(8)
                .with_deterministic(true);
            let m = stream_triad_bandwidth(n, warmup, reps, &cfg).map_err(fail)?;
            // Without a supplied peak the compute roof is unknown; treat it
            // as unbounded, which leaves memory-bound classifications and
            // attainable rates intact.
            let peak_flops = peak_gflops.map_or(f64::INFINITY, |g| g * 1e9);
            Ok((
                MachineModel {
                    name: "measured".to_string(),
                    peak_flops,
                    stream_bw: m.bandwidth_bytes_per_s,
                },
                m.below_cache_threshold,
            ))
        }
    }
}

fn available_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn write_output(path: Option<&PathBuf>, content: &str) -> Result<(), CliError> {
    match path {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| fail(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Validate one sweep point against the serial/aos/vvl=1 oracle, bitwise on
/// the logical field. A mismatch renders a diff report and aborts:
/// benchmarking wrong code is worse than not benchmarking.
fn correctness_gate(
    point: &SweepPoint,
    grid: &GridShape,
    seed: u64,
    deterministic: bool,
    oracle_out: &[f64],
) -> Result<(), CliError> {
    let cfg = point_config(point, deterministic);
    let mut w = Workload::build(
        point.kernel,
        grid,
        point.scheme,
        point.vvl,
        seed,
        GATE_SCALE_A,
    )
    .map_err(fail)?;
    w.step(&cfg).map_err(fail)?;
    let got = w.output().map_err(fail)?;

    if got.len() != oracle_out.len() {
        return Err(fail(format!(
            "gate output length {} does not match oracle {}",
            got.len(),
            oracle_out.len()
        )));
    }
    let ncomp = got.len() / grid.nsites();
    let mismatches: Vec<usize> = (0..got.len())
        .filter(|&i| got[i].to_bits() != oracle_out[i].to_bits())
        .collect();
    if mismatches.is_empty() {
        return Ok(());
    }

    let mut report = format!(
        "correctness gate failed: kernel {} layout {} vvl {} backend {} workers {} \
         differs from the serial/aos/vvl=1 oracle at {} of {} elements\n",
        point.kernel,
        point.scheme,
        point.vvl,
        point.backend,
        point.workers,
        mismatches.len(),
        got.len(),
    );
    for &i in mismatches.iter().take(8) {
        let _ = writeln!(
            report,
            "  site {} comp {}: got {:e}, oracle {:e}",
            i / ncomp,
            i % ncomp,
            got[i],
            oracle_out[i],
        );
    }
    if mismatches.len() > 8 {
        let _ = writeln!(report, "  ... and {} more", mismatches.len() - 8);
    }
    Err(CliError::Failure(report))
}

/// Shared driver for `bench` and `sweep`: correctness gate, then timing,
/// one CSV record per sweep point.
pub fn cmd_bench(plan: &RunPlan) -> Result<(), CliError> {
    let (machine, below_threshold) = resolve_machine(
        &plan.machine,
        plan.peak_gflops,
        plan.stream_sites,
        plan.warmup,
        plan.reps,
    )?;

    let mut oracle_outputs: HashMap<SuiteKernel, Vec<f64>> = HashMap::new();
    let mut records = Vec::new();
    for point in plan.points() {
        let oracle = match oracle_outputs.entry(point.kernel) {
            Entry::Occupied(entry) => entry.into_mut(),
            Entry::Vacant(entry) => {
                let cfg = oracle_config(plan.deterministic);
                let mut w = Workload::build(
                    point.kernel,
                    &plan.grid,
                    LayoutScheme::Aos,
                    1,
                    plan.seed,
                    GATE_SCALE_A,
                )
                .map_err(fail)?;
                w.step(&cfg).map_err(fail)?;
                entry.insert(w.output().map_err(fail)?)
            }
        };
        correctness_gate(&point, &plan.grid, plan.seed, plan.deterministic, oracle)?;

        let cfg = point_config(&point, plan.deterministic);
        let mut w = Workload::build(
            point.kernel,
            &plan.grid,
            point.scheme,
            point.vvl,
            plan.seed,
            TIMED_SCALE_A,
        )
        .map_err(fail)?;
        let timing = measure(|| w.step(&cfg), plan.warmup, plan.reps).map_err(fail)?;

        let cost = point.kernel.cost_model();
        let nsites = plan.grid.nsites();
        let record = BenchRecord {
            kernel: point.kernel.to_string(),
            layout: point.scheme.to_string(),
            vvl: point.vvl,
            backend: point.backend.to_string(),
            workers: point.workers,
            reps: plan.reps,
            min_time_s: timing.min_s,
            bytes: cost.bytes(nsites),
            flops: cost.flops(nsites),
            pct_stream: pct_of_stream(
                cost.bytes(nsites) as f64 / timing.min_s,
                machine.stream_bw,
            ),
            bound_class: classify(cost.oi(), &machine),
        };
        eprintln!(
            "{} {} vvl={} {} workers={}: min {:.3e} s, {:.2} GB/s",
            record.kernel,
            record.layout,
            record.vvl,
            record.backend,
            record.workers,
            record.min_time_s,
            record.bandwidth_gbs(),
        );
        records.push(record);
    }

    let mut csv = BenchRecord::emit_csv(&records);
    if below_threshold {
        let warning = "# warning: STREAM working set below 4x the cache estimate; \
                       the reference bandwidth may be an in-cache rate\n";
        let mut lines = csv.splitn(2, '\n');
        let header = lines.next().unwrap_or_default();
        csv = format!("{header}\n{warning}{}", lines.next().unwrap_or_default());
        eprintln!("{}", warning.trim_start_matches("# ").trim_end());
    }
    write_output(plan.csv.as_ref(), &csv)
}

pub struct LbPlan {
    pub grid: Vec<usize>,
    pub steps: usize,
    pub tau: f64,
    pub scheme: LayoutScheme,
    pub vvl: usize,
    pub backend: Backend,
    pub workers: usize,
    pub deterministic: bool,
    pub csv: Option<PathBuf>,
    pub dump_final: Option<PathBuf>,
}

/// Run the mini-app, write per-step diagnostics, enforce mass conservation.
pub fn cmd_lb(plan: &LbPlan) -> Result<(), CliError> {
    let shape = GridShape::new(&plan.grid).map_err(usage)?;
    let cfg = LaunchConfig {
        backend: plan.backend,
        nworkers: plan.workers,
        vvl: plan.vvl,
        deterministic: plan.deterministic,
    };
    let (mut state, diagnostics) =
        run_lb_miniapp(&shape, plan.tau, plan.steps, plan.scheme, &cfg).map_err(|e| match e {
            KernelError::InvalidField(_) => usage(e),
            other => fail(other),
        })?;

    let mut csv = String::from(StepDiagnostics::CSV_HEADER);
    csv.push('\n');
    for d in &diagnostics {
        csv.push_str(&d.csv_row());
        csv.push('\n');
    }
    write_output(plan.csv.as_ref(), &csv)?;

    if let Some(path) = &plan.dump_final {
        dump_final_state(&mut state, &shape, path)?;
    }

    let m0 = diagnostics[0].total_mass;
    let drift = diagnostics
        .iter()
        .map(|d| (d.total_mass - m0).abs() / m0.abs())
        .fold(0.0f64, f64::max);
    if drift > LB_MASS_DRIFT_LIMIT {
        return Err(fail(format!(
            "total mass drifted by {drift:.3e} (relative), above the {LB_MASS_DRIFT_LIMIT:.0e} limit"
        )));
    }
    Ok(())
}

fn dump_final_state(
    state: &mut gridlane_core::D2Q9State,
    shape: &GridShape,
    path: &Path,
) -> Result<(), CliError> {
    let values = state.field_mut().read_logical().map_err(fail)?;
    let nx = shape.dims()[0];
    let mut out = String::from("x,y,f0,f1,f2,f3,f4,f5,f6,f7,f8\n");
    for (site, f) in values.chunks(9).enumerate() {
        let _ = write!(out, "{},{}", site % nx, site / nx);
        for v in f {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| fail(format!("cannot write {}: {e}", path.display())))
}

pub struct RooflinePlan {
    pub records: PathBuf,
    pub machine: MachineSource,
    pub peak_gflops: Option<f64>,
    pub stream_sites: Option<usize>,
    pub reps: usize,
    pub warmup: usize,
    pub csv: Option<PathBuf>,
}

/// Roofline report over a benchmark records file: machine header with the
/// ridge point, then one line per record with intensity, attainable rate,
/// bound class and percent of STREAM. Column order is stable for diffing.
pub fn cmd_roofline(plan: &RooflinePlan) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&plan.records)
        .map_err(|e| usage(format!("cannot read {}: {e}", plan.records.display())))?;
    let records = BenchRecord::parse_csv(&text).map_err(usage)?;
    let (machine, _) = resolve_machine(
        &plan.machine,
        plan.peak_gflops,
        plan.stream_sites,
        plan.warmup,
        plan.reps,
    )?;

    let mut out = String::new();
    let _ = writeln!(out, "machine,{}", machine.name);
    let _ = writeln!(out, "peak_gflops,{}", machine.peak_flops / 1e9);
    let _ = writeln!(out, "stream_gbs,{}", machine.stream_bw / 1e9);
    let _ = writeln!(out, "ridge_point,{:.1}", machine.ridge_point());
    let _ = writeln!(
        out,
        "kernel,layout,vvl,backend,workers,oi,attainable_gflops,bound_class,pct_stream"
    );
    for r in &records {
        let attainable = gridlane_core::attainable_flops(r.oi(), &machine).map_err(fail)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.2}",
            r.kernel,
            r.layout,
            r.vvl,
            r.backend,
            r.workers,
            three_significant_figures(r.oi()),
            attainable / 1e9,
            classify(r.oi(), &machine),
            pct_of_stream(r.bandwidth_bytes_per_s(), machine.stream_bw),
        );
    }
    write_output(plan.csv.as_ref(), &out)
}

/// Format to three significant figures, the convention for reporting
/// operational intensities.
fn three_significant_figures(x: f64) -> String {
    if x == 0.0 {
        return "0.000".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (2 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}
