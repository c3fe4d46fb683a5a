//! Command-line front end: benchmark sweeps with a correctness gate, the
//! lattice-Boltzmann mini-app and roofline reports.

mod commands;
mod plan;
mod workload;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gridlane_core::{Backend, GridShape, LayoutScheme, SuiteKernel};

use commands::{cmd_bench, cmd_lb, cmd_roofline, CliError, LbPlan, RooflinePlan};
use plan::{
    parse_backend, parse_grid, parse_kernel, parse_machine_source, parse_positive, parse_scheme,
    MachineSource, RunPlan,
};

#[derive(Parser)]
#[command(
    name = "gridlane",
    version,
    about = "Data-parallel grid kernels with tunable layout, vector length and backend",
    after_help = "Exit codes: 0 success, 1 correctness/conservation failure, 2 usage error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Benchmark one kernel over layout/vvl/backend/worker sweeps
    Bench(BenchArgs),
    /// Benchmark the whole kernel suite over the sweep axes
    Sweep(SweepArgs),
    /// Run the lattice-Boltzmann mini-app with per-step diagnostics
    Lb(LbArgs),
    /// Render a roofline report from a benchmark records CSV
    Roofline(RooflineArgs),
}

/// Wrapper so clap treats `X,Y` as one value rather than a list.
#[derive(Debug, Clone)]
struct GridDims(Vec<usize>);

fn parse_grid_arg(s: &str) -> Result<GridDims, String> {
    parse_grid(s).map(GridDims)
}

#[derive(Args)]
struct SweepAxes {
    /// Grid extents as X,Y
    #[arg(long, default_value = "128,128", value_parser = parse_grid_arg)]
    grid: GridDims,
    /// Layouts to sweep: `aos`, `soa`, `aosoa:<sal>`
    #[arg(long, value_delimiter = ',', default_value = "aos", value_parser = parse_scheme)]
    layout: Vec<LayoutScheme>,
    /// Virtual vector lengths to sweep
    #[arg(long, value_delimiter = ',', default_value = "1", value_parser = parse_positive)]
    vvl: Vec<usize>,
    /// Backends to sweep: serial, threads
    #[arg(long, value_delimiter = ',', default_value = "serial", value_parser = parse_backend)]
    backend: Vec<Backend>,
    /// Worker counts for the threads backend (default: hardware parallelism)
    #[arg(long = "threads", value_delimiter = ',', value_parser = parse_positive)]
    threads: Option<Vec<usize>>,
    /// Machine model: `preset:<name>`, `file:<path>` or `measure`
    #[arg(long, default_value = "measure", value_parser = parse_machine_source)]
    machine: MachineSource,
    /// Peak double-precision Gflop/s of this machine (with --machine measure);
    /// without it the compute roof is treated as unbounded
    #[arg(long)]
    peak_gflops: Option<f64>,
    /// Write the records CSV here instead of stdout
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Seed for the generated field contents (SplitMix64)
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Fixed chunk scheduling and bitwise-reproducible reductions
    #[arg(long)]
    deterministic: bool,
    /// Timed repetitions per sweep point; the minimum is reported
    #[arg(long, default_value_t = 5, value_parser = parse_positive)]
    reps: usize,
    /// Untimed warmup repetitions
    #[arg(long, default_value_t = 2)]
    warmup: usize,
    /// Sites for the in-process STREAM measurement (default: 4x a 32 MiB
    /// cache estimate)
    #[arg(long, value_parser = parse_positive)]
    stream_sites: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Kernel to benchmark: scale, triad, collision or propagation
    #[arg(long, value_parser = parse_kernel)]
    kernel: SuiteKernel,
    #[command(flatten)]
    axes: SweepAxes,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    axes: SweepAxes,
}

#[derive(Args)]
struct LbArgs {
    /// Grid extents as X,Y (each >= 3)
    #[arg(long, default_value = "32,32", value_parser = parse_grid_arg)]
    grid: GridDims,
    /// Number of collision/propagation steps
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Relaxation time (> 0.5)
    #[arg(long, default_value_t = 0.8)]
    tau: f64,
    /// Memory layout of the distribution field
    #[arg(long, default_value = "aos", value_parser = parse_scheme)]
    layout: LayoutScheme,
    #[arg(long, default_value_t = 1, value_parser = parse_positive)]
    vvl: usize,
    #[arg(long, default_value = "serial", value_parser = parse_backend)]
    backend: Backend,
    /// Worker count for the threads backend
    #[arg(long = "threads", value_parser = parse_positive)]
    threads: Option<usize>,
    /// Accepted for interface uniformity; the mini-app initial state is
    /// deterministic
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    deterministic: bool,
    /// Write the diagnostics CSV here instead of stdout
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also dump the final distribution field to this CSV
    #[arg(long)]
    dump_final: Option<PathBuf>,
}

#[derive(Args)]
struct RooflineArgs {
    /// Benchmark records CSV produced by `bench` or `sweep`
    #[arg(long)]
    records: PathBuf,
    /// Machine model: `preset:<name>`, `file:<path>` or `measure`
    #[arg(long, value_parser = parse_machine_source)]
    machine: MachineSource,
    /// Peak double-precision Gflop/s (with --machine measure)
    #[arg(long)]
    peak_gflops: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    stream_sites: Option<usize>,
    #[arg(long, default_value_t = 5, value_parser = parse_positive)]
    reps: usize,
    #[arg(long, default_value_t = 2)]
    warmup: usize,
    /// Write the report here instead of stdout
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn available_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn run_plan(kernels: Vec<SuiteKernel>, axes: SweepAxes) -> Result<RunPlan, CliError> {
    let grid = GridShape::new(&axes.grid.0).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(RunPlan {
        kernels,
        grid,
        layouts: axes.layout,
        vvls: axes.vvl,
        backends: axes.backend,
        workers: axes.threads.unwrap_or_else(|| vec![available_workers()]),
        machine: axes.machine,
        peak_gflops: axes.peak_gflops,
        csv: axes.csv,
        seed: axes.seed,
        deterministic: axes.deterministic,
        reps: axes.reps,
        warmup: axes.warmup,
        stream_sites: axes.stream_sites,
    })
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Bench(args) => cmd_bench(&run_plan(vec![args.kernel], args.axes)?),
        Command::Sweep(args) => cmd_bench(&run_plan(SuiteKernel::ALL.to_vec(), args.axes)?),
        Command::Lb(args) => cmd_lb(&LbPlan {
            grid: args.grid.0,
            steps: args.steps,
            tau: args.tau,
            scheme: args.layout,
            vvl: args.vvl,
            backend: args.backend,
            workers: args.threads.unwrap_or_else(available_workers),
            deterministic: args.deterministic,
            csv: args.csv,
            dump_final: args.dump_final,
        }),
        Command::Roofline(args) => cmd_roofline(&RooflinePlan {
            records: args.records,
            machine: args.machine,
            peak_gflops: args.peak_gflops,
            stream_sites: args.stream_sites,
            reps: args.reps,
            warmup: args.warmup,
            csv: args.csv,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
