//! Argument grammar and the resolved run plan.

use std::path::PathBuf;

use gridlane_core::{Backend, GridShape, LayoutScheme, SuiteKernel};

/// Where the machine model (peak flop rate, STREAM bandwidth) comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MachineSource {
    Preset(String),
    File(PathBuf),
    Measure,
}

pub fn parse_machine_source(s: &str) -> Result<MachineSource, String> {
    if s == "measure" {
        return Ok(MachineSource::Measure);
    }
    if let Some(name) = s.strip_prefix("preset:") {
        if name.is_empty() {
            return Err("empty preset name".into());
        }
        return Ok(MachineSource::Preset(name.to_string()));
    }
    if let Some(path) = s.strip_prefix("file:") {
        if path.is_empty() {
            return Err("empty machine file path".into());
        }
        return Ok(MachineSource::File(PathBuf::from(path)));
    }
    Err(format!(
        "expected `preset:<name>`, `file:<path>` or `measure`, got `{s}`"
    ))
}

pub fn parse_scheme(s: &str) -> Result<LayoutScheme, String> {
    s.parse::<LayoutScheme>().map_err(|e| e.to_string())
}

pub fn parse_backend(s: &str) -> Result<Backend, String> {
    s.parse::<Backend>().map_err(|e| e.to_string())
}

pub fn parse_kernel(s: &str) -> Result<SuiteKernel, String> {
    s.parse::<SuiteKernel>().map_err(|e| e.to_string())
}

pub fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("expected a positive integer, got `{s}`")),
        Ok(n) => Ok(n),
    }
}

/// `X,Y` grid extents.
pub fn parse_grid(s: &str) -> Result<Vec<usize>, String> {
    let dims: Result<Vec<usize>, String> = s.split(',').map(parse_positive).collect();
    let dims = dims?;
    if dims.len() != 2 {
        return Err(format!("expected `X,Y`, got `{s}`"));
    }
    Ok(dims)
}

/// The resolved sweep: the cartesian product of the axis lists is the
/// executed set.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub kernels: Vec<SuiteKernel>,
    pub grid: GridShape,
    pub layouts: Vec<LayoutScheme>,
    pub vvls: Vec<usize>,
    pub backends: Vec<Backend>,
    pub workers: Vec<usize>,
    pub machine: MachineSource,
    pub peak_gflops: Option<f64>,
    pub csv: Option<PathBuf>,
    pub seed: u64,
    pub deterministic: bool,
    pub reps: usize,
    pub warmup: usize,
    pub stream_sites: Option<usize>,
}

/// One point of the sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub kernel: SuiteKernel,
    pub scheme: LayoutScheme,
    pub vvl: usize,
    pub backend: Backend,
    pub workers: usize,
}

impl RunPlan {
    /// Enumerate the sweep points. The worker axis applies to the threaded
    /// backend only; serial runs collapse it to a single worker.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &kernel in &self.kernels {
            for &scheme in &self.layouts {
                for &vvl in &self.vvls {
                    for &backend in &self.backends {
                        let workers: &[usize] = match backend {
                            Backend::Serial => &[1],
                            Backend::Threads => &self.workers,
                        };
                        for &workers in workers {
                            out.push(SweepPoint {
                                kernel,
                                scheme,
                                vvl,
                                backend,
                                workers,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}
