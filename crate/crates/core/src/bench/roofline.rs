//! Roofline arithmetic: machine models, ridge points and attainable
//! performance.
//!
//! A machine is summarized by two numbers — peak double-precision flop rate
//! and measured STREAM triad bandwidth. Their quotient is the ridge point;
//! a kernel whose operational intensity falls below it is limited by memory
//! bandwidth, one above it by floating-point capability.

use std::fmt;
use std::str::FromStr;

use super::BenchError;

/// Peak flop rate, sustained bandwidth and the derived ridge point of one
/// machine.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineModel {
    pub name: String,
    /// Peak double-precision rate in flop/s.
    pub peak_flops: f64,
    /// STREAM triad bandwidth in bytes/s (1 GB/s = 1e9 bytes/s).
    pub stream_bw: f64,
}

impl MachineModel {
    pub fn new(name: &str, peak_flops: f64, stream_bw: f64) -> Result<Self, BenchError> {
        if !peak_flops.is_finite() || peak_flops <= 0.0 {
            return Err(BenchError::InvalidArgument(format!(
                "peak flop rate must be positive, got {peak_flops}"
            )));
        }
        if !stream_bw.is_finite() || stream_bw <= 0.0 {
            return Err(BenchError::InvalidArgument(format!(
                "stream bandwidth must be positive, got {stream_bw}"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            peak_flops,
            stream_bw,
        })
    }

    /// Ridge point in flops/byte.
    pub fn ridge_point(&self) -> f64 {
        self.peak_flops / self.stream_bw
    }

    /// Built-in machine models with vendor peak figures and measured triad
    /// bandwidths, for reproducing reports without local measurement.
    pub fn presets() -> Vec<MachineModel> {
        let table: [(&str, f64, f64); 6] = [
            ("ivybridge", 259.0, 49.8),
            ("haswell", 154.0, 40.9),
            ("interlagos", 141.0, 32.4),
            ("xeonphi", 1010.0, 158.4),
            ("k20x", 1310.0, 181.3),
            ("k40", 1430.0, 192.1),
        ];
        table
            .iter()
            .map(|&(name, peak_gflops, stream_gbs)| MachineModel {
                name: name.to_string(),
                peak_flops: peak_gflops * 1e9,
                stream_bw: stream_gbs * 1e9,
            })
            .collect()
    }

    pub fn preset(name: &str) -> Option<MachineModel> {
        Self::presets().into_iter().find(|m| m.name == name)
    }

    /// Parse the plain-text machine config format: one `key=value` per
    /// line with keys `name`, `peak_gflops` and `stream_gbs`. Blank lines
    /// and `#` comments are ignored.
    pub fn from_config(text: &str) -> Result<Self, BenchError> {
        let mut name: Option<String> = None;
        let mut peak_gflops: Option<f64> = None;
        let mut stream_gbs: Option<f64> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(BenchError::Parse {
                line: i + 1,
                msg: format!("expected key=value, got `{line}`"),
            })?;
            let parse_f64 = |v: &str| {
                v.trim().parse::<f64>().map_err(|_| BenchError::Parse {
                    line: i + 1,
                    msg: format!("cannot parse `{v}` as a number"),
                })
            };
            match key.trim() {
                "name" => name = Some(value.trim().to_string()),
                "peak_gflops" => peak_gflops = Some(parse_f64(value)?),
                "stream_gbs" => stream_gbs = Some(parse_f64(value)?),
                other => {
                    return Err(BenchError::Parse {
                        line: i + 1,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        let missing = |what: &str| BenchError::InvalidArgument(format!("missing `{what}`"));
        MachineModel::new(
            &name.ok_or_else(|| missing("name"))?,
            peak_gflops.ok_or_else(|| missing("peak_gflops"))? * 1e9,
            stream_gbs.ok_or_else(|| missing("stream_gbs"))? * 1e9,
        )
    }
}

/// Ridge point of a (peak flop rate, bandwidth) pair. Reports print it to
/// one decimal place.
pub fn ridge_point(peak_flops: f64, stream_bw: f64) -> Result<f64, BenchError> {
    Ok(MachineModel::new("", peak_flops, stream_bw)?.ridge_point())
}

/// Which hardware limit a kernel runs into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundClass {
    MemoryBound,
    ComputeBound,
}

impl fmt::Display for BoundClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundClass::MemoryBound => write!(f, "memory-bound"),
            BoundClass::ComputeBound => write!(f, "compute-bound"),
        }
    }
}

impl FromStr for BoundClass {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "memory-bound" => Ok(BoundClass::MemoryBound),
            "compute-bound" => Ok(BoundClass::ComputeBound),
            other => Err(BenchError::InvalidArgument(format!(
                "unknown bound class `{other}`"
            ))),
        }
    }
}

/// Roofline ceiling for a kernel of the given operational intensity:
/// `min(peak, oi * bandwidth)` flop/s.
pub fn attainable_flops(oi: f64, machine: &MachineModel) -> Result<f64, BenchError> {
    if !oi.is_finite() || oi < 0.0 {
        return Err(BenchError::InvalidArgument(format!(
            "operational intensity must be non-negative, got {oi}"
        )));
    }
    Ok(machine.peak_flops.min(oi * machine.stream_bw))
}

/// A kernel is memory-bound exactly when its operational intensity lies
/// below the machine's ridge point.
pub fn classify(oi: f64, machine: &MachineModel) -> BoundClass {
    if oi < machine.ridge_point() {
        BoundClass::MemoryBound
    } else {
        BoundClass::ComputeBound
    }
}

/// Kernel bandwidth as a percentage of STREAM. Values slightly above 100
/// are legitimate: STREAM is a practical yardstick, not a hardware peak.
pub fn pct_of_stream(kernel_bw: f64, stream_bw: f64) -> f64 {
    100.0 * kernel_bw / stream_bw
}
