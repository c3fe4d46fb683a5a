//! Benchmark records and their CSV form.
//!
//! Time, byte and flop totals are the primary fields; bandwidth and
//! operational intensity are derived from them, so the record identities
//! `bandwidth * min_time = bytes` and `oi * bytes = flops` hold by
//! construction. The CSV writer emits the derived columns at full
//! round-trip precision and the parser recomputes and cross-checks them,
//! so a parsed file is guaranteed internally consistent.

use super::roofline::BoundClass;
use super::BenchError;

/// One measured (kernel, layout, vvl, backend, workers) point.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub kernel: String,
    pub layout: String,
    pub vvl: usize,
    pub backend: String,
    pub workers: usize,
    pub reps: usize,
    pub min_time_s: f64,
    /// Analytic bytes moved by one kernel application.
    pub bytes: u64,
    /// Analytic flops of one kernel application.
    pub flops: u64,
    /// Kernel bandwidth relative to the machine's STREAM figure, percent.
    pub pct_stream: f64,
    pub bound_class: BoundClass,
}

impl BenchRecord {
    pub const CSV_HEADER: &'static str = "kernel,layout,vvl,backend,workers,reps,min_time_s,\
                                          bytes,flops,bandwidth_gbs,oi,pct_stream,bound_class";

    /// Bytes per second of the timed kernel.
    pub fn bandwidth_bytes_per_s(&self) -> f64 {
        self.bytes as f64 / self.min_time_s
    }

    pub fn bandwidth_gbs(&self) -> f64 {
        self.bandwidth_bytes_per_s() / 1e9
    }

    /// Operational intensity in flops/byte.
    pub fn oi(&self) -> f64 {
        self.flops as f64 / self.bytes as f64
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.kernel,
            self.layout,
            self.vvl,
            self.backend,
            self.workers,
            self.reps,
            self.min_time_s,
            self.bytes,
            self.flops,
            self.bandwidth_gbs(),
            self.oi(),
            self.pct_stream,
            self.bound_class,
        )
    }

    /// Emit a CSV document: header plus one row per record.
    pub fn emit_csv(records: &[BenchRecord]) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    /// Parse a CSV document produced by [`emit_csv`](Self::emit_csv).
    /// Errors name the offending line, counting from 1 at the header.
    pub fn parse_csv(text: &str) -> Result<Vec<BenchRecord>, BenchError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(BenchError::Parse {
            line: 1,
            msg: "empty document".into(),
        })?;
        if header.trim() != Self::CSV_HEADER {
            return Err(BenchError::Parse {
                line: 1,
                msg: format!("unexpected header `{header}`"),
            });
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            // Blank lines and # comments (warnings recorded by the bench
            // driver) are not records.
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            records.push(Self::parse_row(line, i + 1)?);
        }
        Ok(records)
    }

    fn parse_row(line: &str, lineno: usize) -> Result<BenchRecord, BenchError> {
        let err = |msg: String| BenchError::Parse { line: lineno, msg };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(err(format!("expected 13 columns, got {}", fields.len())));
        }
        fn num<T: std::str::FromStr>(
            field: &str,
            what: &str,
            lineno: usize,
        ) -> Result<T, BenchError> {
            field.parse().map_err(|_| BenchError::Parse {
                line: lineno,
                msg: format!("cannot parse {what} from `{field}`"),
            })
        }
        let record = BenchRecord {
            kernel: fields[0].to_string(),
            layout: fields[1].to_string(),
            vvl: num(fields[2], "vvl", lineno)?,
            backend: fields[3].to_string(),
            workers: num(fields[4], "workers", lineno)?,
            reps: num(fields[5], "reps", lineno)?,
            min_time_s: num(fields[6], "min_time_s", lineno)?,
            bytes: num(fields[7], "bytes", lineno)?,
            flops: num(fields[8], "flops", lineno)?,
            pct_stream: num(fields[11], "pct_stream", lineno)?,
            bound_class: fields[12]
                .parse()
                .map_err(|_| err(format!("unknown bound class `{}`", fields[12])))?,
        };
        if !record.min_time_s.is_finite() || record.min_time_s <= 0.0 {
            return Err(err(format!(
                "min_time_s must be positive, got {}",
                record.min_time_s
            )));
        }
        // The derived columns must agree with the primaries bit for bit;
        // anything else means the file was not produced by this writer.
        let bandwidth: f64 = num(fields[9], "bandwidth_gbs", lineno)?;
        if bandwidth.to_bits() != record.bandwidth_gbs().to_bits() {
            return Err(err(format!(
                "bandwidth_gbs {} inconsistent with bytes/min_time_s {}",
                bandwidth,
                record.bandwidth_gbs()
            )));
        }
        let oi: f64 = num(fields[10], "oi", lineno)?;
        if oi.to_bits() != record.oi().to_bits() {
            return Err(err(format!(
                "oi {} inconsistent with flops/bytes {}",
                oi,
                record.oi()
            )));
        }
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> BenchRecord {
        BenchRecord {
            kernel: "triad".into(),
            layout: "aosoa:4".into(),
            vvl: 4,
            backend: "threads".into(),
            workers: 2,
            reps: 5,
            min_time_s: 0.001953125,
            bytes: 24_000,
            flops: 2_000,
            pct_stream: 97.5,
            bound_class: BoundClass::MemoryBound,
        }
    }

    #[test]
    fn identities_hold_by_construction() {
        let r = sample();
        assert_eq!(r.bandwidth_bytes_per_s() * r.min_time_s, r.bytes as f64);
        assert_eq!(r.oi() * r.bytes as f64, r.flops as f64);
    }

    #[test]
    fn csv_round_trip() {
        let records = vec![
            sample(),
            BenchRecord {
                kernel: "collision".into(),
                layout: "soa".into(),
                vvl: 1,
                backend: "serial".into(),
                workers: 1,
                reps: 3,
                min_time_s: 0.1234567890123,
                bytes: 147_456,
                flops: 154_624,
                pct_stream: 101.25,
                bound_class: BoundClass::MemoryBound,
            },
        ];
        let text = BenchRecord::emit_csv(&records);
        let parsed = BenchRecord::parse_csv(&text).unwrap();
        assert_eq!(parsed, records);
    }

    #[test]
    fn header_is_the_documented_column_order() {
        assert_eq!(
            BenchRecord::CSV_HEADER,
            "kernel,layout,vvl,backend,workers,reps,min_time_s,bytes,flops,bandwidth_gbs,oi,pct_stream,bound_class"
        );
        let text = BenchRecord::emit_csv(&[sample()]);
        assert!(text.starts_with("kernel,layout,"));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let mut text = BenchRecord::emit_csv(&[sample()]);
        text.push_str("only,three,columns\n");
        match BenchRecord::parse_csv(&text).unwrap_err() {
            BenchError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }

        assert!(BenchRecord::parse_csv("bogus header\n").is_err());
        assert!(BenchRecord::parse_csv("").is_err());
    }

    #[test]
    fn tampered_derived_columns_are_rejected() {
        let text = BenchRecord::emit_csv(&[sample()]);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut fields: Vec<String> = lines[1].split(',').map(String::from).collect();
        fields[10] = "0.5".into(); // oi no longer equals flops/bytes
        lines[1] = fields.join(",");
        let tampered = lines.join("\n");
        assert!(matches!(
            BenchRecord::parse_csv(&tampered),
            Err(BenchError::Parse { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn round_trip_any_record(
            vvl in 1usize..16,
            workers in 1usize..16,
            reps in 1usize..100,
            time_us in 1u64..10_000_000,
            bytes in 1u64..1u64 << 40,
            flops in 0u64..1u64 << 40,
            pct in 0.0f64..200.0,
        ) {
            let r = BenchRecord {
                kernel: "scale".into(),
                layout: "aosoa:8".into(),
                vvl,
                backend: "threads".into(),
                workers,
                reps,
                min_time_s: time_us as f64 * 1e-6,
                bytes,
                flops,
                pct_stream: pct,
                bound_class: BoundClass::MemoryBound,
            };
            let parsed = BenchRecord::parse_csv(&BenchRecord::emit_csv(std::slice::from_ref(&r))).unwrap();
            prop_assert_eq!(parsed, vec![r]);
        }
    }
}
