//! Deterministic experiment outputs: CSV tables and a JSON report with
//! provenance. Nothing here depends on wall-clock time, so reruns of the same
//! config produce byte-identical files.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

/// One aggregated metric row: `n` values of `metric` for `method` on `task`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub task: String,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// One sampled trajectory outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRow {
    pub task: String,
    pub method: String,
    pub seed: u64,
    pub final_distance: f64,
    pub reached_goal: bool,
    pub hit_obstacle: bool,
}

/// The JSON companion to `report.csv`: the same rows plus provenance that
/// pins exactly which inputs produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDocument {
    pub crate_version: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<MetricRow>,
}

impl ReportDocument {
    pub fn new(config_text: &str, seeds: Vec<u64>, rows: Vec<MetricRow>) -> Self {
        ReportDocument {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            seeds,
            rows,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        write!(out, "{byte:02x}").expect("writing to a String cannot fail");
    }
    out
}

/// Sample mean and population standard deviation; (0, 0) for empty input.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, variance.sqrt())
}

fn csv_float(value: f64) -> String {
    format!("{value:.16e}")
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("task,method,metric,mean,std,n\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.task,
            row.method,
            row.metric,
            csv_float(row.mean),
            csv_float(row.std),
            row.n
        );
    }
    out
}

pub fn rollouts_csv(rows: &[RolloutRow]) -> String {
    let mut out = String::from("task,method,seed,final_distance,reached_goal,hit_obstacle\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.task,
            row.method,
            row.seed,
            csv_float(row.final_distance),
            row.reached_goal,
            row.hit_obstacle
        );
    }
    out
}

/// A residual trace table: one row per recorded sweep of one method.
pub fn traces_csv(traces: &[(String, Vec<f64>)]) -> String {
    let mut out = String::from("method,iteration,residual\n");
    for (method, residuals) in traces {
        for (iteration, residual) in residuals.iter().enumerate() {
            let _ = writeln!(out, "{method},{},{}", iteration + 1, csv_float(*residual));
        }
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_matches_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn mean_std_population_convention() {
        let (mean, std) = mean_std(&[1.0, 3.0]);
        assert_eq!(mean, 2.0);
        assert_eq!(std, 1.0);
        assert_eq!(mean_std(&[]), (0.0, 0.0));
    }

    #[test]
    fn csv_is_stable_and_headered() {
        let rows = vec![MetricRow {
            task: "a+b".into(),
            method: "soft-merged".into(),
            metric: "final_distance".into(),
            mean: 0.1,
            std: 0.0,
            n: 3,
        }];
        let text = metrics_csv(&rows);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("task,method,metric,mean,std,n"));
        assert_eq!(
            lines.next(),
            Some("a+b,soft-merged,final_distance,1.0000000000000001e-1,0.0000000000000000e0,3")
        );
        assert_eq!(metrics_csv(&rows), text);
    }

    #[test]
    fn trace_rows_are_one_indexed() {
        let text = traces_csv(&[("direct".into(), vec![0.5, 0.25])]);
        assert!(text.contains("direct,1,5.0000000000000000e-1"));
        assert!(text.contains("direct,2,2.5000000000000000e-1"));
    }
}
