//! Experiment reports and their CSV/JSON forms.
//!
//! The CSV column set and order are a contract; rows are written in a fixed
//! order and floats with Rust's shortest-roundtrip formatting, so a report
//! for a given config and seed is byte-identical regardless of thread count.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::Result;

pub const CSV_HEADER: &str = "task,method,baseline,n,d,rho,sigma_w,sigma_u,horizon_T,rollouts_N,trials,failures,scaled_risk_mean,scaled_risk_stderr,prediction,prediction_kind,seed";

/// One (method, grid-point) aggregate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: String,
    pub method: String,
    pub baseline: Option<String>,
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    pub sigma_w: f64,
    pub sigma_u: f64,
    pub horizon_t: Option<usize>,
    pub rollouts_n: Option<usize>,
    pub trials: usize,
    pub failures: usize,
    pub scaled_risk_mean: f64,
    pub scaled_risk_stderr: f64,
    pub prediction: Option<f64>,
    pub prediction_kind: Option<String>,
    pub seed: u64,
    /// Seconds spent on this row; JSON only, never in the CSV contract.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

fn push_float(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("NaN");
    } else {
        let _ = write!(out, "{v}");
    }
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(128 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.task);
            out.push(',');
            out.push_str(&r.method);
            out.push(',');
            if let Some(b) = &r.baseline {
                out.push_str(b);
            }
            let _ = write!(out, ",{},{},", r.n, r.d);
            push_float(&mut out, r.rho);
            out.push(',');
            push_float(&mut out, r.sigma_w);
            out.push(',');
            push_float(&mut out, r.sigma_u);
            out.push(',');
            if let Some(t) = r.horizon_t {
                let _ = write!(out, "{t}");
            }
            out.push(',');
            if let Some(n) = r.rollouts_n {
                let _ = write!(out, "{n}");
            }
            let _ = write!(out, ",{},{},", r.trials, r.failures);
            push_float(&mut out, r.scaled_risk_mean);
            out.push(',');
            push_float(&mut out, r.scaled_risk_stderr);
            out.push(',');
            if let Some(p) = r.prediction {
                push_float(&mut out, p);
            }
            out.push(',');
            if let Some(k) = &r.prediction_kind {
                out.push_str(k);
            }
            let _ = write!(out, ",{}", r.seed);
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| crate::error::Error::ConfigParse(e.to_string()))
    }
}

/// Pairwise (tree) summation in index order: deterministic and more accurate
/// than a running sum.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Mean and standard error from per-trial values; one trial yields a NaN
/// standard error sentinel.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let count = values.len();
    if count == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / count as f64;
    if count == 1 {
        return (mean, f64::NAN);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (count as f64 - 1.0);
    (mean, (var / count as f64).sqrt())
}
