//! Per-iteration trace export.

use std::io::Write;

use amsqn_core::optimizer::{RunResult, RunStatus};
use serde::Serialize;

use crate::error::Result;

pub const COLUMNS: [&str; 8] = [
    "iter",
    "f",
    "grad_norm",
    "grad_ratio",
    "mu",
    "alpha_eff",
    "secants_kept",
    "time_ms",
];

/// Writes the trace as CSV. Limited-memory runs (rows carrying a memory
/// size) get two extra columns, `L` and `gamma`.
pub fn write_trace<W: Write>(out: W, r: &RunResult) -> Result<()> {
    let limited = r.trace.iter().any(|t| t.memory.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if limited {
        header.extend(["L", "gamma"]);
    }
    w.write_record(&header)?;
    for t in &r.trace {
        let mut rec = vec![
            t.iter.to_string(),
            t.f.to_string(),
            t.grad_norm.to_string(),
            t.grad_ratio.to_string(),
            t.mu.to_string(),
            t.alpha_eff.to_string(),
            t.secants_kept.to_string(),
            format!("{:.3}", t.time_ms),
        ];
        if limited {
            rec.push(t.memory.map(|m| m.to_string()).unwrap_or_default());
            rec.push(t.gamma.map(|g| g.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Result part of the run summary.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<String>,
    pub iterations: usize,
    pub f: f64,
    pub grad_ratio: f64,
    pub mu_sum: f64,
    pub skipped_updates: usize,
    pub descent_violations: usize,
    /// Step length of the first iteration, after defaults were resolved.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl RunSummary {
    pub fn of(r: &RunResult) -> Self {
        let (status, divergence) = match &r.status {
            RunStatus::Converged => ("converged", None),
            RunStatus::MaxIter => ("max_iter", None),
            RunStatus::Diverged(why) => ("diverged", Some(why.clone())),
        };
        RunSummary {
            status,
            divergence,
            iterations: r.iterations,
            f: r.f,
            grad_ratio: r.grad_ratio,
            mu_sum: r.mu_sum(),
            skipped_updates: r.skipped_updates,
            descent_violations: r.descent_violations,
            alpha: r.trace.first().map(|t| t.alpha_eff),
        }
    }
}
