//! Method-by-problem sweeps over seeds.

use std::panic::{catch_unwind, AssertUnwindSafe};

use amsqn_core::optimizer::{self, RunStatus};
use rayon::prelude::*;

use crate::config::{Cell, SweepSpec};
use crate::error::{BenchError, Result};
use crate::label::Variant;
use crate::report::{Outcome, RunRecord};

/// Worker count: explicit value, else `AMSQN_JOBS`, else all cores.
pub fn resolve_jobs(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var("AMSQN_JOBS").ok().and_then(|v| v.parse().ok()))
        .filter(|&j| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every (cell, variant, seed) combination on `jobs` workers. Records
/// come back in that nesting order regardless of scheduling, and a failing
/// run becomes an `err` record rather than an error.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    let cells = spec.cells();
    let mut work = Vec::new();
    for cell in &cells {
        for v in &spec.methods {
            for &seed in &spec.seeds {
                work.push((cell, *v, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| BenchError::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        work.par_iter()
            .map(|&(cell, v, seed)| run_one(spec, cell, v, seed))
            .collect()
    }))
}

fn run_one(spec: &SweepSpec, cell: &Cell, v: Variant, seed: u64) -> RunRecord {
    let mut rec = RunRecord {
        variant: v.to_string(),
        cell: cell.name.clone(),
        seed,
        status: Outcome::Err,
        iterations: 0,
        descent_violations: 0,
        skipped: 0,
        note: String::new(),
    };
    let attempt = catch_unwind(AssertUnwindSafe(|| -> Result<optimizer::RunResult> {
        let p = cell.spec.build(seed)?;
        let cfg = v.configure(&spec.solver.base_config(seed));
        Ok(optimizer::run(&p, &cfg)?)
    }));
    match attempt {
        Ok(Ok(r)) => {
            rec.iterations = r.iterations;
            rec.descent_violations = r.descent_violations;
            rec.skipped = r.skipped_updates;
            rec.status = match r.status {
                RunStatus::Converged => Outcome::Converged,
                RunStatus::MaxIter => Outcome::InfIter,
                RunStatus::Diverged(why) => {
                    rec.note = why;
                    Outcome::InfDiv
                }
            };
        }
        Ok(Err(e)) => rec.note = e.to_string(),
        Err(_) => rec.note = "panicked".into(),
    }
    rec
}
