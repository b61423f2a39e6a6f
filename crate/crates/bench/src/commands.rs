//! The CLI subcommands as library functions.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use amsqn_core::limited;
use amsqn_core::optimizer;
use serde::{Deserialize, Serialize};

use crate::bench_mu::{self, MuBenchRow, MuBenchSpec};
use crate::config::{read_json, ProblemSpec, RunConfig, SweepSpec};
use crate::error::Result;
use crate::report::{self, RunRecord, Table};
use crate::sweep;
use crate::trace::{self, RunSummary};

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct RunDoc<'a> {
    config: &'a RunConfig,
    effective_solver: &'a optimizer::SolverConfig,
    result: &'a RunSummary,
}

/// Solves one problem; writes `trace.csv` and `summary.json` into `out`.
/// Divergence is a result, not an error.
pub fn cmd_run(config: &Path, out: &Path) -> Result<RunSummary> {
    let cfg: RunConfig = read_json(config)?;
    cfg.validate()?;
    let base = config.parent().unwrap_or(Path::new("."));
    let p = cfg.instance(base)?;
    let solver = cfg.effective_solver();
    let r = match &cfg.limited {
        Some(lm) => limited::run_lms_bfgs(&p, &solver, lm)?,
        None => optimizer::run(&p, &solver)?,
    };
    create_dir(out)?;
    trace::write_trace(BufWriter::new(File::create(out.join("trace.csv"))?), &r)?;
    let summary = RunSummary::of(&r);
    write_json(
        &out.join("summary.json"),
        &RunDoc {
            config: &cfg,
            effective_solver: &solver,
            result: &summary,
        },
    )?;
    Ok(summary)
}

/// Runs a sweep; writes `sweep.csv`, `table.md` and the expanded spec.
pub fn cmd_sweep(config: &Path, out: &Path, seeds: Option<usize>, jobs: Option<usize>) -> Result<Vec<RunRecord>> {
    let mut spec: SweepSpec = read_json(config)?;
    if let Some(k) = seeds {
        spec.seeds = (0..k as u64).collect();
    }
    let records = sweep::run_sweep(&spec, sweep::resolve_jobs(jobs))?;
    create_dir(out)?;
    write_json(&out.join("sweep_spec.json"), &spec)?;
    report::write_records(BufWriter::new(File::create(out.join("sweep.csv"))?), &records)?;
    fs::write(out.join("table.md"), Table::from_records(&records).to_markdown())?;
    Ok(records)
}

/// Overrides for `bench-mu` given on the command line.
#[derive(Debug, Clone, Default)]
pub struct MuOverrides {
    pub n: Option<Vec<usize>>,
    pub q: Option<Vec<usize>>,
    pub trials: Option<usize>,
}

pub fn cmd_bench_mu(config: Option<&Path>, out: &Path, over: MuOverrides) -> Result<Vec<MuBenchRow>> {
    let mut spec: MuBenchSpec = match config {
        Some(path) => read_json(path)?,
        None => MuBenchSpec::default(),
    };
    if let Some(n) = over.n {
        spec.n = n;
    }
    if let Some(q) = over.q {
        spec.q = q;
    }
    if let Some(t) = over.trials {
        spec.trials = t;
    }
    let rows = bench_mu::bench_mu(&spec)?;
    create_dir(out)?;
    bench_mu::write_rows(BufWriter::new(File::create(out.join("bench_mu.csv"))?), &rows)?;
    Ok(rows)
}

/// Input of `gen`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub seed: u64,
}

/// Writes the generated instance to `out/instance.json` and returns its path.
pub fn cmd_gen(config: &Path, out: &Path, seed: Option<u64>) -> Result<PathBuf> {
    let cfg: GenConfig = read_json(config)?;
    let p = cfg.problem.build(seed.unwrap_or(cfg.seed))?;
    create_dir(out)?;
    let path = out.join("instance.json");
    p.save(&path)?;
    Ok(path)
}

/// Markdown table from a sweep CSV; written to `out/table.md` when `out` is
/// given.
pub fn cmd_report(input: &Path, out: Option<&Path>) -> Result<String> {
    let records = report::read_records(File::open(input)?)?;
    let md = Table::from_records(&records).to_markdown();
    if let Some(dir) = out {
        create_dir(dir)?;
        fs::write(dir.join("table.md"), &md)?;
    }
    Ok(md)
}
