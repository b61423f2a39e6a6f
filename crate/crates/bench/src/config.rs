//! JSON documents read by the CLI. Every optional field has a default, and
//! the parsed document (defaults filled in) is echoed into the outputs.

use std::path::{Path, PathBuf};

use amsqn_core::limited::LimitedConfig;
use amsqn_core::optimizer::SolverConfig;
use amsqn_core::problems::{self, ProblemInstance, ProblemKind, Regime};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::label::Variant;

fn d_m() -> usize {
    200
}
fn d_n() -> usize {
    100
}
fn d_c_bar() -> f64 {
    30.0
}
fn d_one() -> f64 {
    1.0
}
fn d_p() -> f64 {
    2.5
}
fn d_classes() -> usize {
    10
}
fn d_hidden() -> usize {
    100
}
fn d_cond() -> f64 {
    100.0
}

/// Parameters for one generated problem. Fields a kind does not use are
/// ignored. For `mlp-binary`, `n` is the input width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    #[serde(default = "d_m")]
    pub m: usize,
    #[serde(default = "d_n")]
    pub n: usize,
    #[serde(default = "d_c_bar")]
    pub c_bar: f64,
    /// Noise scale of the logistic-regression features.
    #[serde(default = "d_one")]
    pub omega: f64,
    #[serde(default)]
    pub regime: Regime,
    /// Label noise for `porder` and `xent`.
    #[serde(default = "d_one")]
    pub sigma: f64,
    #[serde(default = "d_p")]
    pub p: f64,
    #[serde(default = "d_classes")]
    pub n_classes: usize,
    #[serde(default = "d_hidden")]
    pub hidden: usize,
    /// Condition number of the quadratic.
    #[serde(default = "d_cond")]
    pub cond: f64,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind) -> Self {
        ProblemSpec {
            kind,
            m: d_m(),
            n: d_n(),
            c_bar: d_c_bar(),
            omega: d_one(),
            regime: Regime::default(),
            sigma: d_one(),
            p: d_p(),
            n_classes: d_classes(),
            hidden: d_hidden(),
            cond: d_cond(),
        }
    }

    pub fn build(&self, seed: u64) -> Result<ProblemInstance> {
        let s = self;
        Ok(match s.kind {
            ProblemKind::Logreg => problems::gen_logreg(s.m, s.n, s.c_bar, s.omega, s.regime, seed)?,
            ProblemKind::Porder => problems::gen_porder(s.m, s.n, s.p, s.c_bar, s.sigma, seed)?,
            ProblemKind::Xent => problems::gen_xent(s.m, s.n, s.n_classes, s.c_bar, s.sigma, seed)?,
            ProblemKind::Quadratic => problems::gen_quadratic(s.n, s.cond, seed)?,
            ProblemKind::MlpBinary => problems::gen_mlp(s.n, s.hidden, s.m, seed)?,
        })
    }
}

/// Input of `run`: a problem (generated or loaded), a solver, and optionally
/// a limited-memory setting. `variant` applies a table code on top of
/// `solver`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpec>,
    /// Instance JSON written by `gen`; used instead of `problem`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem_file: Option<PathBuf>,
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limited: Option<LimitedConfig>,
}

impl RunConfig {
    /// The solver after `variant` is applied.
    pub fn effective_solver(&self) -> SolverConfig {
        match &self.variant {
            Some(v) => v.configure(&self.solver),
            None => self.solver.clone(),
        }
    }

    /// The problem, resolving `problem_file` relative to `base_dir`.
    pub fn instance(&self, base_dir: &Path) -> Result<ProblemInstance> {
        match (&self.problem, &self.problem_file) {
            (Some(spec), None) => spec.build(self.solver.seed),
            (None, Some(path)) => Ok(ProblemInstance::load(&base_dir.join(path))?),
            _ => Err(BenchError::Config("give exactly one of `problem` and `problem_file`".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.effective_solver().validate()?;
        if let Some(lm) = &self.limited {
            if lm.memory == 0 {
                return Err(BenchError::Config("limited.memory must be at least 1".into()));
            }
        }
        if self.problem.is_some() == self.problem_file.is_some() {
            return Err(BenchError::Config("give exactly one of `problem` and `problem_file`".into()));
        }
        Ok(())
    }
}

fn d_q() -> usize {
    5
}
fn d_eps_tol() -> f64 {
    1e-4
}
fn d_max_iter() -> usize {
    10_000
}
fn d_rejection_eps() -> f64 {
    0.01
}
fn d_seeds() -> Vec<u64> {
    (0..5).collect()
}

/// Solver settings shared by every variant of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSolver {
    #[serde(default = "d_q")]
    pub q: usize,
    #[serde(default = "d_eps_tol")]
    pub eps_tol: f64,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "d_rejection_eps")]
    pub rejection_eps: f64,
    #[serde(default)]
    pub shift: amsqn_core::shift::ShiftParams,
}

impl Default for SweepSolver {
    fn default() -> Self {
        SweepSolver {
            q: d_q(),
            eps_tol: d_eps_tol(),
            max_iter: d_max_iter(),
            alpha: None,
            rejection_eps: d_rejection_eps(),
            shift: Default::default(),
        }
    }
}

impl SweepSolver {
    pub fn base_config(&self, seed: u64) -> SolverConfig {
        let mut cfg = SolverConfig::new(amsqn_core::optimizer::SolverMethod::Bfgs);
        cfg.q = self.q;
        cfg.eps_tol = self.eps_tol;
        cfg.max_iter = self.max_iter;
        cfg.alpha = self.alpha;
        cfg.rejection_eps = self.rejection_eps;
        cfg.shift = self.shift;
        cfg.seed = seed;
        cfg
    }
}

/// A grid of problems times a list of method variants, run over seeds.
/// Empty `c_bar`, `sigma` and `regime` lists mean the value in `problem`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub c_bar: Vec<f64>,
    #[serde(default)]
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub regime: Vec<Regime>,
    pub methods: Vec<Variant>,
    #[serde(default)]
    pub solver: SweepSolver,
    #[serde(default = "d_seeds")]
    pub seeds: Vec<u64>,
}

/// One column of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub name: String,
    pub spec: ProblemSpec,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(BenchError::Config("sweep needs at least one method".into()));
        }
        if self.seeds.is_empty() {
            return Err(BenchError::Config("sweep needs at least one seed".into()));
        }
        for v in &self.methods {
            v.configure(&self.solver.base_config(0)).validate()?;
        }
        Ok(())
    }

    /// Problem cells in column order: `c_bar` outermost, then `sigma`, then
    /// `regime`.
    pub fn cells(&self) -> Vec<Cell> {
        let or_base = |v: &[f64], base: f64| if v.is_empty() { vec![base] } else { v.to_vec() };
        let c_bars = or_base(&self.c_bar, self.problem.c_bar);
        let sigmas = or_base(&self.sigma, self.problem.sigma);
        let regimes = if self.regime.is_empty() {
            vec![self.problem.regime]
        } else {
            self.regime.clone()
        };
        let mut out = Vec::new();
        for &c in &c_bars {
            for &s in &sigmas {
                for &r in &regimes {
                    let mut spec = self.problem.clone();
                    spec.c_bar = c;
                    spec.sigma = s;
                    spec.regime = r;
                    let mut name = format!("c̄={c}");
                    if self.sigma.len() > 1 {
                        name.push_str(&format!(" σ={s}"));
                    }
                    if self.regime.len() > 1 || spec.kind == ProblemKind::Logreg {
                        name.push_str(match r {
                            Regime::High => " high",
                            Regime::Low => " low",
                        });
                    }
                    out.push(Cell { name, spec });
                }
            }
        }
        out
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
}
