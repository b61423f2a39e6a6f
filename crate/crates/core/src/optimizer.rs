//! Fixed-step drivers: multisecant quasi-Newton with optional PSD shifts,
//! gradient descent and Newton's method.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::problems::ProblemInstance;
use crate::secant::{RejectionRule, SecantHistory, SecantMode};
use crate::shift::{self, MuLedger, ShiftParams};
use crate::updates::{self, HessianState, LowRankFactors, Method, UpdateMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    Broyden,
    Psb,
    Dfp,
    Bfgs,
    Gd,
    Newton,
}

impl SolverMethod {
    pub fn quasi_newton(self) -> Option<Method> {
        match self {
            SolverMethod::Broyden => Some(Method::Broyden),
            SolverMethod::Psb => Some(Method::Psb),
            SolverMethod::Dfp => Some(Method::Dfp),
            SolverMethod::Bfgs => Some(Method::Bfgs),
            SolverMethod::Gd | SolverMethod::Newton => None,
        }
    }
}

impl From<Method> for SolverMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Broyden => SolverMethod::Broyden,
            Method::Psb => SolverMethod::Psb,
            Method::Dfp => SolverMethod::Dfp,
            Method::Bfgs => SolverMethod::Bfgs,
        }
    }
}

impl std::str::FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "broyden" => SolverMethod::Broyden,
            "psb" => SolverMethod::Psb,
            "dfp" => SolverMethod::Dfp,
            "bfgs" => SolverMethod::Bfgs,
            "gd" => SolverMethod::Gd,
            "newton" => SolverMethod::Newton,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown method {other:?} (expected broyden, psb, dfp, bfgs, gd or newton)"
                )))
            }
        })
    }
}

/// How the raw update is repaired before it is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation {
    /// Raw update, no symmetrization.
    #[default]
    None,
    SymmetricOnly,
    /// Symmetrize and add the certified shift `μI`.
    Ours,
    /// Symmetrize and clamp negative eigenvalues.
    PsdProjection,
}

fn default_q() -> usize {
    5
}
fn default_eps_tol() -> f64 {
    1e-4
}
fn default_max_iter() -> usize {
    10_000
}
fn default_rejection_eps() -> f64 {
    0.01
}
fn default_divergence_ratio() -> f64 {
    1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    #[serde(default)]
    pub update_mode: UpdateMode,
    #[serde(default = "default_q")]
    pub q: usize,
    /// Step length. `None` means 1 for quasi-Newton and Newton, and the
    /// reciprocal of a power-iteration curvature estimate for gradient
    /// descent.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub secant_mode: SecantMode,
    #[serde(default)]
    pub perturbation: Perturbation,
    #[serde(default)]
    pub rejection: bool,
    #[serde(default = "default_rejection_eps")]
    pub rejection_eps: f64,
    #[serde(default)]
    pub rejection_rule: RejectionRule,
    #[serde(default)]
    pub mu_scaling: bool,
    /// Shift-correction period; 0 turns correction off.
    #[serde(default)]
    pub nu: usize,
    #[serde(default = "default_eps_tol")]
    pub eps_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub shift: ShiftParams,
    /// Gradient-norm growth treated as divergence.
    #[serde(default = "default_divergence_ratio")]
    pub divergence_ratio: f64,
}

impl SolverConfig {
    pub fn new(method: SolverMethod) -> Self {
        SolverConfig {
            method,
            update_mode: UpdateMode::Inverse,
            q: default_q(),
            alpha: None,
            secant_mode: SecantMode::Curve,
            perturbation: Perturbation::None,
            rejection: false,
            rejection_eps: default_rejection_eps(),
            rejection_rule: RejectionRule::NearParallel,
            mu_scaling: false,
            nu: 0,
            eps_tol: default_eps_tol(),
            max_iter: default_max_iter(),
            seed: 0,
            shift: ShiftParams::default(),
            divergence_ratio: default_divergence_ratio(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::InvalidParameter("q must be at least 1".into()));
        }
        if !(self.eps_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("eps_tol must be positive, got {}", self.eps_tol)));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return Err(Error::InvalidParameter(format!("alpha must be positive, got {a}")));
            }
        }
        if !(self.rejection_eps > 0.0 && self.rejection_eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rejection tolerance must lie in (0, 1), got {}",
                self.rejection_eps
            )));
        }
        self.shift.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    MaxIter,
    Diverged(String),
}

/// One row per step taken. `f`, `grad_norm` and `grad_ratio` describe the
/// iterate the step starts from; `mu` and `alpha_eff` the step itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub grad_ratio: f64,
    pub mu: f64,
    pub alpha_eff: f64,
    pub secants_kept: usize,
    pub time_ms: f64,
    /// `gᵀd` for the search direction `d`.
    pub slope: f64,
    /// The update was skipped (singular system or shift cap) and a gradient
    /// step taken.
    pub skipped: bool,
    /// Memory length, limited-memory runs only.
    pub memory: Option<usize>,
    /// Initial inverse-Hessian scale, limited-memory runs only.
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub status: RunStatus,
    /// Steps taken; equals `trace.len()`.
    pub iterations: usize,
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_ratio: f64,
    pub trace: Vec<TraceRow>,
    pub skipped_updates: usize,
    /// Steps with `gᵀd > 0`.
    pub descent_violations: usize,
}

impl RunResult {
    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    pub fn mu_sum(&self) -> f64 {
        self.trace.iter().map(|r| r.mu).sum()
    }
}

/// `d = -B⁻¹g`: a solve in direct mode, a product in inverse mode.
pub fn step_direction(state: &HessianState, g: &Vector) -> Result<Vector> {
    match state.mode {
        UpdateMode::Direct => Ok(-linalg::LuFactor::new(&state.matrix)?.solve_vec(g)),
        UpdateMode::Inverse => Ok(-(&state.matrix * g)),
    }
}

/// Bookkeeping shared by all drivers.
pub(crate) struct Tracker {
    start: Instant,
    g0: f64,
    eps_tol: f64,
    divergence_ratio: f64,
    pub trace: Vec<TraceRow>,
    pub skipped: usize,
    pub violations: usize,
}

pub(crate) enum Check {
    Continue,
    Stop(RunStatus),
}

impl Tracker {
    pub fn new(g0: f64, cfg: &SolverConfig) -> Self {
        Tracker {
            start: Instant::now(),
            g0,
            eps_tol: cfg.eps_tol,
            divergence_ratio: cfg.divergence_ratio,
            trace: Vec::new(),
            skipped: 0,
            violations: 0,
        }
    }

    pub fn ratio(&self, g: &Vector) -> f64 {
        if self.g0 == 0.0 {
            0.0
        } else {
            g.norm() / self.g0
        }
    }

    /// Stopping test at the current iterate.
    pub fn converged(&self, g: &Vector) -> bool {
        self.ratio(g) <= self.eps_tol
    }

    /// Divergence test after a step.
    pub fn check_new(&self, f: f64, g: &Vector) -> Check {
        if !f.is_finite() || !g.iter().all(|v| v.is_finite()) {
            return Check::Stop(RunStatus::Diverged("non-finite objective or gradient".into()));
        }
        if self.ratio(g) > self.divergence_ratio {
            return Check::Stop(RunStatus::Diverged(format!(
                "gradient ratio exceeded {:.0e}",
                self.divergence_ratio
            )));
        }
        Check::Continue
    }

    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        iter: usize,
        f: f64,
        g: &Vector,
        d: &Vector,
        mu: f64,
        alpha_eff: f64,
        secants_kept: usize,
        skipped: bool,
    ) -> &mut TraceRow {
        let slope = g.dot(d);
        if slope > 0.0 {
            self.violations += 1;
        }
        if skipped {
            self.skipped += 1;
        }
        self.trace.push(TraceRow {
            iter,
            f,
            grad_norm: g.norm(),
            grad_ratio: self.ratio(g),
            mu,
            alpha_eff,
            secants_kept,
            time_ms: self.start.elapsed().as_secs_f64() * 1e3,
            slope,
            skipped,
            memory: None,
            gamma: None,
        });
        self.trace.last_mut().expect("just pushed")
    }

    pub fn finish(self, status: RunStatus, x: &Vector, f: f64, g: &Vector) -> RunResult {
        RunResult {
            grad_ratio: self.ratio(g),
            iterations: self.trace.len(),
            status,
            x: x.iter().copied().collect(),
            f,
            trace: self.trace,
            skipped_updates: self.skipped,
            descent_violations: self.violations,
        }
    }
}

/// Runs the configured method.
pub fn run(p: &ProblemInstance, cfg: &SolverConfig) -> Result<RunResult> {
    match cfg.method {
        SolverMethod::Gd => run_gd(p, cfg),
        SolverMethod::Newton => run_newton(p, cfg),
        _ => run_amsqn(p, cfg),
    }
}

/// Multisecant quasi-Newton. Each iteration assembles the secants (optionally
/// filtered), updates the estimate, repairs it per `cfg.perturbation`, and
/// steps along `-B⁻¹g` computed from the updated estimate.
pub fn run_amsqn(p: &ProblemInstance, cfg: &SolverConfig) -> Result<RunResult> {
    run_amsqn_observed(p, cfg, |_, _| {})
}

/// [`run_amsqn`] calling `observe(t, state)` after every update.
pub fn run_amsqn_observed<F>(p: &ProblemInstance, cfg: &SolverConfig, mut observe: F) -> Result<RunResult>
where
    F: FnMut(usize, &HessianState),
{
    cfg.validate()?;
    let method = cfg.method.quasi_newton().ok_or_else(|| {
        Error::InvalidParameter(format!("{:?} is not a quasi-Newton method", cfg.method))
    })?;
    let alpha = cfg.alpha.unwrap_or(1.0);
    let n = p.dim();

    let mut x = p.initial_point();
    let mut f = p.eval_f(&x)?;
    let mut g = p.eval_grad(&x)?;
    let mut tracker = Tracker::new(g.norm(), cfg);
    let mut history = SecantHistory::new(cfg.q, cfg.secant_mode);
    history.push(x.clone(), g.clone())?;
    let mut state = HessianState::identity(n, cfg.update_mode);
    let mut ledger = MuLedger::new(cfg.nu);

    for t in 0..cfg.max_iter {
        if tracker.converged(&g) {
            return Ok(tracker.finish(RunStatus::Converged, &x, f, &g));
        }
        let mut mu = 0.0;
        let mut kept = 0;
        let mut skipped = false;
        if history.len() >= 2 {
            let mut block = history.assemble()?;
            if cfg.rejection {
                block = block.reject(cfg.rejection_eps, cfg.rejection_rule);
            }
            kept = block.cols();
            match update_state(method, &state, &block.s, &block.y, cfg, &mut ledger, t) {
                Ok((next, applied)) => {
                    state = next;
                    mu = applied;
                }
                Err(e) if is_recoverable(&e) => skipped = true,
                Err(e) => return Err(e),
            }
            observe(t, &state);
        }

        let d = if skipped {
            -g.clone()
        } else {
            match step_direction(&state, &g) {
                Ok(d) => d,
                Err(e) if e.is_singular() => {
                    skipped = true;
                    -g.clone()
                }
                Err(e) => return Err(e),
            }
        };
        let alpha_eff = shift::mu_scaled_alpha(alpha, mu, cfg.mu_scaling, cfg.update_mode);
        tracker.record(t, f, &g, &d, mu, alpha_eff, kept, skipped);

        x.axpy(alpha_eff, &d, 1.0);
        let (fx, gx) = eval_lenient(p, &x)?;
        f = fx;
        g = gx;
        if let Check::Stop(status) = tracker.check_new(f, &g) {
            return Ok(tracker.finish(status, &x, f, &g));
        }
        history.push(x.clone(), g.clone())?;
    }
    let status = if tracker.converged(&g) {
        RunStatus::Converged
    } else {
        RunStatus::MaxIter
    };
    Ok(tracker.finish(status, &x, f, &g))
}

/// Failures that skip one update instead of aborting the run.
fn is_recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::SingularSystem { .. } | Error::ShiftCap { .. } | Error::NonFinite(_)
    )
}

/// Objective and gradient, with non-finite points reported as values so the
/// caller can flag divergence.
pub(crate) fn eval_lenient(p: &ProblemInstance, x: &Vector) -> Result<(f64, Vector)> {
    if !x.iter().all(|v| v.is_finite()) {
        return Ok((f64::NAN, Vector::from_element(x.len(), f64::NAN)));
    }
    Ok((p.eval_f(x)?, p.eval_grad(x)?))
}

/// One update of `state`, returning the new state and the shift applied.
pub fn update_state(
    method: Method,
    state: &HessianState,
    s: &Mat,
    y: &Mat,
    cfg: &SolverConfig,
    ledger: &mut MuLedger,
    iter: usize,
) -> Result<(HessianState, f64)> {
    let factors: LowRankFactors = match state.mode {
        UpdateMode::Direct => updates::direct_factors(method, &state.matrix, s, y)?,
        UpdateMode::Inverse => updates::inverse_factors(method, &state.matrix, s, y)?,
    };
    let (matrix, mu) = match cfg.perturbation {
        Perturbation::None => (updates::apply_raw(&state.matrix, &factors)?, 0.0),
        Perturbation::SymmetricOnly => (updates::apply_symmetrized(&state.matrix, &factors, 0.0)?, 0.0),
        Perturbation::PsdProjection => (
            shift::psd_projection(&updates::apply_symmetrized(&state.matrix, &factors, 0.0)?)?,
            0.0,
        ),
        Perturbation::Ours => {
            let estimate = shift::compute_mu(&factors.d1, &factors.d2, &factors.w, &cfg.shift)?;
            let mu = shift::correct_mu(ledger, estimate.mu, &state.matrix, iter)?;
            (updates::apply_symmetrized(&state.matrix, &factors, mu)?, mu)
        }
    };
    if !matrix.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("updated estimate"));
    }
    Ok((
        HessianState {
            matrix,
            mode: state.mode,
        },
        mu,
    ))
}

/// Largest Hessian eigenvalue at `x` by power iteration; finite-difference
/// Hessian-vector products where no analytic Hessian exists.
pub fn curvature_estimate(p: &ProblemInstance, x: &Vector) -> Result<f64> {
    match p.eval_hess(x) {
        Ok(h) => Ok(linalg::spectral_norm(&h)),
        Err(Error::Unsupported(_)) => {
            let g = p.eval_grad(x)?;
            let h = 1e-6 * (1.0 + x.norm());
            let n = x.len();
            let mut v = Vector::from_fn(n, |i, _| 1.0 + (i % 7) as f64 * 0.1);
            v /= v.norm();
            let mut lambda = 0.0;
            for _ in 0..200 {
                let hv = (p.eval_grad(&(x + &v * h))? - &g) / h;
                let next = hv.norm();
                if next == 0.0 {
                    break;
                }
                v = hv / next;
                let done = (next - lambda).abs() <= 1e-8 * next;
                lambda = next;
                if done {
                    break;
                }
            }
            Ok(lambda)
        }
        Err(e) => Err(e),
    }
}

pub fn run_gd(p: &ProblemInstance, cfg: &SolverConfig) -> Result<RunResult> {
    cfg.validate()?;
    let mut x = p.initial_point();
    let alpha = match cfg.alpha {
        Some(a) => a,
        None => {
            let l = curvature_estimate(p, &x)?;
            if !(l > 0.0) {
                return Err(Error::InvalidParameter("zero curvature at the start point; set alpha".into()));
            }
            1.0 / l
        }
    };
    let mut f = p.eval_f(&x)?;
    let mut g = p.eval_grad(&x)?;
    let mut tracker = Tracker::new(g.norm(), cfg);
    for t in 0..cfg.max_iter {
        if tracker.converged(&g) {
            return Ok(tracker.finish(RunStatus::Converged, &x, f, &g));
        }
        let d = -g.clone();
        tracker.record(t, f, &g, &d, 0.0, alpha, 0, false);
        x.axpy(alpha, &d, 1.0);
        (f, g) = eval_lenient(p, &x)?;
        if let Check::Stop(status) = tracker.check_new(f, &g) {
            return Ok(tracker.finish(status, &x, f, &g));
        }
    }
    let status = if tracker.converged(&g) {
        RunStatus::Converged
    } else {
        RunStatus::MaxIter
    };
    Ok(tracker.finish(status, &x, f, &g))
}

pub fn run_newton(p: &ProblemInstance, cfg: &SolverConfig) -> Result<RunResult> {
    cfg.validate()?;
    let alpha = cfg.alpha.unwrap_or(1.0);
    let mut x = p.initial_point();
    let mut f = p.eval_f(&x)?;
    let mut g = p.eval_grad(&x)?;
    let mut tracker = Tracker::new(g.norm(), cfg);
    for t in 0..cfg.max_iter {
        if tracker.converged(&g) {
            return Ok(tracker.finish(RunStatus::Converged, &x, f, &g));
        }
        let hess = p.eval_hess(&x)?;
        let d = match linalg::LuFactor::new(&hess) {
            Ok(lu) => -lu.solve_vec(&g),
            Err(e) if e.is_singular() => {
                return Ok(tracker.finish(RunStatus::Diverged(e.to_string()), &x, f, &g));
            }
            Err(e) => return Err(e),
        };
        tracker.record(t, f, &g, &d, 0.0, alpha, 0, false);
        x.axpy(alpha, &d, 1.0);
        (f, g) = eval_lenient(p, &x)?;
        if let Check::Stop(status) = tracker.check_new(f, &g) {
            return Ok(tracker.finish(status, &x, f, &g));
        }
    }
    let status = if tracker.converged(&g) {
        RunStatus::Converged
    } else {
        RunStatus::MaxIter
    };
    Ok(tracker.finish(status, &x, f, &g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{self, ProblemInstance};

    fn sphere(n: usize) -> ProblemInstance {
        ProblemInstance::quadratic(Mat::identity(n, n), Vector::from_element(n, 1.0), 0)
    }

    #[test]
    fn step_direction_identity() {
        let g = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        for mode in [UpdateMode::Direct, UpdateMode::Inverse] {
            let d = step_direction(&HessianState::identity(3, mode), &g).unwrap();
            assert!((d + &g).norm() < 1e-15);
        }
    }

    #[test]
    fn step_direction_modes_agree() {
        let b = Mat::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let h = b.clone().try_inverse().unwrap();
        let g = Vector::from_vec(vec![0.3, -1.0, 2.0]);
        let dd = step_direction(&HessianState { matrix: b, mode: UpdateMode::Direct }, &g).unwrap();
        let di = step_direction(&HessianState { matrix: h, mode: UpdateMode::Inverse }, &g).unwrap();
        assert!((&dd - &di).norm() <= 1e-8 * di.norm());
        assert!(g.dot(&dd) < 0.0);
    }

    #[test]
    fn gd_on_sphere_in_one_step() {
        let mut cfg = SolverConfig::new(SolverMethod::Gd);
        cfg.alpha = Some(1.0);
        let r = run_gd(&sphere(4), &cfg).unwrap();
        assert!(r.converged());
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn gd_default_step_and_monotone_gradient() {
        let p = problems::gen_quadratic(12, 50.0, 3).unwrap();
        let lmax = linalg::sym_eigen(&p.a).unwrap().0[11];
        let est = curvature_estimate(&p, &Vector::zeros(12)).unwrap();
        assert!((est - lmax).abs() <= 1e-3 * lmax);
        let mut cfg = SolverConfig::new(SolverMethod::Gd);
        cfg.max_iter = 200;
        let r = run_gd(&p, &cfg).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1].grad_norm <= w[0].grad_norm * (1.0 + 1e-12)));
    }

    #[test]
    fn newton_quadratic_one_step() {
        let p = problems::gen_quadratic(8, 100.0, 1).unwrap();
        let r = run_newton(&p, &SolverConfig::new(SolverMethod::Newton)).unwrap();
        assert!(r.converged());
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn newton_singular_hessian_is_divergence() {
        let q = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 0.0]));
        let p = ProblemInstance::quadratic(q, Vector::from_vec(vec![1.0, 1.0]), 0);
        let r = run_newton(&p, &SolverConfig::new(SolverMethod::Newton)).unwrap();
        assert!(matches!(r.status, RunStatus::Diverged(_)));
    }

    #[test]
    fn bfgs_direct_solves_quadratic_quickly() {
        let p = problems::gen_quadratic(10, 20.0, 2).unwrap();
        let mut cfg = SolverConfig::new(SolverMethod::Bfgs);
        cfg.update_mode = UpdateMode::Direct;
        cfg.q = 1;
        cfg.alpha = Some(1.0 / 20.0);
        cfg.max_iter = 200;
        let r = run_amsqn(&p, &cfg).unwrap();
        assert!(r.converged(), "{:?} after {}", r.status, r.iterations);
    }

    #[test]
    fn ours_keeps_descent_directions() {
        let p = problems::gen_logreg(60, 20, 5.0, 1.0, problems::Regime::High, 0).unwrap();
        for method in [SolverMethod::Bfgs, SolverMethod::Broyden, SolverMethod::Psb, SolverMethod::Dfp] {
            let mut cfg = SolverConfig::new(method);
            cfg.perturbation = Perturbation::Ours;
            cfg.max_iter = 60;
            let r = run_amsqn(&p, &cfg).unwrap();
            assert_eq!(r.descent_violations, 0, "{method:?}");
        }
    }

    #[test]
    fn trace_length_matches_iterations_and_is_deterministic() {
        let p = problems::gen_logreg(40, 10, 5.0, 1.0, problems::Regime::High, 1).unwrap();
        let mut cfg = SolverConfig::new(SolverMethod::Bfgs);
        cfg.perturbation = Perturbation::Ours;
        cfg.max_iter = 30;
        let a = run_amsqn(&p, &cfg).unwrap();
        let b = run_amsqn(&p, &cfg).unwrap();
        assert_eq!(a.trace.len(), a.iterations);
        let strip = |r: &RunResult| {
            r.trace
                .iter()
                .map(|t| (t.f, t.grad_norm, t.mu, t.alpha_eff, t.secants_kept))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn divergence_is_a_status() {
        let p = sphere(3);
        let mut cfg = SolverConfig::new(SolverMethod::Gd);
        cfg.alpha = Some(5.0);
        let r = run_gd(&p, &cfg).unwrap();
        assert!(matches!(r.status, RunStatus::Diverged(_)));
    }

    #[test]
    fn rejects_non_qn_method_in_amsqn() {
        assert!(run_amsqn(&sphere(2), &SolverConfig::new(SolverMethod::Gd)).is_err());
    }

    #[test]
    fn config_defaults_from_json() {
        let cfg: SolverConfig = serde_json::from_str(r#"{"method":"bfgs"}"#).unwrap();
        assert_eq!(cfg, SolverConfig::new(SolverMethod::Bfgs));
        assert!(serde_json::from_str::<SolverConfig>(r#"{"method":"sr1"}"#).is_err());
    }
}
