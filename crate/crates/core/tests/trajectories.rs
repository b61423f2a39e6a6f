use amsqn_core::limited::{self, GammaMode, LimitedConfig};
use amsqn_core::linalg::{self, Mat, Vector};
use amsqn_core::optimizer::{self, Perturbation, RunStatus, SolverConfig, SolverMethod};
use amsqn_core::problems::{self, ProblemInstance, Regime};
use amsqn_core::secant::{SecantHistory, SecantMode};
use amsqn_core::shift::ShiftParams;
use amsqn_core::updates::{HessianState, UpdateMode};

fn rel(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn rel_vec(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn states(p: &ProblemInstance, cfg: &SolverConfig) -> (Vec<Mat>, Vec<Vector>) {
    let mut out = Vec::new();
    let r = optimizer::run_amsqn_observed(p, cfg, |_, h: &HessianState| out.push(h.matrix.clone())).unwrap();
    let fs = r.trace.iter().map(|t| Vector::from_element(1, t.f)).collect();
    (out, fs)
}

#[test]
fn inverse_trajectory_matches_direct_inverse() {
    let p = problems::gen_quadratic(12, 30.0, 4).unwrap();
    for method in [SolverMethod::Broyden, SolverMethod::Bfgs] {
        let mut cfg = SolverConfig::new(method);
        cfg.q = 3;
        cfg.max_iter = 10;
        cfg.eps_tol = 1e-300;
        cfg.alpha = Some(0.05);
        cfg.perturbation = Perturbation::None;
        cfg.update_mode = UpdateMode::Direct;
        let (direct, fd) = states(&p, &cfg);
        cfg.update_mode = UpdateMode::Inverse;
        let (inverse, fi) = states(&p, &cfg);
        assert_eq!(direct.len(), inverse.len());
        assert!(direct.len() >= 9, "{method:?}: only {} updates", direct.len());
        for (t, (b, h)) in direct.iter().zip(&inverse).enumerate() {
            let b_inv = linalg::solve(b, &Mat::identity(12, 12)).unwrap();
            let e = rel(h, &b_inv);
            assert!(e <= 1e-6, "{method:?} iterate {t}: rel {e:.3e}");
        }
        for (a, b) in fd.iter().zip(&fi) {
            assert!(rel_vec(a, b) <= 1e-6);
        }
    }
}

#[test]
fn ours_keeps_estimate_psd() {
    let probs = [
        problems::gen_logreg(80, 40, 10.0, 1.0, Regime::High, 2).unwrap(),
        problems::gen_quadratic(30, 50.0, 1).unwrap(),
    ];
    for p in &probs {
        for method in [SolverMethod::Broyden, SolverMethod::Psb, SolverMethod::Dfp, SolverMethod::Bfgs] {
            for mode in [UpdateMode::Inverse, UpdateMode::Direct] {
                let mut cfg = SolverConfig::new(method);
                cfg.perturbation = Perturbation::Ours;
                cfg.update_mode = mode;
                cfg.max_iter = 150;
                let mut worst = f64::INFINITY;
                let r = optimizer::run_amsqn_observed(p, &cfg, |_, h: &HessianState| {
                    assert!(linalg::relative_asymmetry(&h.matrix) <= 1e-12);
                    let lam = linalg::sym_eigen(&linalg::symmetrize(&h.matrix)).unwrap().0[0];
                    let scale = linalg::spectral_norm(&h.matrix);
                    worst = worst.min(lam / scale.max(1e-300));
                })
                .unwrap();
                assert!(worst >= -1e-9, "{:?} {method:?} {mode:?}: {worst:.3e}", p.kind);
                assert_eq!(r.descent_violations, 0);
            }
        }
    }
}

// On a quadratic every secant block has symmetric PSD `YᵀS = SᵀQS`, so the
// unperturbed updates stay PSD and the tail shift of the limited variant is
// never needed.
#[test]
fn vanilla_needs_no_shift_on_quadratics() {
    let p = problems::gen_quadratic(20, 40.0, 9).unwrap();
    let q_mat = p.eval_hess(&Vector::zeros(20)).unwrap();
    let mut cfg = SolverConfig::new(SolverMethod::Bfgs);
    cfg.perturbation = Perturbation::None;
    cfg.alpha = Some(0.5);
    cfg.max_iter = 60;
    let mut seen = 0;
    let r = optimizer::run_amsqn_observed(&p, &cfg, |_, h: &HessianState| {
        let lam = linalg::sym_eigen(&linalg::symmetrize(&h.matrix)).unwrap().0[0];
        assert!(lam >= -1e-8 * linalg::spectral_norm(&h.matrix));
        seen += 1;
    })
    .unwrap();
    assert!(seen > 5);
    assert!(r.converged());

    let mut hist = SecantHistory::new(5, SecantMode::Curve);
    let mut x = Vector::from_fn(20, |i, _| (i as f64 * 0.7).sin());
    for _ in 0..8 {
        hist.push(x.clone(), &q_mat * &x).unwrap();
        x = &x - (&q_mat * &x) * 0.02;
    }
    let b = hist.assemble().unwrap();
    let mu = limited::tail_shift(&b.s, &b.y, &ShiftParams::default()).unwrap();
    assert!(mu <= 1e-8, "tail shift {mu}");
}

#[test]
fn full_memory_limited_matches_single_secant_bfgs() {
    let p = problems::gen_quadratic(15, 20.0, 3).unwrap();
    let mut cfg = SolverConfig::new(SolverMethod::Bfgs);
    cfg.q = 1;
    cfg.alpha = Some(0.3);
    cfg.max_iter = 25;
    cfg.eps_tol = 1e-300;
    cfg.perturbation = Perturbation::None;
    let full = optimizer::run_amsqn(&p, &cfg).unwrap();
    let lm = LimitedConfig {
        memory: 100,
        gamma: GammaMode::Constant(1.0),
    };
    let limited = limited::run_lms_bfgs(&p, &cfg, &lm).unwrap();
    assert_eq!(full.trace.len(), limited.trace.len());
    for (a, b) in full.trace.iter().zip(&limited.trace) {
        assert!((a.f - b.f).abs() <= 1e-6 * b.f.abs().max(1e-12), "iter {}: {} vs {}", a.iter, a.f, b.f);
        assert!((a.grad_norm - b.grad_norm).abs() <= 1e-6 * b.grad_norm.max(1e-12));
    }
    let x_full = Vector::from_vec(full.x.clone());
    let x_lim = Vector::from_vec(limited.x.clone());
    assert!(rel_vec(&x_lim, &x_full) <= 1e-6);
}

#[test]
fn limited_ours_on_quadratic_is_plain_limited_bfgs() {
    let p = problems::gen_quadratic(25, 60.0, 8).unwrap();
    let mut cfg = SolverConfig::new(SolverMethod::Bfgs);
    cfg.q = 3;
    cfg.alpha = Some(0.5);
    cfg.max_iter = 200;
    let lm = LimitedConfig {
        memory: 4,
        gamma: GammaMode::Constant(1.0),
    };
    cfg.perturbation = Perturbation::Ours;
    let ours = limited::run_lms_bfgs(&p, &cfg, &lm).unwrap();
    cfg.perturbation = Perturbation::None;
    let plain = limited::run_lms_bfgs(&p, &cfg, &lm).unwrap();
    assert!(ours.trace.iter().all(|t| t.mu == 0.0));
    assert_eq!(ours.iterations, plain.iterations);
    assert_eq!(ours.x, plain.x);
    for t in &ours.trace {
        assert_eq!(t.memory.map(|m| m <= 4), Some(true));
    }
}

#[test]
fn limited_trace_reports_shift_and_gamma() {
    let p = problems::gen_logreg(100, 30, 10.0, 1.0, Regime::High, 5).unwrap();
    let mut cfg = SolverConfig::new(SolverMethod::Bfgs);
    cfg.perturbation = Perturbation::Ours;
    cfg.max_iter = 300;
    let lm = LimitedConfig {
        memory: 5,
        gamma: GammaMode::SelfScaling,
    };
    let r = limited::run_lms_bfgs(&p, &cfg, &lm).unwrap();
    for t in &r.trace {
        assert!(t.mu >= 0.0);
        assert!(t.gamma.unwrap() > 0.0);
    }
}

#[test]
fn runs_are_deterministic() {
    let p = problems::gen_logreg(60, 20, 30.0, 1.0, Regime::High, 11).unwrap();
    let again = problems::gen_logreg(60, 20, 30.0, 1.0, Regime::High, 11).unwrap();
    assert_eq!(p.a, again.a);
    for method in [SolverMethod::Bfgs, SolverMethod::Psb, SolverMethod::Gd, SolverMethod::Newton] {
        let mut cfg = SolverConfig::new(method);
        cfg.perturbation = Perturbation::Ours;
        cfg.nu = 4;
        cfg.max_iter = 80;
        let a = optimizer::run(&p, &cfg).unwrap();
        let b = optimizer::run(&again, &cfg).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.x, b.x);
        let strip = |r: &optimizer::RunResult| {
            r.trace
                .iter()
                .map(|t| (t.iter, t.f.to_bits(), t.grad_norm.to_bits(), t.mu.to_bits(), t.secants_kept, t.skipped))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
    }
}

#[test]
fn quadratic_direct_bfgs_within_n_plus_five() {
    let n = 10;
    let p = problems::gen_quadratic(n, 20.0, 0).unwrap();
    let mut cfg = SolverConfig::new(SolverMethod::Bfgs);
    cfg.update_mode = UpdateMode::Direct;
    cfg.perturbation = Perturbation::None;
    cfg.eps_tol = 1e-4;
    let r = optimizer::run_amsqn(&p, &cfg).unwrap();
    assert_eq!(r.status, RunStatus::Converged);
    assert!(r.iterations <= n + 5, "{} iterations", r.iterations);
}

#[test]
fn unperturbed_logreg_may_diverge_without_panicking() {
    let p = problems::gen_logreg(200, 100, 30.0, 1.0, Regime::High, 0).unwrap();
    for method in [SolverMethod::Dfp, SolverMethod::Psb] {
        let mut cfg = SolverConfig::new(method);
        cfg.perturbation = Perturbation::None;
        cfg.max_iter = 300;
        let r = optimizer::run(&p, &cfg).unwrap();
        assert_eq!(r.trace.len(), r.iterations);
    }
}
