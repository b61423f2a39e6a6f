//! Limited-memory multisecant BFGS.
//!
//! The inverse estimate is never stored. It is defined by the recursion
//! `H₊ = (I - Vᵀ) H (I - V) + R Zᵀ` over the last `L` secant blocks, with
//! `P = (SᵀY)⁻¹`, `V = Y P Sᵀ`, `R = S P`, `Z = S`, seeded by `γI`, and
//! applied to a vector with two loops over the blocks.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::optimizer::{eval_lenient, Check, Perturbation, RunResult, RunStatus, SolverConfig, SolverMethod, Tracker};
use crate::problems::ProblemInstance;
use crate::secant::SecantHistory;
use crate::shift;

#[derive(Debug, Clone)]
struct Block {
    s: Mat,
    y: Mat,
    /// `(SᵀY)⁻¹`.
    p: Mat,
}

/// The last `L` secant blocks and the seed scale `γ`.
#[derive(Debug, Clone)]
pub struct TwoLoopCache {
    capacity: usize,
    blocks: VecDeque<Block>,
    pub gamma: f64,
}

impl TwoLoopCache {
    pub fn new(capacity: usize, gamma: f64) -> Self {
        assert!(capacity >= 1, "memory must hold at least one block");
        TwoLoopCache {
            capacity,
            blocks: VecDeque::with_capacity(capacity),
            gamma,
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Adds a block, evicting the oldest at capacity. A block whose `SᵀY` is
    /// singular or ill-conditioned is refused and the cache left unchanged.
    pub fn push_block(&mut self, s: Mat, y: Mat) -> Result<()> {
        if s.shape() != y.shape() || s.ncols() == 0 {
            return Err(Error::Dimension(format!("S {:?} and Y {:?}", s.shape(), y.shape())));
        }
        if let Some(b) = self.blocks.front() {
            if b.s.nrows() != s.nrows() {
                return Err(Error::Dimension(format!(
                    "cache holds {}-vectors, block has {} rows",
                    b.s.nrows(),
                    s.nrows()
                )));
            }
        }
        let q = s.ncols();
        let lu = linalg::LuFactor::new(&s.tr_mul(&y))?;
        let p = lu.solve(&Mat::identity(q, q));
        if self.blocks.len() == self.capacity {
            self.blocks.pop_front();
        }
        self.blocks.push_back(Block { s, y, p });
        Ok(())
    }

    /// `R_i = S_i (S_iᵀY_i)⁻¹` of block `i` (oldest first).
    pub fn r_factor(&self, i: usize) -> Option<Mat> {
        self.blocks.get(i).map(|b| &b.s * &b.p)
    }

    /// Numbers held by the cache, excluding `γ`.
    pub fn stored_len(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.s.len() + b.y.len() + b.p.len())
            .sum()
    }

    /// `H g` by the two-loop recursion; `γ g` for an empty cache.
    pub fn apply_inverse(&self, g: &Vector) -> Vector {
        let mut q = g.clone();
        let mut coeffs: Vec<Vector> = Vec::with_capacity(self.blocks.len());
        for b in self.blocks.iter().rev() {
            let a = b.s.tr_mul(&q);
            q -= &b.y * (&b.p * &a);
            coeffs.push(a);
        }
        let mut u = q * self.gamma;
        for (b, a) in self.blocks.iter().zip(coeffs.iter().rev()) {
            let yu = b.y.tr_mul(&u);
            u -= &b.s * (b.p.tr_mul(&yu));
            u += &b.s * (&b.p * a);
        }
        u
    }

    /// Dense `H` by the explicit recursion from `γI`. Test oracle; `O(n²)`
    /// memory.
    pub fn dense_inverse(&self, n: usize) -> Mat {
        let mut h = Mat::identity(n, n) * self.gamma;
        for b in &self.blocks {
            let v = &b.y * &b.p * b.s.transpose();
            let i_minus_v = Mat::identity(n, n) - &v;
            h = i_minus_v.transpose() * h * &i_minus_v + &b.s * &b.p * b.s.transpose();
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaMode {
    Constant(f64),
    /// `tr(YᵀS) / tr(SᵀHS)` with `H` the current inverse estimate.
    SelfScaling,
}

impl Default for GammaMode {
    fn default() -> Self {
        GammaMode::Constant(1.0)
    }
}

/// Seed scale for the next iteration. Returns the value and whether it fell
/// back to `previous` because the ratio was unusable.
pub fn gamma_select<F>(mode: GammaMode, s: &Mat, y: &Mat, h_apply: F, previous: f64) -> (f64, bool)
where
    F: Fn(&Vector) -> Vector,
{
    match mode {
        GammaMode::Constant(v) => (v, false),
        GammaMode::SelfScaling => {
            let num = y.tr_mul(s).trace();
            let den: f64 = (0..s.ncols())
                .map(|j| {
                    let sj = s.column(j).into_owned();
                    sj.dot(&h_apply(&sj))
                })
                .sum();
            let gamma = num / den;
            if gamma.is_finite() && gamma > 0.0 {
                (gamma, false)
            } else {
                (previous, true)
            }
        }
    }
}

fn default_memory() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitedConfig {
    /// Number of blocks kept (`L`).
    #[serde(default = "default_memory")]
    pub memory: usize,
    #[serde(default)]
    pub gamma: GammaMode,
}

impl Default for LimitedConfig {
    fn default() -> Self {
        LimitedConfig {
            memory: default_memory(),
            gamma: GammaMode::default(),
        }
    }
}

/// Shift for the newest tail term `S P Sᵀ`. Zero when the symmetric part of
/// `P` is PSD, which for full-rank `S` is exactly when the tail is;
/// otherwise the doubling search on the `(S, S, SᵀY)` factors.
pub fn tail_shift(s: &Mat, y: &Mat, params: &shift::ShiftParams) -> Result<f64> {
    let sty = s.tr_mul(y);
    let q = sty.nrows();
    let p = linalg::solve(&sty, &Mat::identity(q, q))?;
    if linalg::sym_eigen(&linalg::symmetrize(&p))?.0[0] >= 0.0 {
        return Ok(0.0);
    }
    Ok(shift::compute_mu(s, s, &sty, params)?.mu)
}

/// Limited-memory AMS-QN. Direction `-(H g + μ g)` with `μ` the tail shift
/// (only under [`Perturbation::Ours`]).
pub fn run_lms_bfgs(p: &ProblemInstance, cfg: &SolverConfig, lm: &LimitedConfig) -> Result<RunResult> {
    cfg.validate()?;
    if cfg.method != SolverMethod::Bfgs {
        return Err(Error::Unsupported("limited memory is implemented for BFGS only".into()));
    }
    if lm.memory == 0 {
        return Err(Error::InvalidParameter("memory must be at least 1".into()));
    }
    let alpha = cfg.alpha.unwrap_or(1.0);
    let mut gamma = match lm.gamma {
        GammaMode::Constant(v) if !(v > 0.0) => {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {v}")))
        }
        GammaMode::Constant(v) => v,
        GammaMode::SelfScaling => 1.0,
    };

    let mut x = p.initial_point();
    let mut f = p.eval_f(&x)?;
    let mut g = p.eval_grad(&x)?;
    let mut tracker = Tracker::new(g.norm(), cfg);
    let mut history = SecantHistory::new(cfg.q, cfg.secant_mode);
    history.push(x.clone(), g.clone())?;
    let mut cache = TwoLoopCache::new(lm.memory, gamma);

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
            let (next_gamma, _) = gamma_select(lm.gamma, &block.s, &block.y, |v| cache.apply_inverse(v), gamma);
            gamma = next_gamma;
            cache.gamma = gamma;
            match cache.push_block(block.s.clone(), block.y.clone()) {
                Ok(()) => {
                    if cfg.perturbation == Perturbation::Ours {
                        match tail_shift(&block.s, &block.y, &cfg.shift) {
                            Ok(m) => mu = m,
                            Err(Error::SingularSystem { .. } | Error::ShiftCap { .. }) => skipped = true,
                            Err(e) => return Err(e),
                        }
                    }
                }
                Err(e) if e.is_singular() => skipped = true,
                Err(e) => return Err(e),
            }
        }
        let d = -(cache.apply_inverse(&g) + &g * mu);
        let row = tracker.record(t, f, &g, &d, mu, alpha, kept, skipped);
        row.memory = Some(cache.len());
        row.gamma = Some(gamma);

        x.axpy(alpha, &d, 1.0);
        (f, g) = eval_lenient(p, &x)?;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::updates::{self, Method};
    use proptest::prelude::{prop_assert, proptest};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn rand_mat(rng: &mut StdRng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    fn rand_spd(rng: &mut StdRng, n: usize) -> Mat {
        let g = rand_mat(rng, n, n);
        g.tr_mul(&g) + Mat::identity(n, n)
    }

    #[test]
    fn empty_cache_scales() {
        let c = TwoLoopCache::new(3, 2.0);
        let g = Vector::from_vec(vec![1.0, -1.0, 3.0]);
        assert_eq!(c.apply_inverse(&g), &g * 2.0);
    }

    #[test]
    fn memory_one_keeps_newest() {
        let mut rng = StdRng::seed_from_u64(1);
        let mut c = TwoLoopCache::new(1, 1.0);
        let q = rand_spd(&mut rng, 5);
        for _ in 0..3 {
            let s = rand_mat(&mut rng, 5, 2);
            c.push_block(s.clone(), &q * &s).unwrap();
            assert_eq!(c.len(), 1);
            assert_eq!(c.blocks[0].s, s);
        }
    }

    #[test]
    fn singular_block_is_refused() {
        let mut c = TwoLoopCache::new(2, 1.0);
        let s = Mat::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let y = Mat::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        assert!(c.push_block(s, y).unwrap_err().is_singular());
        assert!(c.is_empty());
    }

    #[test]
    fn r_factor_round_trip() {
        let mut rng = StdRng::seed_from_u64(2);
        let mut c = TwoLoopCache::new(2, 1.0);
        let s = rand_mat(&mut rng, 8, 3);
        let y = rand_spd(&mut rng, 8) * &s;
        c.push_block(s.clone(), y.clone()).unwrap();
        let r = c.r_factor(0).unwrap();
        assert!((r * s.tr_mul(&y) - &s).norm() <= 1e-10 * s.norm());
    }

    #[test]
    fn single_secant_matches_textbook_bfgs() {
        let mut rng = StdRng::seed_from_u64(3);
        let n = 6;
        let s = rand_mat(&mut rng, n, 1);
        let y = rand_spd(&mut rng, n) * &s;
        let mut c = TwoLoopCache::new(1, 1.0);
        c.push_block(s.clone(), y.clone()).unwrap();
        let sv = s.column(0).into_owned();
        let yv = y.column(0).into_owned();
        let rho = 1.0 / sv.dot(&yv);
        let left = Mat::identity(n, n) - &sv * yv.transpose() * rho;
        let h = &left * left.transpose() + &sv * sv.transpose() * rho;
        let g = Vector::from_fn(n, |_, _| rng.random::<f64>());
        assert!((c.apply_inverse(&g) - &h * &g).norm() <= 1e-10 * (&h * &g).norm());
    }

    #[test]
    fn one_block_matches_multisecant_inverse_update() {
        let mut rng = StdRng::seed_from_u64(4);
        let n = 10;
        let q = rand_spd(&mut rng, n);
        let s = rand_mat(&mut rng, n, 3);
        let y = &q * &s;
        let mut c = TwoLoopCache::new(1, 1.0);
        c.push_block(s.clone(), y.clone()).unwrap();
        let eye = Mat::identity(n, n);
        let f = updates::inverse_factors(Method::Bfgs, &eye, &s, &y).unwrap();
        let oracle = updates::apply_raw(&eye, &f).unwrap();
        assert!((c.dense_inverse(n) - &oracle).norm() <= 1e-8 * oracle.norm());
        // The recursion interpolates the newest block.
        assert!((c.dense_inverse(n) * &y - &s).norm() <= 1e-10 * s.norm());
    }

    #[test]
    fn two_loop_matches_dense_recursion() {
        let mut rng = StdRng::seed_from_u64(5);
        for trial in 0..30 {
            let n = 5 + trial % 26;
            let l = 1 + trial % 5;
            let mut c = TwoLoopCache::new(l, 0.5 + rng.random::<f64>());
            for _ in 0..l + 2 {
                let q = 1 + rng.random_range(0..3);
                let s = rand_mat(&mut rng, n, q);
                let y = (rand_spd(&mut rng, n) + rand_mat(&mut rng, n, n) * 0.2) * &s;
                let _ = c.push_block(s, y);
            }
            let g = Vector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
            let dense = c.dense_inverse(n) * &g;
            let err = (c.apply_inverse(&g) - &dense).norm() / dense.norm();
            assert!(err <= 1e-8, "trial {trial}: {err}");
        }
    }

    #[test]
    fn storage_is_linear_in_n() {
        let mut rng = StdRng::seed_from_u64(6);
        let (n, l, q) = (200, 4, 3);
        let mut c = TwoLoopCache::new(l, 1.0);
        for _ in 0..10 {
            let s = rand_mat(&mut rng, n, q);
            c.push_block(s.clone(), &s * 2.0).unwrap();
        }
        assert!(c.stored_len() <= l * (2 * q * n + q * q));
    }

    #[test]
    fn gamma_examples() {
        let s = Mat::from_column_slice(3, 1, &[1.0, 2.0, -1.0]);
        let (g, fell_back) = gamma_select(GammaMode::SelfScaling, &s, &s, |v| v.clone(), 1.0);
        assert!((g - 1.0).abs() < 1e-15 && !fell_back);
        assert_eq!(gamma_select(GammaMode::Constant(0.37), &s, &s, |v| v.clone(), 1.0), (0.37, false));
        let neg = -&s;
        assert_eq!(gamma_select(GammaMode::SelfScaling, &s, &neg, |v| v.clone(), 0.8), (0.8, true));
    }

    #[test]
    fn gamma_self_scaling_rayleigh_ratio() {
        let mut rng = StdRng::seed_from_u64(7);
        let q = rand_spd(&mut rng, 6);
        let h = rand_spd(&mut rng, 6);
        let s = rand_mat(&mut rng, 6, 1);
        let y = &q * &s;
        let sv = s.column(0).into_owned();
        let expected = sv.dot(&(&q * &sv)) / sv.dot(&(&h * &sv));
        let (g, _) = gamma_select(GammaMode::SelfScaling, &s, &y, |v| &h * v, 1.0);
        assert!((g - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn tail_shift_zero_for_spd_curvature() {
        let mut rng = StdRng::seed_from_u64(8);
        let q = rand_spd(&mut rng, 8);
        let s = rand_mat(&mut rng, 8, 3);
        assert_eq!(tail_shift(&s, &(&q * &s), &shift::ShiftParams::default()).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn apply_inverse_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut rng = StdRng::seed_from_u64(seed);
            let n = 12;
            let mut c = TwoLoopCache::new(3, 1.3);
            for _ in 0..3 {
                let s = rand_mat(&mut rng, n, 2);
                let y = rand_spd(&mut rng, n) * &s;
                c.push_block(s, y).unwrap();
            }
            let g1 = Vector::from_fn(n, |_, _| rng.random::<f64>());
            let g2 = Vector::from_fn(n, |_, _| rng.random::<f64>());
            let lhs = c.apply_inverse(&(&g1 * a + &g2 * b));
            let rhs = c.apply_inverse(&g1) * a + c.apply_inverse(&g2) * b;
            prop_assert!((&lhs - &rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
        }
    }
}
