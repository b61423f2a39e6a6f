//! Wall-time comparison of the low-rank shift search against dense and
//! iterative eigenvalue computations on the same update.

use std::io::Write;
use std::time::Instant;

use amsqn_core::linalg::{self, Mat};
use amsqn_core::shift::{self, ShiftParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

fn d_ns() -> Vec<usize> {
    vec![500, 1000, 2000]
}
fn d_qs() -> Vec<usize> {
    vec![5]
}
fn d_trials() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuBenchSpec {
    #[serde(default = "d_ns")]
    pub n: Vec<usize>,
    #[serde(default = "d_qs")]
    pub q: Vec<usize>,
    #[serde(default = "d_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub shift: ShiftParams,
}

impl Default for MuBenchSpec {
    fn default() -> Self {
        MuBenchSpec {
            n: d_ns(),
            q: d_qs(),
            trials: d_trials(),
            seed: 0,
            shift: ShiftParams::default(),
        }
    }
}

impl MuBenchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.q.is_empty() {
            return Err(BenchError::Config("bench-mu needs at least one n and one q".into()));
        }
        if !self.n.windows(2).all(|w| w[0] < w[1]) {
            return Err(BenchError::Config("n values must be strictly ascending".into()));
        }
        if self.trials == 0 {
            return Err(BenchError::Config("trials must be at least 1".into()));
        }
        if self.n.contains(&0) || self.q.contains(&0) {
            return Err(BenchError::Config("sizes must be positive".into()));
        }
        Ok(self.shift.validate()?)
    }
}

/// Median seconds per path for one `(n, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuBenchRow {
    pub n: usize,
    pub q: usize,
    pub t_alg1: f64,
    pub t_dense_eig: f64,
    pub t_iter_eig: f64,
    /// Dense and iterative eigenvalues both confirm that the computed shift
    /// makes the update PSD.
    pub psd_agree: bool,
}

/// Random rank-`2q` update in the shape the BFGS factors take.
pub fn random_factors(n: usize, q: usize, seed: u64) -> (Mat, Mat, Mat) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |r: usize, c: usize| Mat::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let d1 = draw(n, 2 * q);
    let d2 = draw(n, 2 * q);
    let g = draw(2 * q, 2 * q);
    let w = &g + Mat::identity(2 * q, 2 * q) * (2.0 * q as f64);
    (d1, d2, w)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

/// Times `f` once to warm up, then `trials` more times; returns the median
/// seconds and the last value.
fn time<T, F: FnMut() -> Result<T>>(trials: usize, mut f: F) -> Result<(f64, T)> {
    let mut last = f()?;
    let mut times = Vec::with_capacity(trials);
    for _ in 0..trials {
        let t0 = Instant::now();
        last = f()?;
        times.push(t0.elapsed().as_secs_f64());
    }
    Ok((median(times), last))
}

pub fn bench_point(n: usize, q: usize, spec: &MuBenchSpec) -> Result<MuBenchRow> {
    let (d1, d2, w) = random_factors(n, q, spec.seed ^ ((n as u64) << 16) ^ q as u64);
    let (t_alg1, est) = time(spec.trials, || Ok(shift::compute_mu(&d1, &d2, &w, &spec.shift)?))?;
    let delta = shift::dense_delta(&d1, &d2, &w)?;
    let (t_dense_eig, dense_min) = time(spec.trials, || Ok(linalg::sym_eigen(&delta)?.0[0]))?;
    let (t_iter_eig, iter_min) = time(spec.trials, || {
        Ok(linalg::eig_min_sym_iterative(|x| &delta * x, n)?.value)
    })?;
    let tol = 1e-8 * (1.0 + linalg::spectral_norm(&delta));
    let psd_agree = dense_min + est.mu >= -tol && iter_min + est.mu >= -tol;
    Ok(MuBenchRow {
        n,
        q,
        t_alg1,
        t_dense_eig,
        t_iter_eig,
        psd_agree,
    })
}

pub fn bench_mu(spec: &MuBenchSpec) -> Result<Vec<MuBenchRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &n in &spec.n {
        for &q in &spec.q {
            rows.push(bench_point(n, q, spec)?);
        }
    }
    Ok(rows)
}

pub fn write_rows<W: Write>(out: W, rows: &[MuBenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares line `a + b n` through the points and the largest factor
/// by which a measured time departs from it.
pub fn linear_fit_spread(ns: &[usize], ts: &[f64]) -> (f64, f64, f64) {
    let k = ns.len() as f64;
    let mx = ns.iter().map(|&n| n as f64).sum::<f64>() / k;
    let my = ts.iter().sum::<f64>() / k;
    let sxy: f64 = ns.iter().zip(ts).map(|(&n, &t)| (n as f64 - mx) * (t - my)).sum();
    let sxx: f64 = ns.iter().map(|&n| (n as f64 - mx).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let spread = ns
        .iter()
        .zip(ts)
        .map(|(&n, &t)| {
            let fit = a + b * n as f64;
            if fit <= 0.0 || t <= 0.0 {
                f64::INFINITY
            } else {
                (t / fit).max(fit / t)
            }
        })
        .fold(1.0, f64::max);
    (a, b, spread)
}
