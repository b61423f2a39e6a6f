//! Window of recent iterates and gradients, and the multisecant blocks built
//! from it.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

/// How secant columns are formed from the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SecantMode {
    /// Consecutive differences `x_{i+1} - x_i`.
    #[default]
    Curve,
    /// Differences to the newest point, `x_latest - x_i`.
    Anchored,
}

/// Column filter applied before an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectionRule {
    /// Drop a column whose cosine with a kept column exceeds `1 - eps` in
    /// magnitude.
    #[default]
    NearParallel,
    /// Drop a column whose cosine with a kept column is at most `eps` in
    /// magnitude. This removes near-orthogonal directions and is kept only for
    /// comparison.
    Literal,
}

/// Ring of the last `q + 1` pairs `(x_i, g_i)`, oldest first.
#[derive(Debug, Clone)]
pub struct SecantHistory {
    capacity: usize,
    mode: SecantMode,
    window: VecDeque<(Vector, Vector)>,
}

impl SecantHistory {
    /// History producing up to `q` secant columns.
    pub fn new(q: usize, mode: SecantMode) -> Self {
        assert!(q >= 1, "need at least one secant");
        SecantHistory {
            capacity: q + 1,
            mode,
            window: VecDeque::with_capacity(q + 1),
        }
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn mode(&self) -> SecantMode {
        self.mode
    }

    pub fn clear(&mut self) {
        self.window.clear();
    }

    pub fn push(&mut self, x: Vector, g: Vector) -> Result<()> {
        if x.len() != g.len() {
            return Err(Error::Dimension(format!(
                "iterate has {} entries, gradient {}",
                x.len(),
                g.len()
            )));
        }
        if let Some((x0, _)) = self.window.front() {
            if x0.len() != x.len() {
                return Err(Error::Dimension(format!(
                    "history holds {}-vectors, got {}",
                    x0.len(),
                    x.len()
                )));
            }
        }
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back((x, g));
        Ok(())
    }

    /// Entry `i`, counted from the oldest.
    pub fn get(&self, i: usize) -> Option<(&Vector, &Vector)> {
        self.window.get(i).map(|(x, g)| (x, g))
    }

    pub fn assemble(&self) -> Result<SecantBlock> {
        let k = self.window.len();
        if k < 2 {
            return Err(Error::InsufficientHistory(format!(
                "need 2 points to form a secant, have {k}"
            )));
        }
        let n = self.window[0].0.len();
        let mut s = Mat::zeros(n, k - 1);
        let mut y = Mat::zeros(n, k - 1);
        let (x_last, g_last) = &self.window[k - 1];
        for i in 0..k - 1 {
            let (xi, gi) = &self.window[i];
            let (sx, gy) = match self.mode {
                SecantMode::Curve => {
                    let (xn, gn) = &self.window[i + 1];
                    (xn - xi, gn - gi)
                }
                SecantMode::Anchored => (x_last - xi, g_last - gi),
            };
            s.set_column(i, &sx);
            y.set_column(i, &gy);
        }
        Ok(SecantBlock { s, y })
    }
}

/// Secant matrices `S` and `Y`, columns ordered oldest to newest.
#[derive(Debug, Clone, PartialEq)]
pub struct SecantBlock {
    pub s: Mat,
    pub y: Mat,
}

impl SecantBlock {
    pub fn new(s: Mat, y: Mat) -> Result<Self> {
        if s.shape() != y.shape() {
            return Err(Error::Dimension(format!(
                "S is {:?} but Y is {:?}",
                s.shape(),
                y.shape()
            )));
        }
        Ok(SecantBlock { s, y })
    }

    pub fn cols(&self) -> usize {
        self.s.ncols()
    }

    /// Greedy newest-to-oldest filter. The newest column is always kept; an
    /// older one is kept only if it passes `rule` against every column kept so
    /// far. Column order is preserved.
    pub fn reject(&self, eps: f64, rule: RejectionRule) -> SecantBlock {
        let keep = self.kept_columns(eps, rule);
        let s = Mat::from_columns(&keep.iter().map(|&j| self.s.column(j)).collect::<Vec<_>>());
        let y = Mat::from_columns(&keep.iter().map(|&j| self.y.column(j)).collect::<Vec<_>>());
        SecantBlock { s, y }
    }

    /// Indices (ascending) of the columns [`reject`](Self::reject) keeps.
    pub fn kept_columns(&self, eps: f64, rule: RejectionRule) -> Vec<usize> {
        let q = self.cols();
        if q == 0 {
            return Vec::new();
        }
        let norms: Vec<f64> = (0..q).map(|j| self.s.column(j).norm()).collect();
        let mut kept = vec![q - 1];
        for j in (0..q - 1).rev() {
            if norms[j] == 0.0 {
                continue;
            }
            let ok = kept.iter().all(|&k| {
                let cos = if norms[k] == 0.0 {
                    0.0
                } else {
                    (self.s.column(j).dot(&self.s.column(k)) / (norms[j] * norms[k])).abs()
                };
                match rule {
                    RejectionRule::NearParallel => cos <= 1.0 - eps,
                    RejectionRule::Literal => cos > eps,
                }
            });
            if ok {
                kept.push(j);
            }
        }
        kept.sort_unstable();
        kept
    }
}
