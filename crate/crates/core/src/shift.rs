//! Diagonal shifts that make a symmetrized low-rank update positive
//! semidefinite.
//!
//! For `Δ = (E + Eᵀ)/2` with `E = D1 W⁻¹ D2ᵀ`, the matrix `Δ + μI` is PSD
//! exactly when a `2r x 2r` test matrix `H₂(μ)` is PSD. [`compute_mu`] doubles
//! `μ` until the test passes, so certifying a shift never touches an `n x n`
//! decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::updates::UpdateMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftParams {
    /// Diagonal of the test matrix; must lie in `(0, 1)`.
    pub c: f64,
    /// First shift tried.
    pub mu0: f64,
    /// `H₂` counts as PSD when its smallest eigenvalue reaches this.
    pub lambda_tol: f64,
    pub growth: f64,
    pub max_doublings: usize,
}

impl Default for ShiftParams {
    fn default() -> Self {
        ShiftParams {
            c: 0.5,
            mu0: 1e-3,
            lambda_tol: 1e-15,
            growth: 2.0,
            max_doublings: 60,
        }
    }
}

impl ShiftParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::InvalidParameter(format!("c must lie in (0, 1), got {}", self.c)));
        }
        if !(self.mu0 > 0.0) {
            return Err(Error::InvalidParameter(format!("mu0 must be positive, got {}", self.mu0)));
        }
        if !(self.growth > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "growth factor must exceed 1, got {}",
                self.growth
            )));
        }
        Ok(())
    }
}

/// `S_ii = (-1 + sqrt(1 + 4c²/σ²)) / (2/σ)`, evaluated without cancellation.
/// Always at most `c`.
pub fn s_diag(sigma: f64, c: f64) -> f64 {
    // Rounding can land an ulp above `c` when `sigma` is tiny.
    (2.0 * c * c / (sigma * (1.0 + (1.0 + 4.0 * c * c / (sigma * sigma)).sqrt()))).min(c)
}

/// The `μ`-independent part of the test: the SVD of `W`, the Gram matrix of
/// `[D1 D2]` and its scaled eigendecomposition. Built once per update and
/// reused across doublings.
#[derive(Debug, Clone)]
pub struct ShiftKernel {
    c: f64,
    /// `[[cI, F], [Fᵀ, cI]]` with `F = V S Uᵀ`.
    base: Mat,
    /// `blockdiag(V, U)`.
    rotation: Mat,
    /// Square roots of the eigenvalues of `C⁻¹` in the rotated basis.
    sqrt_d: Vector,
    /// Eigenpairs of `diag(d)^{-1/2} Pᵀ G P diag(d)^{-1/2}`.
    k_values: Vector,
    k_vectors: Mat,
    /// `S_ii`, for diagnostics.
    pub s: Vector,
    /// Singular values of `W`, nonincreasing.
    pub sigma: Vector,
}

impl ShiftKernel {
    pub fn new(d1: &Mat, d2: &Mat, w: &Mat, params: &ShiftParams) -> Result<Self> {
        params.validate()?;
        let r = w.nrows();
        if !w.is_square() || r == 0 || d1.shape() != d2.shape() || d1.ncols() != r {
            return Err(Error::Dimension(format!(
                "D1 {:?}, D2 {:?}, W {:?}",
                d1.shape(),
                d2.shape(),
                w.shape()
            )));
        }
        if !d1.iter().chain(d2.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("update factors"));
        }
        let svd = linalg::svd(w)?;
        let smax = svd.sigma[0];
        let smin = svd.sigma[r - 1];
        if !(smin > 0.0) || smax / smin > linalg::CONDITION_LIMIT {
            return Err(Error::SingularSystem {
                cond: if smin > 0.0 { smax / smin } else { f64::INFINITY },
            });
        }
        let c = params.c;
        let s = svd.sigma.map(|sg| s_diag(sg, c));
        debug_assert!(s.iter().all(|&v| v <= c));

        let f = &svd.v * Mat::from_diagonal(&s) * svd.u.transpose();
        let mut base = Mat::identity(2 * r, 2 * r) * c;
        base.view_mut((0, r), (r, r)).copy_from(&f);
        base.view_mut((r, 0), (r, r)).copy_from(&f.transpose());

        let mut rotation = Mat::zeros(2 * r, 2 * r);
        rotation.view_mut((0, 0), (r, r)).copy_from(&svd.v);
        rotation.view_mut((r, r), (r, r)).copy_from(&svd.u);

        // C⁻¹ = blockdiag(V diag(d) Vᵀ, U diag(d) Uᵀ), d_i = S_ii σ_i / c.
        let d_half = Vector::from_iterator(
            r,
            s.iter().zip(svd.sigma.iter()).map(|(si, sg)| (si * sg / c).sqrt()),
        );
        let sqrt_d = Vector::from_iterator(2 * r, d_half.iter().chain(d_half.iter()).copied());

        let mut d = Mat::zeros(d1.nrows(), 2 * r);
        d.view_mut((0, 0), d1.shape()).copy_from(d1);
        d.view_mut((0, r), d2.shape()).copy_from(d2);
        let g = d.tr_mul(&d);
        let gp = rotation.tr_mul(&g) * &rotation;
        let k = Mat::from_fn(2 * r, 2 * r, |i, j| gp[(i, j)] / (sqrt_d[i] * sqrt_d[j]));
        let (k_values, k_vectors) = linalg::sym_eigen(&linalg::symmetrize(&k))?;
        let k_values = k_values.map(|v| v.max(0.0));

        Ok(ShiftKernel {
            c,
            base,
            rotation,
            sqrt_d,
            k_values,
            k_vectors,
            s,
            sigma: svd.sigma,
        })
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `H₂(μ) = M - G (2μC⁻¹ + G)⁻¹ C⁻¹`, which equals
    /// `M - G/(2μ) + G(2μC⁻¹ + G)⁻¹G/(2μ)`, evaluated in the eigenbasis of
    /// the scaled Gram matrix so no cancellation occurs as `μ` grows.
    pub fn h2(&self, mu: f64) -> Result<Mat> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        let weights = self.k_values.map(|l| l / (2.0 * mu + l));
        let inner = &self.k_vectors * Mat::from_diagonal(&weights) * self.k_vectors.transpose();
        let scaled = Mat::from_fn(inner.nrows(), inner.ncols(), |i, j| {
            inner[(i, j)] * self.sqrt_d[i] * self.sqrt_d[j]
        });
        let h2 = &self.base - &self.rotation * scaled * self.rotation.transpose();
        Ok(linalg::symmetrize(&h2))
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// The test matrix `H₂(μ)` for the update `D1 W⁻¹ D2ᵀ`.
pub fn h2_matrix(d1: &Mat, d2: &Mat, w: &Mat, mu: f64, params: &ShiftParams) -> Result<Mat> {
    ShiftKernel::new(d1, d2, w, params)?.h2(mu)
}

/// `H₂(μ)` evaluated term by term as `M - G/(2μ) + G(2μC⁻¹ + G)⁻¹G/(2μ)`.
/// Loses accuracy once `‖G‖/μ` is large; used as a cross-check.
pub fn h2_matrix_literal(d1: &Mat, d2: &Mat, w: &Mat, mu: f64, params: &ShiftParams) -> Result<Mat> {
    params.validate()?;
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    let r = w.nrows();
    let svd = linalg::svd(w)?;
    let c = params.c;
    let s = svd.sigma.map(|sg| s_diag(sg, c));
    let f = &svd.v * Mat::from_diagonal(&s) * svd.u.transpose();
    let mut m = Mat::identity(2 * r, 2 * r) * c;
    m.view_mut((0, r), (r, r)).copy_from(&f);
    m.view_mut((r, 0), (r, r)).copy_from(&f.transpose());

    let d = Vector::from_iterator(r, s.iter().zip(svd.sigma.iter()).map(|(si, sg)| si * sg / c));
    let dm = Mat::from_diagonal(&d);
    let mut c_inv = Mat::zeros(2 * r, 2 * r);
    c_inv.view_mut((0, 0), (r, r)).copy_from(&(&svd.v * &dm * svd.v.transpose()));
    c_inv.view_mut((r, r), (r, r)).copy_from(&(&svd.u * &dm * svd.u.transpose()));

    let mut dd = Mat::zeros(d1.nrows(), 2 * r);
    dd.view_mut((0, 0), d1.shape()).copy_from(d1);
    dd.view_mut((0, r), d2.shape()).copy_from(d2);
    let g = dd.tr_mul(&dd);
    let inner = linalg::solve(&(&c_inv * (2.0 * mu) + &g), &g)?;
    let h2 = m - &g / (2.0 * mu) + &g * inner / (2.0 * mu);
    Ok(linalg::symmetrize(&h2))
}

/// Outcome of the doubling search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuEstimate {
    pub mu: f64,
    /// Number of doublings taken (0 when `mu0` already passes).
    pub doublings: usize,
    pub lambda_min_h2: f64,
}

/// Smallest `μ0 · growthᵏ` for which `H₂` passes the PSD test.
pub fn compute_mu(d1: &Mat, d2: &Mat, w: &Mat, params: &ShiftParams) -> Result<MuEstimate> {
    let kernel = ShiftKernel::new(d1, d2, w, params)?;
    compute_mu_with(&kernel, params)
}

pub fn compute_mu_with(kernel: &ShiftKernel, params: &ShiftParams) -> Result<MuEstimate> {
    let mut mu = params.mu0;
    let mut lambda = f64::NAN;
    for k in 0..=params.max_doublings {
        lambda = linalg::sym_eigen(&kernel.h2(mu)?)?.0[0];
        if lambda >= params.lambda_tol {
            return Ok(MuEstimate {
                mu,
                doublings: k,
                lambda_min_h2: lambda,
            });
        }
        if k < params.max_doublings {
            mu *= params.growth;
        }
    }
    Err(Error::ShiftCap {
        doublings: params.max_doublings,
        mu,
        lambda_min: lambda,
    })
}

/// Surplus bookkeeping for shift correction.
///
/// Every `nu` iterations the surplus `mu_hat` is reset to the smallest
/// eigenvalue (clamped at zero) of the estimate about to be perturbed. Each
/// requested shift is first paid from the surplus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MuLedger {
    pub mu_hat: f64,
    /// Correction period; 0 disables correction.
    pub nu: usize,
    pub applied: Vec<f64>,
}

impl MuLedger {
    pub fn new(nu: usize) -> Self {
        MuLedger {
            mu_hat: 0.0,
            nu,
            applied: Vec::new(),
        }
    }

    /// Pays `mu_tilde` from the surplus and records the shift that remains.
    pub fn consume(&mut self, mu_tilde: f64) -> f64 {
        let mu_tilde = mu_tilde.max(0.0);
        let paid = mu_tilde.min(self.mu_hat);
        self.mu_hat -= paid;
        let mu = mu_tilde - paid;
        self.applied.push(mu);
        mu
    }

    /// Resets the surplus from the smallest eigenvalue of `stored`.
    pub fn refresh(&mut self, stored: &Mat) -> Result<()> {
        let sym = linalg::symmetrize(stored);
        let lmin = linalg::eig_min_sym_iterative(|x| &sym * x, sym.nrows())?.value;
        self.mu_hat = lmin.max(0.0);
        Ok(())
    }

    pub fn due(&self, iter: usize) -> bool {
        self.nu > 0 && iter.is_multiple_of(self.nu)
    }

    pub fn total_applied(&self) -> f64 {
        self.applied.iter().sum()
    }
}

/// Applies shift correction at iteration `iter`: refreshes the surplus when
/// due, then pays `mu_tilde` from it. Without correction (`nu = 0`) the shift
/// passes through unchanged.
pub fn correct_mu(ledger: &mut MuLedger, mu_tilde: f64, stored: &Mat, iter: usize) -> Result<f64> {
    if ledger.nu == 0 {
        let mu = mu_tilde.max(0.0);
        ledger.applied.push(mu);
        return Ok(mu);
    }
    if ledger.due(iter) {
        ledger.refresh(stored)?;
    }
    Ok(ledger.consume(mu_tilde))
}

/// `min(α, 1/μ)` in inverse mode with scaling enabled and `μ > 0`, else `α`.
pub fn mu_scaled_alpha(alpha: f64, mu: f64, enabled: bool, mode: UpdateMode) -> f64 {
    if enabled && mode == UpdateMode::Inverse && mu > 0.0 {
        alpha.min(1.0 / mu)
    } else {
        alpha
    }
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clamped to 0.
pub fn psd_projection(h: &Mat) -> Result<Mat> {
    let (values, vectors) = linalg::sym_eigen(h)?;
    if values[0] >= 0.0 {
        return Ok(h.clone());
    }
    let clamped = values.map(|v| v.max(0.0));
    Ok(linalg::symmetrize(
        &(&vectors * Mat::from_diagonal(&clamped) * vectors.transpose()),
    ))
}

/// Dense symmetric part of `D1 W⁻¹ D2ᵀ`. Test oracle; forms `n x n`.
pub fn dense_delta(d1: &Mat, d2: &Mat, w: &Mat) -> Result<Mat> {
    let e = d1 * linalg::solve(w, &d2.transpose())?;
    Ok(linalg::symmetrize(&e))
}
