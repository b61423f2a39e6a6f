//! Multisecant Broyden, PSB (Powell symmetric Broyden), DFP and BFGS updates.
//!
//! Every update is expressed as a low-rank correction `D1 W⁻¹ D2ᵀ` added to
//! the current estimate: of the Hessian `B` in direct mode, of its inverse `H`
//! in inverse mode. Only `r x r` systems in `W` are ever solved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Broyden,
    Psb,
    Dfp,
    Bfgs,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Broyden, Method::Psb, Method::Dfp, Method::Bfgs];

    pub fn name(self) -> &'static str {
        match self {
            Method::Broyden => "broyden",
            Method::Psb => "psb",
            Method::Dfp => "dfp",
            Method::Bfgs => "bfgs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// The state approximates the Hessian; directions need a linear solve.
    Direct,
    /// The state approximates the inverse Hessian.
    #[default]
    Inverse,
}

/// The matrix a solver carries between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianState {
    pub matrix: Mat,
    pub mode: UpdateMode,
}

impl HessianState {
    pub fn identity(n: usize, mode: UpdateMode) -> Self {
        HessianState {
            matrix: Mat::identity(n, n),
            mode,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// One update `D1 W⁻¹ D2ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactors {
    pub d1: Mat,
    pub d2: Mat,
    pub w: Mat,
    pub method: Method,
}

impl LowRankFactors {
    pub fn new(d1: Mat, d2: Mat, w: Mat, method: Method) -> Result<Self> {
        let r = w.nrows();
        if !w.is_square() || d1.ncols() != r || d2.ncols() != r || d1.nrows() != d2.nrows() {
            return Err(Error::Dimension(format!(
                "factors D1 {:?}, D2 {:?}, W {:?} do not conform",
                d1.shape(),
                d2.shape(),
                w.shape()
            )));
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("update kernel W"));
        }
        Ok(LowRankFactors { d1, d2, w, method })
    }

    pub fn rank(&self) -> usize {
        self.w.nrows()
    }

    /// The dense `n x n` correction `D1 W⁻¹ D2ᵀ`.
    pub fn correction(&self) -> Result<Mat> {
        let right = linalg::solve(&self.w, &self.d2.transpose())?;
        Ok(&self.d1 * right)
    }
}

fn check_secants(m: &Mat, s: &Mat, y: &Mat) -> Result<()> {
    let n = m.nrows();
    if !m.is_square() || s.nrows() != n || s.shape() != y.shape() || s.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "state {:?} with S {:?} and Y {:?}",
            m.shape(),
            s.shape(),
            y.shape()
        )));
    }
    if !s.iter().chain(y.iter()).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("secant block"));
    }
    Ok(())
}

fn block2(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    let (r1, c1) = a.shape();
    let (r2, c2) = d.shape();
    let mut out = Mat::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a);
    out.view_mut((0, c1), (r1, c2)).copy_from(b);
    out.view_mut((r1, 0), (r2, c1)).copy_from(c);
    out.view_mut((r1, c1), (r2, c2)).copy_from(d);
    out
}

fn hcat(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// Factors of the direct update `B₊ = B + D1 W⁻¹ D2ᵀ`, with `R = Y - BS`:
///
/// * Broyden: `B + R (SᵀS)⁻¹ Sᵀ`
/// * PSB: `B + R T Sᵀ + S T Rᵀ - S T RᵀS T Sᵀ`, `T = (SᵀS)⁻¹`
/// * DFP: `B + R P Yᵀ + Y P Rᵀ - Y P RᵀS P Yᵀ`, `P = (YᵀS)⁻¹`
/// * BFGS: `B + Y (YᵀS)⁻¹ Yᵀ - BS (SᵀBS)⁻¹ SᵀB`
///
/// All four satisfy `B₊ S = Y`.
pub fn direct_factors(method: Method, b: &Mat, s: &Mat, y: &Mat) -> Result<LowRankFactors> {
    check_secants(b, s, y)?;
    let q = s.ncols();
    let bs = b * s;
    let r = y - &bs;
    let zeros = Mat::zeros(q, q);
    let (d1, d2, w) = match method {
        Method::Broyden => (r, s.clone(), s.tr_mul(s)),
        Method::Psb => {
            let d = hcat(&r, s);
            let sts = s.tr_mul(s);
            (d.clone(), d, block2(&r.tr_mul(s), &sts, &sts, &zeros))
        }
        Method::Dfp => {
            let d = hcat(&r, y);
            let yts = y.tr_mul(s);
            (d.clone(), d, block2(&r.tr_mul(s), &yts, &yts, &zeros))
        }
        Method::Bfgs => {
            let w = block2(&y.tr_mul(s), &zeros, &zeros, &(-s.tr_mul(&bs)));
            (hcat(y, &bs), hcat(y, &b.tr_mul(s)), w)
        }
    };
    LowRankFactors::new(d1, d2, w, method)
}

/// The unsymmetrized direct update.
pub fn direct_update(method: Method, b: &Mat, s: &Mat, y: &Mat) -> Result<Mat> {
    let f = direct_factors(method, b, s, y)?;
    Ok(b + f.correction()?)
}

/// Symmetric direct updates whose inverses the inverse-mode PSB and DFP
/// factors reproduce.
///
/// * PSB: `(B₊ + B₊ᵀ)/2` of the direct update.
/// * DFP: `B + R P Yᵀ + Y Pᵀ Rᵀ + Y Pᵀ (SᵀBS) P Yᵀ - Y (P + Pᵀ) Yᵀ / 2`. This
///   coincides with the symmetrized direct update only when `YᵀS` is
///   symmetric.
/// * Broyden, BFGS: symmetrized direct update.
pub fn symmetrized_direct_update(method: Method, b: &Mat, s: &Mat, y: &Mat) -> Result<Mat> {
    match method {
        Method::Dfp => {
            check_secants(b, s, y)?;
            let q = s.ncols();
            let p = linalg::solve(&y.tr_mul(s), &Mat::identity(q, q))?;
            let r = y - b * s;
            let sbs = s.tr_mul(&(b * s));
            let rpy = &r * &p * y.transpose();
            let out = b + &rpy + rpy.transpose() + y * p.transpose() * sbs * &p * y.transpose()
                - y * (&p + p.transpose()) * y.transpose() * 0.5;
            Ok(linalg::symmetrize(&out))
        }
        _ => Ok(linalg::symmetrize(&direct_update(method, b, s, y)?)),
    }
}

/// Factors of the inverse update `H₊ = H + D1 W⁻¹ D2ᵀ`, where `H` estimates
/// `B⁻¹`.
///
/// * Broyden: `H₊ = H - (HY - S)(SᵀHY)⁻¹ SᵀH`, exact inverse of the direct
///   update for any invertible `H`; rank `q`.
/// * BFGS: `H₊ = H - [HY, S] K⁻¹ [YᵀH; Sᵀ]` with
///   `K = [[YᵀS + YᵀHY, YᵀS], [SᵀY, 0]]`; exact for any invertible `H`; rank
///   `2q`.
/// * PSB: `H₊ = H - D K⁻¹ Dᵀ`, `D = [HY - S, HS]`,
///   `K = [[YᵀHY - (YᵀS + SᵀY)/2, YᵀHS], [SᵀHY, SᵀHS]]`; inverse of the
///   symmetrized direct update for symmetric `H`; rank `2q`.
/// * DFP: `H₊ = H - D K⁻¹ Dᵀ`, `D = [HY - S, HY]`, with `T = YᵀHY`,
///   `K = [[T - (YᵀS + SᵀY)/2, T], [T, T]]`; inverse of
///   [`symmetrized_direct_update`] for symmetric `H`; rank `2q`.
///
/// None of these needs `SᵀBS`, so `B` is never formed.
pub fn inverse_factors(method: Method, h: &Mat, s: &Mat, y: &Mat) -> Result<LowRankFactors> {
    check_secants(h, s, y)?;
    let hy = h * y;
    let (d1, d2, w) = match method {
        Method::Broyden => (&hy - s, h.tr_mul(s), -s.tr_mul(&hy)),
        Method::Bfgs => {
            let yts = y.tr_mul(s);
            let k = block2(
                &(&yts + y.tr_mul(&hy)),
                &yts,
                &yts.transpose(),
                &Mat::zeros(s.ncols(), s.ncols()),
            );
            (-hcat(&hy, s), hcat(&h.tr_mul(y), s), k)
        }
        Method::Psb => {
            let hs = h * s;
            let d = hcat(&(&hy - s), &hs);
            let yts = y.tr_mul(s);
            let sym = (&yts + yts.transpose()) * 0.5;
            let k = block2(&(y.tr_mul(&hy) - sym), &y.tr_mul(&hs), &s.tr_mul(&hy), &s.tr_mul(&hs));
            (-&d, d, k)
        }
        Method::Dfp => {
            let d = hcat(&(&hy - s), &hy);
            let t = y.tr_mul(&hy);
            let yts = y.tr_mul(s);
            let sym = (&yts + yts.transpose()) * 0.5;
            let k = block2(&(&t - sym), &t, &t, &t);
            (-&d, d, k)
        }
    };
    LowRankFactors::new(d1, d2, w, method)
}

/// `H + (E + Eᵀ)/2 + μI` with `E = D1 W⁻¹ D2ᵀ`; symmetric by construction
/// when `H` is.
pub fn apply_symmetrized(h: &Mat, f: &LowRankFactors, mu: f64) -> Result<Mat> {
    if !(mu >= 0.0) {
        return Err(Error::InvalidParameter(format!("shift must be nonnegative, got {mu}")));
    }
    if f.d1.nrows() != h.nrows() {
        return Err(Error::Dimension(format!(
            "factors act on R^{}, state on R^{}",
            f.d1.nrows(),
            h.nrows()
        )));
    }
    let e = f.correction()?;
    let mut out = h + (&e + e.transpose()) * 0.5;
    for i in 0..out.nrows() {
        out[(i, i)] += mu;
    }
    Ok(out)
}

/// `H + D1 W⁻¹ D2ᵀ` without symmetrization.
pub fn apply_raw(h: &Mat, f: &LowRankFactors) -> Result<Mat> {
    Ok(h + f.correction()?)
}

fn check_full_rank(s: &Mat) -> Result<()> {
    let q = s.ncols();
    linalg::LuFactor::new(&s.tr_mul(s)).map_err(|_| {
        Error::InvalidParameter(format!("secant matrix with {q} columns is rank deficient"))
    })?;
    Ok(())
}

/// `SᵀBS` for `B = Hinv⁻¹`, through one `n x n` solve.
pub fn sbs_from_inverse(hinv: &Mat, s: &Mat) -> Result<Mat> {
    if hinv.nrows() != s.nrows() {
        return Err(Error::Dimension(format!("H is {:?}, S is {:?}", hinv.shape(), s.shape())));
    }
    check_full_rank(s)?;
    let bs = linalg::solve(hinv, s)?;
    Ok(s.tr_mul(&bs))
}

/// `(SᵀS)(SᵀHS)⁻¹(SᵀS)`: the cheap estimate of `SᵀBS` from `H = B⁻¹`. Exact
/// when the columns of `S` span an invariant subspace of `B` (for example
/// eigenvectors); otherwise only an approximation. Kept for comparison with
/// [`sbs_from_inverse`].
pub fn sbs_projection_estimate(hinv: &Mat, s: &Mat) -> Result<Mat> {
    check_full_rank(s)?;
    let sts = s.tr_mul(s);
    let shs = s.tr_mul(&(hinv * s));
    Ok(&sts * linalg::solve(&shs, &sts)?)
}
