//! Test objectives: logistic regression, p-order regression, multiclass
//! cross-entropy, convex quadratics and a small tanh network.
//!
//! All losses average over samples with `1/m`, except cross-entropy which is a
//! plain sum over samples.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

/// RNG stream ids. Each random quantity of an instance is drawn from its own
/// ChaCha8 stream of the instance seed, so adding a draw to one never shifts
/// another.
pub mod streams {
    pub const MATRIX: u64 = 1;
    pub const LABELS: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const PLANTED: u64 = 4;
    pub const INIT: u64 = 5;
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    // Fill row by row so the draw order does not depend on storage layout.
    let mut m = Mat::zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Feature decay weights `c_j = exp(-c_bar * j / n)` for `j = 1..n`.
pub fn decay_weights(n: usize, c_bar: f64) -> Vector {
    Vector::from_fn(n, |j, _| (-c_bar * (j + 1) as f64 / n as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Logreg,
    Porder,
    Xent,
    Quadratic,
    MlpBinary,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Logreg => "logreg",
            ProblemKind::Porder => "porder",
            ProblemKind::Xent => "xent",
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::MlpBinary => "mlp-binary",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "logreg" => ProblemKind::Logreg,
            "porder" => ProblemKind::Porder,
            "xent" => ProblemKind::Xent,
            "quadratic" => ProblemKind::Quadratic,
            "mlp" | "mlp-binary" => ProblemKind::MlpBinary,
            other => return Err(Error::InvalidParameter(format!("unknown problem kind {other:?}"))),
        })
    }
}

/// Which logistic-regression data model generated `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `A_ij = b_i z_ij + omega z_ij c_j`.
    #[default]
    High,
    /// `A_ij = b_i z_ij (1 - c_j) + omega z_ij c_j`.
    Low,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "high" => Ok(Regime::High),
            "low" => Ok(Regime::Low),
            other => Err(Error::InvalidParameter(format!("unknown regime {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "values", rename_all = "lowercase")]
pub enum Labels {
    /// ±1 labels.
    Binary(Vec<i8>),
    /// Class indices in `1..=n_classes`.
    Class(Vec<usize>),
    Real(Vec<f64>),
}

/// Generation parameters, kept for provenance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cond: Option<f64>,
}

/// A generated objective. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceDoc", into = "InstanceDoc")]
pub struct ProblemInstance {
    pub kind: ProblemKind,
    /// Data matrix; for quadratics this is the Hessian `Q`.
    pub a: Mat,
    /// For quadratics the linear term `c` of `x'Qx/2 - c'x`.
    pub labels: Labels,
    pub p: Option<f64>,
    pub n_classes: Option<usize>,
    pub hidden: Option<usize>,
    pub seed: u64,
    pub meta: GenMeta,
}

/// On-disk form: the matrix as a row-major array.
#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    kind: ProblemKind,
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    labels: Labels,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hidden: Option<usize>,
    seed: u64,
    #[serde(default)]
    meta: GenMeta,
    /// Sample normalization of the loss; informational.
    #[serde(default)]
    normalization: String,
}

impl From<ProblemInstance> for InstanceDoc {
    fn from(p: ProblemInstance) -> Self {
        let (rows, cols) = p.a.shape();
        let a = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|ij| p.a[ij])
            .collect();
        let normalization = match p.kind {
            ProblemKind::Xent | ProblemKind::Quadratic => "none",
            _ => "1/m",
        }
        .to_string();
        InstanceDoc {
            kind: p.kind,
            rows,
            cols,
            a,
            labels: p.labels,
            p: p.p,
            n_classes: p.n_classes,
            hidden: p.hidden,
            seed: p.seed,
            meta: p.meta,
            normalization,
        }
    }
}

impl TryFrom<InstanceDoc> for ProblemInstance {
    type Error = Error;

    fn try_from(d: InstanceDoc) -> Result<Self> {
        if d.a.len() != d.rows * d.cols {
            return Err(Error::Serialization(format!(
                "matrix payload has {} entries, expected {}x{}",
                d.a.len(),
                d.rows,
                d.cols
            )));
        }
        let inst = ProblemInstance {
            kind: d.kind,
            a: Mat::from_row_slice(d.rows, d.cols, &d.a),
            labels: d.labels,
            p: d.p,
            n_classes: d.n_classes,
            hidden: d.hidden,
            seed: d.seed,
            meta: d.meta,
        };
        inst.validate()?;
        Ok(inst)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_size(what: &str, n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter(format!("{what} must be at least 1")))
    } else {
        Ok(())
    }
}

/// Logistic regression data with class-balanced ±1 labels.
pub fn gen_logreg(
    m: usize,
    n: usize,
    c_bar: f64,
    omega: f64,
    regime: Regime,
    seed: u64,
) -> Result<ProblemInstance> {
    check_size("m", m)?;
    check_size("n", n)?;
    if !(c_bar > 0.0) {
        return Err(Error::InvalidParameter(format!("c_bar must be positive, got {c_bar}")));
    }
    let labels = balanced_labels(m, &mut rng_for(seed, streams::LABELS));
    let z = normal_mat(&mut rng_for(seed, streams::MATRIX), m, n);
    let c = decay_weights(n, c_bar);
    let a = Mat::from_fn(m, n, |i, j| {
        let b = labels[i] as f64;
        let signal = match regime {
            Regime::High => b * z[(i, j)],
            Regime::Low => b * z[(i, j)] * (1.0 - c[j]),
        };
        signal + omega * z[(i, j)] * c[j]
    });
    Ok(ProblemInstance {
        kind: ProblemKind::Logreg,
        a,
        labels: Labels::Binary(labels),
        p: None,
        n_classes: None,
        hidden: None,
        seed,
        meta: GenMeta {
            c_bar: Some(c_bar),
            omega: Some(omega),
            regime: Some(regime),
            ..GenMeta::default()
        },
    })
}

fn balanced_labels(m: usize, rng: &mut ChaCha8Rng) -> Vec<i8> {
    let mut labels: Vec<i8> = (0..m).map(|i| if i < m.div_ceil(2) { 1 } else { -1 }).collect();
    labels.shuffle(rng);
    labels
}

/// Decayed Gaussian matrix scaled to unit spectral norm.
fn normalized_decay_matrix(m: usize, n: usize, c_bar: f64, seed: u64) -> Mat {
    let c = decay_weights(n, c_bar);
    let mut a = normal_mat(&mut rng_for(seed, streams::MATRIX), m, n);
    for j in 0..n {
        a.column_mut(j).scale_mut(c[j]);
    }
    let norm = linalg::spectral_norm(&a);
    a / norm
}

/// Robust regression `(1/2m)‖Ax - b‖_p^p` with a planted solution.
pub fn gen_porder(
    m: usize,
    n: usize,
    p: f64,
    c_bar: f64,
    sigma: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    check_size("m", m)?;
    check_size("n", n)?;
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
    }
    let a = normalized_decay_matrix(m, n, c_bar, seed);
    let x = normal_vec(&mut rng_for(seed, streams::PLANTED), n);
    let noise = normal_vec(&mut rng_for(seed, streams::NOISE), m);
    let raw = &a * x + noise * sigma;
    let b = &raw / raw.norm();
    Ok(ProblemInstance {
        kind: ProblemKind::Porder,
        a,
        labels: Labels::Real(b.iter().copied().collect()),
        p: Some(p),
        n_classes: None,
        hidden: None,
        seed,
        meta: GenMeta {
            c_bar: Some(c_bar),
            sigma: Some(sigma),
            ..GenMeta::default()
        },
    })
}

/// Multiclass cross-entropy with labels from a noisy planted classifier.
pub fn gen_xent(
    m: usize,
    n: usize,
    n_classes: usize,
    c_bar: f64,
    sigma: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    check_size("m", m)?;
    check_size("n", n)?;
    if n_classes < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 classes, got {n_classes}")));
    }
    let a = normalized_decay_matrix(m, n, c_bar, seed);
    let x = normal_mat(&mut rng_for(seed, streams::PLANTED), n, n_classes);
    let w = normal_mat(&mut rng_for(seed, streams::NOISE), m, n_classes);
    let scores = &a * x + w * sigma;
    let labels = (0..m)
        .map(|i| {
            let (k, _) = scores
                .row(i)
                .iter()
                .copied()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("n_classes >= 2");
            k + 1
        })
        .collect();
    Ok(ProblemInstance {
        kind: ProblemKind::Xent,
        a,
        labels: Labels::Class(labels),
        p: None,
        n_classes: Some(n_classes),
        hidden: None,
        seed,
        meta: GenMeta {
            c_bar: Some(c_bar),
            sigma: Some(sigma),
            ..GenMeta::default()
        },
    })
}

/// `x'Qx/2 - c'x` with `Q` having log-spaced eigenvalues in `[1, cond]`.
pub fn gen_quadratic(n: usize, cond: f64, seed: u64) -> Result<ProblemInstance> {
    check_size("n", n)?;
    if !(cond >= 1.0) {
        return Err(Error::InvalidParameter(format!("condition number must be >= 1, got {cond}")));
    }
    let g = normal_mat(&mut rng_for(seed, streams::MATRIX), n, n);
    let q = g.qr().q();
    let eigs = Vector::from_fn(n, |i, _| {
        if n == 1 {
            1.0
        } else {
            cond.powf(i as f64 / (n - 1) as f64)
        }
    });
    let hess = linalg::symmetrize(&(&q * Mat::from_diagonal(&eigs) * q.transpose()));
    let c = normal_vec(&mut rng_for(seed, streams::PLANTED), n);
    Ok(ProblemInstance::quadratic(hess, c, seed).with_cond(cond))
}

/// Binary logistic loss of a one-hidden-layer tanh network on logistic
/// regression data (high-signal model, `c_bar = 1`, `omega = 1`).
pub fn gen_mlp(n_in: usize, hidden: usize, m: usize, seed: u64) -> Result<ProblemInstance> {
    check_size("hidden", hidden)?;
    let mut inst = gen_logreg(m, n_in, 1.0, 1.0, Regime::High, seed)?;
    inst.kind = ProblemKind::MlpBinary;
    inst.hidden = Some(hidden);
    Ok(inst)
}

impl ProblemInstance {
    /// Quadratic from an explicit symmetric `Q` and linear term `c`.
    pub fn quadratic(q: Mat, c: Vector, seed: u64) -> Self {
        ProblemInstance {
            kind: ProblemKind::Quadratic,
            a: q,
            labels: Labels::Real(c.iter().copied().collect()),
            p: None,
            n_classes: None,
            hidden: None,
            seed,
            meta: GenMeta::default(),
        }
    }

    fn with_cond(mut self, cond: f64) -> Self {
        self.meta.cond = Some(cond);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("data matrix"));
        }
        let m = self.a.nrows();
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match (&self.kind, &self.labels) {
            (ProblemKind::Logreg | ProblemKind::MlpBinary, Labels::Binary(b)) => {
                if b.len() != m || b.iter().any(|&v| v != 1 && v != -1) {
                    return bad("binary labels must be ±1, one per row".into());
                }
                if self.kind == ProblemKind::MlpBinary && self.hidden.unwrap_or(0) == 0 {
                    return bad("network needs a hidden width".into());
                }
            }
            (ProblemKind::Xent, Labels::Class(b)) => {
                let nc = self.n_classes.unwrap_or(0);
                if nc < 2 || b.len() != m || b.iter().any(|&k| k < 1 || k > nc) {
                    return bad(format!("class labels must lie in 1..={nc}, one per row"));
                }
            }
            (ProblemKind::Porder, Labels::Real(b)) => {
                if b.len() != m || !self.p.is_some_and(|p| p > 1.0) {
                    return bad("p-order needs p > 1 and one target per row".into());
                }
            }
            (ProblemKind::Quadratic, Labels::Real(c)) => {
                if !self.a.is_square() || c.len() != m {
                    return bad("quadratic needs square Q and matching c".into());
                }
            }
            (kind, _) => return bad(format!("label type does not match kind {}", kind.name())),
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// Number of optimization variables.
    pub fn dim(&self) -> usize {
        let n = self.a.ncols();
        match self.kind {
            ProblemKind::Xent => n * self.n_classes.unwrap_or(0),
            ProblemKind::MlpBinary => {
                let h = self.hidden.unwrap_or(0);
                h * n + 2 * h + 1
            }
            _ => n,
        }
    }

    /// Starting point used by the benchmarks: the origin for the convex
    /// problems, small random weights for the network (all-zero weights are a
    /// stationary point of the hidden layer).
    pub fn initial_point(&self) -> Vector {
        match self.kind {
            ProblemKind::MlpBinary => {
                let mut rng = rng_for(self.seed, streams::INIT);
                normal_vec(&mut rng, self.dim()) * (1.0 / (self.a.ncols() as f64).sqrt())
            }
            _ => Vector::zeros(self.dim()),
        }
    }

    fn check_point(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "point has {} entries, problem has {}",
                x.len(),
                self.dim()
            )));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("point"));
        }
        Ok(())
    }

    fn binary(&self) -> &[i8] {
        match &self.labels {
            Labels::Binary(b) => b,
            _ => unreachable!("validated"),
        }
    }

    fn real(&self) -> Vector {
        match &self.labels {
            Labels::Real(b) => Vector::from_column_slice(b),
            _ => unreachable!("validated"),
        }
    }

    fn classes(&self) -> &[usize] {
        match &self.labels {
            Labels::Class(b) => b,
            _ => unreachable!("validated"),
        }
    }

    fn xent_weights(&self, x: &Vector) -> Mat {
        let n = self.a.ncols();
        Mat::from_column_slice(n, self.n_classes.expect("validated"), x.as_slice())
    }

    /// Row-wise softmax of the logits and the per-row log-sum-exp.
    fn softmax_rows(logits: &Mat) -> (Mat, Vector) {
        let mut probs = logits.clone();
        let mut lse = Vector::zeros(logits.nrows());
        for i in 0..logits.nrows() {
            let shift = logits.row(i).max();
            let mut total = 0.0;
            for k in 0..logits.ncols() {
                let e = (logits[(i, k)] - shift).exp();
                probs[(i, k)] = e;
                total += e;
            }
            for k in 0..logits.ncols() {
                probs[(i, k)] /= total;
            }
            lse[i] = shift + total.ln();
        }
        (probs, lse)
    }

    pub fn eval_f(&self, x: &Vector) -> Result<f64> {
        self.check_point(x)?;
        let m = self.m() as f64;
        Ok(match self.kind {
            ProblemKind::Logreg => {
                let z = &self.a * x;
                z.iter()
                    .zip(self.binary())
                    .map(|(&zi, &b)| softplus(-(b as f64) * zi))
                    .sum::<f64>()
                    / m
            }
            ProblemKind::Porder => {
                let p = self.p.expect("validated");
                let r = &self.a * x - self.real();
                r.iter().map(|v| v.abs().powf(p)).sum::<f64>() / (2.0 * m)
            }
            ProblemKind::Xent => {
                let logits = &self.a * self.xent_weights(x);
                let (_, lse) = Self::softmax_rows(&logits);
                self.classes()
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| lse[i] - logits[(i, k - 1)])
                    .sum()
            }
            ProblemKind::Quadratic => 0.5 * x.dot(&(&self.a * x)) - x.dot(&self.real()),
            ProblemKind::MlpBinary => {
                let net = self.unpack_mlp(x);
                let (out, _) = net.forward(&self.a);
                out.iter()
                    .zip(self.binary())
                    .map(|(&o, &b)| softplus(-(b as f64) * o))
                    .sum::<f64>()
                    / m
            }
        })
    }

    pub fn eval_grad(&self, x: &Vector) -> Result<Vector> {
        self.check_point(x)?;
        let m = self.m() as f64;
        Ok(match self.kind {
            ProblemKind::Logreg => {
                let z = &self.a * x;
                let w = Vector::from_iterator(
                    z.len(),
                    z.iter().zip(self.binary()).map(|(&zi, &b)| {
                        let b = b as f64;
                        -b * sigmoid(-b * zi) / m
                    }),
                );
                self.a.tr_mul(&w)
            }
            ProblemKind::Porder => {
                let p = self.p.expect("validated");
                let r = &self.a * x - self.real();
                let w = r.map(|v| v.signum() * v.abs().powf(p - 1.0) * p / (2.0 * m));
                self.a.tr_mul(&w)
            }
            ProblemKind::Xent => {
                let logits = &self.a * self.xent_weights(x);
                let (mut probs, _) = Self::softmax_rows(&logits);
                for (i, &k) in self.classes().iter().enumerate() {
                    probs[(i, k - 1)] -= 1.0;
                }
                let g = self.a.tr_mul(&probs);
                Vector::from_column_slice(g.as_slice())
            }
            ProblemKind::Quadratic => &self.a * x - self.real(),
            ProblemKind::MlpBinary => self.mlp_grad(x),
        })
    }

    /// Dense Hessian, for the Newton baseline.
    pub fn eval_hess(&self, x: &Vector) -> Result<Mat> {
        self.check_point(x)?;
        let m = self.m() as f64;
        let weighted_gram = |w: &Vector| {
            let mut scaled = self.a.clone();
            for (i, mut row) in scaled.row_iter_mut().enumerate() {
                row *= w[i];
            }
            linalg::symmetrize(&self.a.tr_mul(&scaled))
        };
        match self.kind {
            ProblemKind::Logreg => {
                let z = &self.a * x;
                let w = z.map(|zi| {
                    let s = sigmoid(zi);
                    s * (1.0 - s) / m
                });
                Ok(weighted_gram(&w))
            }
            ProblemKind::Porder => {
                let p = self.p.expect("validated");
                if p < 2.0 {
                    return Err(Error::Unsupported(format!(
                        "p-order Hessian is unbounded near zero residuals for p = {p} < 2"
                    )));
                }
                let r = &self.a * x - self.real();
                let w = r.map(|v| p * (p - 1.0) * v.abs().powf(p - 2.0) / (2.0 * m));
                Ok(weighted_gram(&w))
            }
            ProblemKind::Xent => {
                let n = self.a.ncols();
                let nc = self.n_classes.expect("validated");
                let logits = &self.a * self.xent_weights(x);
                let (probs, _) = Self::softmax_rows(&logits);
                let mut h = Mat::zeros(n * nc, n * nc);
                for k in 0..nc {
                    for l in k..nc {
                        let w = Vector::from_fn(self.m(), |i, _| {
                            let pk = probs[(i, k)];
                            let delta = if k == l { 1.0 } else { 0.0 };
                            pk * (delta - probs[(i, l)])
                        });
                        let block = weighted_gram(&w);
                        h.view_mut((k * n, l * n), (n, n)).copy_from(&block);
                        if k != l {
                            h.view_mut((l * n, k * n), (n, n)).copy_from(&block.transpose());
                        }
                    }
                }
                Ok(h)
            }
            ProblemKind::Quadratic => Ok(self.a.clone()),
            ProblemKind::MlpBinary => Err(Error::Unsupported(
                "no analytic Hessian for the network objective".into(),
            )),
        }
    }

    fn unpack_mlp(&self, x: &Vector) -> Mlp {
        let n_in = self.a.ncols();
        let h = self.hidden.expect("validated");
        let w1 = Mat::from_row_slice(h, n_in, &x.as_slice()[..h * n_in]);
        let b1 = x.rows(h * n_in, h).into_owned();
        let w2 = x.rows(h * n_in + h, h).into_owned();
        let b2 = x[h * n_in + 2 * h];
        Mlp { w1, b1, w2, b2 }
    }

    fn mlp_grad(&self, x: &Vector) -> Vector {
        let net = self.unpack_mlp(x);
        let (out, act) = net.forward(&self.a);
        let m = self.m() as f64;
        // d loss / d output, per sample.
        let dout = Vector::from_iterator(
            out.len(),
            out.iter().zip(self.binary()).map(|(&o, &b)| {
                let b = b as f64;
                -b * sigmoid(-b * o) / m
            }),
        );
        let g_w2 = act.tr_mul(&dout);
        let g_b2 = dout.sum();
        // d loss / d pre-activation, m x h.
        let mut dz = act.map(|t| 1.0 - t * t);
        for (i, mut row) in dz.row_iter_mut().enumerate() {
            row.component_mul_assign(&(net.w2.transpose() * dout[i]));
        }
        let g_w1 = dz.tr_mul(&self.a);
        let g_b1 = dz.row_sum().transpose();

        let h = net.b1.len();
        let n_in = self.a.ncols();
        let mut g = Vector::zeros(self.dim());
        for r in 0..h {
            for c in 0..n_in {
                g[r * n_in + c] = g_w1[(r, c)];
            }
        }
        g.rows_mut(h * n_in, h).copy_from(&g_b1);
        g.rows_mut(h * n_in + h, h).copy_from(&g_w2);
        g[h * n_in + 2 * h] = g_b2;
        g
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Serialization(e.to_string()))?;
        Self::from_json(&s)
    }
}

/// Network weights: hidden layer `W1 (h x n_in)`, `b1`, output `w2`, `b2`.
/// Flattened as `W1` row-major, then `b1`, `w2`, `b2`.
struct Mlp {
    w1: Mat,
    b1: Vector,
    w2: Vector,
    b2: f64,
}

impl Mlp {
    /// Outputs per sample and the hidden activations (m x h).
    fn forward(&self, a: &Mat) -> (Vector, Mat) {
        let mut pre = a * self.w1.transpose();
        for mut row in pre.row_iter_mut() {
            row += self.b1.transpose();
        }
        let act = pre.map(f64::tanh);
        let out = (&act * &self.w2).add_scalar(self.b2);
        (out, act)
    }
}

/// Central-difference gradient, step `1e-6 (1 + ‖x‖)`. Test oracle.
pub fn fd_gradient(p: &ProblemInstance, x: &Vector) -> Result<Vector> {
    let h = 1e-6 * (1.0 + x.norm());
    let mut g = Vector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + h;
        let fp = p.eval_f(&xp)?;
        xp[i] = orig - h;
        let fm = p.eval_f(&xp)?;
        xp[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Relative error `‖a - b‖ / max(‖b‖, floor)`.
pub fn relative_error(a: &Vector, b: &Vector, floor: f64) -> f64 {
    (a - b).norm() / b.norm().max(floor)
}
