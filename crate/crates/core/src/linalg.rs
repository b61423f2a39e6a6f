//! Dense real linear-algebra kernels.
//!
//! Everything numerically delicate used by the update, shift and optimizer
//! modules funnels through here: SVD, symmetric eigenvalues (dense and
//! Lanczos), and condition-checked linear solves. Factorizations are backed by
//! `nalgebra`; the condition estimator and the Lanczos iteration are local.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Systems whose 1-norm condition estimate exceeds this are reported as
/// [`Error::SingularSystem`].
pub const CONDITION_LIMIT: f64 = 1e12;

/// Largest dimension handled by the dense symmetric eigensolver in
/// [`eig_min_sym`]; larger matrices go through Lanczos.
pub const DENSE_EIG_LIMIT: usize = 512;

/// Relative asymmetry tolerated by the symmetric eigen routines.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Records the largest square dimension passed to a decomposition on the
/// current thread. Lets tests assert that a routine only ever factors small
/// matrices.
pub mod probe {
    use std::cell::Cell;

    thread_local! {
        static MAX_DIM: Cell<usize> = const { Cell::new(0) };
    }

    pub fn reset() {
        MAX_DIM.with(|m| m.set(0));
    }

    pub fn max_factored_dim() -> usize {
        MAX_DIM.with(|m| m.get())
    }

    pub(crate) fn record(dim: usize) {
        MAX_DIM.with(|m| m.set(m.get().max(dim)));
    }
}

fn ensure_finite(a: &Mat, what: &'static str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn ensure_square(a: &Mat, what: &str) -> Result<()> {
    if a.nrows() == a.ncols() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )))
    }
}

/// `(A + Aᵀ)/2`.
pub fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Frobenius norm of `A - Aᵀ`, relative to `‖A‖_F` (zero for the zero matrix).
pub fn relative_asymmetry(a: &Mat) -> f64 {
    let norm = a.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (a - a.transpose()).norm() / norm
}

fn check_symmetric(a: &Mat) -> Result<()> {
    let asym = relative_asymmetry(a);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            limit: SYMMETRY_TOL,
        });
    }
    Ok(())
}

/// Full singular value decomposition `A = U diag(sigma) Vᵀ` with `sigma`
/// sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub sigma: Vector,
    pub v: Mat,
}

impl Svd {
    pub fn reconstruct(&self) -> Mat {
        &self.u * Mat::from_diagonal(&self.sigma) * self.v.transpose()
    }
}

pub fn svd(a: &Mat) -> Result<Svd> {
    ensure_finite(a, "svd input")?;
    probe::record(a.nrows().max(a.ncols()));
    let raw = a.clone().svd(true, true);
    let u = raw.u.expect("requested U");
    let v_t = raw.v_t.expect("requested V^T");
    let k = raw.singular_values.len();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| raw.singular_values[j].total_cmp(&raw.singular_values[i]));

    let sigma = Vector::from_iterator(k, order.iter().map(|&i| raw.singular_values[i]));
    let u = Mat::from_columns(&order.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let v = Mat::from_columns(&order.iter().map(|&i| v_t.row(i).transpose()).collect::<Vec<_>>());
    Ok(Svd { u, sigma, v })
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending and
/// eigenvectors in matching columns.
pub fn sym_eigen(a: &Mat) -> Result<(Vector, Mat)> {
    ensure_square(a, "symmetric eigen input")?;
    ensure_finite(a, "symmetric eigen input")?;
    check_symmetric(a)?;
    probe::record(a.nrows());
    let eig = SymmetricEigen::new(symmetrize(a));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors =
        Mat::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    Ok((values, vectors))
}

/// Smallest eigenvalue of a symmetric matrix.
///
/// Dense up to [`DENSE_EIG_LIMIT`], Lanczos beyond it.
pub fn eig_min_sym(a: &Mat) -> Result<f64> {
    ensure_square(a, "symmetric eigen input")?;
    ensure_finite(a, "symmetric eigen input")?;
    check_symmetric(a)?;
    let n = a.nrows();
    if n == 0 {
        return Err(Error::Dimension("empty matrix has no eigenvalues".into()));
    }
    if n <= DENSE_EIG_LIMIT {
        probe::record(n);
        let eig = SymmetricEigen::new(symmetrize(a));
        return Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let sym = symmetrize(a);
    Ok(eig_min_sym_iterative(|x| &sym * x, n)?.value)
}

/// Outcome of the Lanczos smallest-eigenvalue search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeEig {
    pub value: f64,
    pub iterations: usize,
    /// Lanczos did not converge and the operator was materialized and
    /// decomposed densely instead.
    pub fell_back: bool,
}

/// Smallest eigenvalue of the symmetric operator `apply` on `R^n`.
///
/// Lanczos with full reorthogonalization from a fixed pseudo-random start, so
/// repeated calls are deterministic. Falls back to a dense decomposition of
/// the materialized operator when the Ritz residual does not settle.
pub fn eig_min_sym_iterative<F>(apply: F, n: usize) -> Result<IterativeEig>
where
    F: Fn(&Vector) -> Vector,
{
    if n == 0 {
        return Err(Error::Dimension("operator on R^0 has no eigenvalues".into()));
    }
    let max_steps = n.min(400);
    let rel_tol = 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c_205e_ed00_0001);
    let mut v = Vector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    v /= v.norm();

    let mut basis: Vec<Vector> = Vec::with_capacity(max_steps);
    let mut alphas: Vec<f64> = Vec::with_capacity(max_steps);
    let mut betas: Vec<f64> = Vec::with_capacity(max_steps);

    for k in 0..max_steps {
        let mut w = apply(&v);
        if w.len() != n || !w.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("Lanczos operator output"));
        }
        let alpha = v.dot(&w);
        basis.push(v.clone());
        alphas.push(alpha);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let beta = w.norm();

        let steps = k + 1;
        let check = steps <= 40 || steps % 8 == 0 || steps == max_steps || beta == 0.0;
        if check {
            let t = tridiagonal(&alphas, &betas);
            let eig = SymmetricEigen::new(t);
            let (imin, theta) = eig
                .eigenvalues
                .iter()
                .copied()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty");
            let scale = eig
                .eigenvalues
                .iter()
                .fold(0.0_f64, |m, x| m.max(x.abs()))
                .max(f64::MIN_POSITIVE);
            let residual = beta * eig.eigenvectors[(steps - 1, imin)].abs();
            if residual <= rel_tol * scale || beta <= f64::EPSILON * scale || steps == n {
                return Ok(IterativeEig {
                    value: theta,
                    iterations: steps,
                    fell_back: false,
                });
            }
        }
        betas.push(beta);
        v = w / beta;
    }

    // Materialize and decompose.
    let mut dense = Mat::zeros(n, n);
    for j in 0..n {
        let mut e = Vector::zeros(n);
        e[j] = 1.0;
        dense.set_column(j, &apply(&e));
    }
    probe::record(n);
    let eig = SymmetricEigen::new(symmetrize(&dense));
    Ok(IterativeEig {
        value: eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min),
        iterations: max_steps,
        fell_back: true,
    })
}

fn tridiagonal(alphas: &[f64], betas: &[f64]) -> Mat {
    let k = alphas.len();
    let mut t = Mat::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    t
}

/// LU factorization with partial pivoting plus a 1-norm condition estimate.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
    cond: f64,
}

impl LuFactor {
    /// Factors `a`, rejecting it when the condition estimate exceeds
    /// [`CONDITION_LIMIT`].
    pub fn new(a: &Mat) -> Result<Self> {
        ensure_square(a, "system matrix")?;
        ensure_finite(a, "system matrix")?;
        let n = a.nrows();
        probe::record(n);
        let lu = a.clone().lu();
        if !lu.is_invertible() || (0..n).any(|i| lu.u()[(i, i)] == 0.0) {
            return Err(Error::SingularSystem { cond: f64::INFINITY });
        }
        let mut factor = LuFactor { lu, n, cond: f64::NAN };
        let a_norm = one_norm(a);
        let inv_norm = factor.inverse_one_norm_estimate();
        let cond = a_norm * inv_norm;
        factor.cond = if cond.is_finite() { cond } else { f64::INFINITY };
        if !(factor.cond <= CONDITION_LIMIT) {
            return Err(Error::SingularSystem { cond: factor.cond });
        }
        Ok(factor)
    }

    pub fn condition_estimate(&self) -> f64 {
        self.cond
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &Mat) -> Mat {
        self.lu.solve(b).expect("factor checked invertible")
    }

    pub fn solve_vec(&self, b: &Vector) -> Vector {
        self.lu.solve(b).expect("factor checked invertible")
    }

    /// Solves `Aᵀ x = b` from the same factorization.
    pub fn solve_transpose_vec(&self, b: &Vector) -> Vector {
        // P A = L U  =>  Aᵀ = Uᵀ Lᵀ P.
        let u = self.lu.u();
        let l = self.lu.l();
        let z = u
            .transpose()
            .solve_lower_triangular(b)
            .expect("nonzero pivots");
        let mut w = l
            .transpose()
            .solve_upper_triangular(&z)
            .expect("unit diagonal");
        self.lu.p().inv_permute_rows(&mut w);
        w
    }

    /// Hager/Higham estimate of `‖A⁻¹‖₁`; exact for small systems.
    fn inverse_one_norm_estimate(&self) -> f64 {
        let n = self.n;
        if n <= 32 {
            let inv = self.solve(&Mat::identity(n, n));
            return one_norm(&inv);
        }
        let mut x = Vector::from_element(n, 1.0 / n as f64);
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve_vec(&x);
            est = y.iter().map(|v| v.abs()).sum::<f64>();
            let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
            let z = self.solve_transpose_vec(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.abs()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("n > 0");
            if zmax <= z.dot(&x) || j == last_j {
                break;
            }
            last_j = j;
            x = Vector::zeros(n);
            x[j] = 1.0;
        }
        // Higham's alternating test vector guards against Hager's worst cases.
        let b = Vector::from_fn(n, |i, _| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * (1.0 + i as f64 / (n - 1) as f64)
        });
        let alt = 2.0 * self.solve_vec(&b).iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
        est.max(alt)
    }
}

/// Maximum absolute column sum.
pub fn one_norm(a: &Mat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `A X = B`, refusing systems whose condition estimate exceeds
/// [`CONDITION_LIMIT`].
pub fn solve(a: &Mat, b: &Mat) -> Result<Mat> {
    ensure_finite(b, "right-hand side")?;
    if b.nrows() != a.nrows() {
        return Err(Error::Dimension(format!(
            "system is {}x{} but right-hand side has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    Ok(LuFactor::new(a)?.solve(b))
}

/// Spectral norm by power iteration on `AᵀA`.
pub fn spectral_norm(a: &Mat) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut v = Vector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    v /= v.norm();
    let mut sigma2 = 0.0_f64;
    let mut stable = 0;
    for _ in 0..50_000 {
        let av = a * &v;
        let w = a.tr_mul(&av);
        let next = av.norm_squared();
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
        if (next - sigma2).abs() <= 1e-15 * next {
            stable += 1;
            if stable >= 3 {
                sigma2 = next;
                break;
            }
        } else {
            stable = 0;
        }
        sigma2 = next;
    }
    sigma2.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest};
    use rand::rngs::StdRng;

    fn random_mat(rng: &mut StdRng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    fn random_sym(rng: &mut StdRng, n: usize) -> Mat {
        symmetrize(&random_mat(rng, n, n))
    }

    #[test]
    fn svd_identity() {
        let s = svd(&Mat::identity(2, 2)).unwrap();
        assert_eq!(s.sigma.as_slice(), &[1.0, 1.0]);
        assert!((s.reconstruct() - Mat::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn svd_of_signed_diagonal_takes_absolute_values() {
        let a = Mat::from_diagonal(&Vector::from_vec(vec![3.0, -2.0]));
        let s = svd(&a).unwrap();
        assert!((s.sigma[0] - 3.0).abs() < 1e-14);
        assert!((s.sigma[1] - 2.0).abs() < 1e-14);
        assert!((s.reconstruct() - a).norm() < 1e-14);
    }

    #[test]
    fn svd_rejects_nan() {
        let mut a = Mat::identity(3, 3);
        a[(1, 2)] = f64::NAN;
        assert!(matches!(svd(&a), Err(Error::NonFinite(_))));
    }

    #[test]
    fn svd_random_reconstruction_and_orthonormality() {
        let mut rng = StdRng::seed_from_u64(7);
        for trial in 0..100 {
            let n = 1 + trial % 20;
            let a = random_mat(&mut rng, n, n);
            let s = svd(&a).unwrap();
            let eye = Mat::identity(n, n);
            assert!((s.u.transpose() * &s.u - &eye).norm() <= 1e-10);
            assert!((s.v.transpose() * &s.v - &eye).norm() <= 1e-10);
            assert!((s.reconstruct() - &a).norm() <= 1e-9 * a.norm());
            assert!(s.sigma.iter().all(|&x| x >= 0.0));
            assert!(s.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn eig_min_examples() {
        let d = Mat::from_diagonal(&Vector::from_vec(vec![3.0, -1.0]));
        assert!((eig_min_sym(&d).unwrap() + 1.0).abs() < 1e-14);
        assert!((eig_min_sym(&Mat::identity(3, 3)).unwrap() - 1.0).abs() < 1e-14);
        let a = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((eig_min_sym(&a).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_min_rejects_asymmetric() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(eig_min_sym(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn eig_min_rayleigh_bound() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 2 + rng.random_range(0..15);
            let a = random_sym(&mut rng, n);
            let lmin = eig_min_sym(&a).unwrap();
            for _ in 0..100 {
                let x = Vector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
                let rq = x.dot(&(&a * &x)) / x.dot(&x);
                assert!(lmin <= rq + 1e-12);
            }
        }
    }

    #[test]
    fn large_matrices_use_lanczos_and_agree_with_dense() {
        let mut rng = StdRng::seed_from_u64(3);
        let n = DENSE_EIG_LIMIT + 40;
        let a = random_sym(&mut rng, n);
        let via_lanczos = eig_min_sym(&a).unwrap();
        let (dense, _) = sym_eigen(&a).unwrap();
        let scale = dense.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!((via_lanczos - dense[0]).abs() <= 1e-10 * scale);
    }

    #[test]
    fn solve_examples() {
        let mut rng = StdRng::seed_from_u64(5);
        let b = random_mat(&mut rng, 4, 3);
        let x = solve(&Mat::identity(4, 4), &b).unwrap();
        assert!((x - &b).norm() < 1e-15);

        let a = Mat::from_diagonal(&Vector::from_vec(vec![2.0, 4.0]));
        let x = solve(&a, &Mat::from_column_slice(2, 1, &[2.0, 4.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn solve_round_trip() {
        let mut rng = StdRng::seed_from_u64(9);
        for n in [1usize, 3, 10, 40, 90] {
            let a = random_mat(&mut rng, n, n) + Mat::identity(n, n) * (n as f64);
            let x_star = random_mat(&mut rng, n, 2);
            let b = &a * &x_star;
            let x = solve(&a, &b).unwrap();
            assert!((&a * &x - &b).norm() <= 1e-8 * b.norm());
            assert!((&x - &x_star).norm() <= 1e-8 * (1.0 + x_star.norm()));
        }
    }

    #[test]
    fn solve_reports_singular_systems() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        match solve(&a, &Mat::identity(2, 2)) {
            Err(Error::SingularSystem { cond }) => assert!(cond > CONDITION_LIMIT),
            other => panic!("expected SingularSystem, got {other:?}"),
        }
        let nearly = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 1e-14]));
        assert!(matches!(solve(&nearly, &Mat::identity(2, 2)), Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn condition_estimate_tracks_exact_value_on_larger_systems() {
        let mut rng = StdRng::seed_from_u64(21);
        let n = 80;
        let a = random_mat(&mut rng, n, n) + Mat::identity(n, n) * 3.0;
        let lu = LuFactor::new(&a).unwrap();
        let exact = one_norm(&a) * one_norm(&a.clone().try_inverse().unwrap());
        let est = lu.condition_estimate();
        assert!(est <= exact * (1.0 + 1e-10));
        assert!(est >= exact / 10.0, "estimate {est} vs exact {exact}");
    }

    #[test]
    fn transpose_solve_matches() {
        let mut rng = StdRng::seed_from_u64(23);
        let a = random_mat(&mut rng, 50, 50) + Mat::identity(50, 50) * 2.0;
        let b = Vector::from_fn(50, |_, _| rng.random::<f64>());
        let lu = LuFactor::new(&a).unwrap();
        let x = lu.solve_transpose_vec(&b);
        assert!((a.transpose() * x - b).norm() < 1e-10);
    }

    #[test]
    fn lanczos_examples() {
        let r = eig_min_sym_iterative(|x| x.clone(), 30).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);

        let n = 60;
        let diag = Vector::from_fn(n, |i, _| if i == n - 1 { 0.1 } else { 5.0 });
        let r = eig_min_sym_iterative(|x| x.component_mul(&diag), n).unwrap();
        assert!((r.value - 0.1).abs() < 1e-10);
        assert!(!r.fell_back);
    }

    #[test]
    fn lanczos_matches_dense_on_random_symmetric() {
        let mut rng = StdRng::seed_from_u64(17);
        for n in [20usize, 100, 200] {
            let a = random_sym(&mut rng, n);
            let r = eig_min_sym_iterative(|x| &a * x, n).unwrap();
            let dense = eig_min_sym(&a).unwrap();
            assert!(
                (r.value - dense).abs() <= 1e-6 * dense.abs(),
                "n={n}: lanczos {} dense {dense}",
                r.value
            );
        }
    }

    #[test]
    fn spectral_norm_matches_svd() {
        let mut rng = StdRng::seed_from_u64(29);
        let a = random_mat(&mut rng, 60, 30);
        let sigma = svd(&a).unwrap().sigma[0];
        assert!((spectral_norm(&a) - sigma).abs() <= 1e-6 * sigma);
    }

    #[test]
    fn probe_records_largest_factorization() {
        probe::reset();
        let _ = svd(&Mat::identity(3, 3)).unwrap();
        let _ = solve(&Mat::identity(5, 5), &Mat::identity(5, 5)).unwrap();
        assert_eq!(probe::max_factored_dim(), 5);
    }

    proptest! {
        #[test]
        fn solve_round_trip_prop(n in 1usize..12, seed in any::<u64>()) {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = random_mat(&mut rng, n, n) + Mat::identity(n, n) * (2.0 * n as f64);
            let x_star = random_mat(&mut rng, n, 1);
            let x = solve(&a, &(&a * &x_star)).unwrap();
            prop_assert!((&x - &x_star).norm() <= 1e-10 * (1.0 + x_star.norm()));
        }
    }
}
