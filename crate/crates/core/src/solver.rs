//! Exact R-ERM training.
//!
//! [`Objective`] is the regularized loss restricted to an active subset of
//! rows. The full-data objective and every leave-M-out objective share the
//! same design matrix; removing rows only flips entries of the active mask.

use faer::linalg::matmul::triangular::{self, BlockStructure};
use faer::linalg::solvers::Solve;
use faer::{Accum, Col, Mat, MatRef, Par, Side};

use crate::error::{Error, Result};
use crate::glm::ModelSpec;
use crate::unlearn::RemovalRequest;

const ARMIJO: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MIN_STEP: f64 = 1e-10;

pub const DEFAULT_MAX_ITER: usize = 100;
const POLISH_STEPS: usize = 4;

/// Default absolute gradient tolerance, `1e-10 · √p`.
pub fn default_tol(p: usize) -> f64 {
    1e-10 * (p as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct Objective<'a> {
    spec: ModelSpec,
    x: MatRef<'a, f64>,
    y: &'a [f64],
    active: Vec<bool>,
    n_active: usize,
}

impl<'a> Objective<'a> {
    /// Full-data objective over every row of `x`.
    pub fn new(spec: ModelSpec, x: MatRef<'a, f64>, y: &'a [f64]) -> Result<Self> {
        spec.reg.validate()?;
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::domain("objective needs at least one row and one column"));
        }
        for &yi in y {
            spec.loss.check_response(yi)?;
        }
        Ok(Objective {
            spec,
            x,
            y,
            active: vec![true; y.len()],
            n_active: y.len(),
        })
    }

    /// The leave-M-out objective `L_{\M}`.
    pub fn without(&self, req: &RemovalRequest) -> Result<Self> {
        req.validate(self.n())?;
        let mut active = self.active.clone();
        for &i in req.indices() {
            if !active[i] {
                return Err(Error::InvalidRemoval(format!("row {i} is already removed")));
            }
            active[i] = false;
        }
        let n_active = self.n_active - req.m();
        if n_active == 0 {
            return Err(Error::InvalidRemoval("no rows left after removal".into()));
        }
        Ok(Objective {
            active,
            n_active,
            ..self.clone()
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn x(&self) -> MatRef<'a, f64> {
        self.x
    }

    pub fn y(&self) -> &'a [f64] {
        self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_active(&self) -> usize {
        self.n_active
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    fn check_dim(&self, beta: &Col<f64>) -> Result<()> {
        if beta.nrows() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: beta.nrows(),
            });
        }
        Ok(())
    }

    /// Linear predictors `Xβ` for every row, active or not.
    pub fn margins(&self, beta: &Col<f64>) -> Result<Col<f64>> {
        self.check_dim(beta)?;
        Ok(self.x * beta)
    }

    /// Objective value `Σ_{i active} ℓ(y_i | x_iᵀβ) + λ r(β)`.
    pub fn value(&self, beta: &Col<f64>) -> Result<f64> {
        let z = self.margins(beta)?;
        let loss = self.spec.loss;
        let data: f64 = (0..self.n())
            .filter(|&i| self.active[i])
            .map(|i| loss.value_unchecked(self.y[i], z[i]))
            .sum();
        let value = data + self.spec.reg.lambda * self.spec.reg.value(beta);
        if !value.is_finite() {
            return Err(Error::domain("objective is not finite"));
        }
        Ok(value)
    }

    /// `Σ_{i active} ℓ̇_i(β) x_i + λ∇r(β)`.
    pub fn gradient(&self, beta: &Col<f64>) -> Result<Col<f64>> {
        let z = self.margins(beta)?;
        let loss = self.spec.loss;
        let w = Col::from_fn(self.n(), |i| {
            if self.active[i] {
                loss.d1_unchecked(self.y[i], z[i])
            } else {
                0.0
            }
        });
        let mut g: Col<f64> = self.x.transpose() * &w;
        let lambda = self.spec.reg.lambda;
        for k in 0..self.p() {
            g[k] += lambda * 2.0 * beta[k];
        }
        Ok(g)
    }

    /// Accumulates `alpha · G(β)` into the lower triangle of `dst`.
    ///
    /// Only active rows enter the Gram product.
    pub(crate) fn accumulate_hessian_lower(
        &self,
        beta: &Col<f64>,
        alpha: f64,
        dst: &mut Mat<f64>,
        accum: Accum,
    ) -> Result<()> {
        let z = self.margins(beta)?;
        let p = self.p();
        let loss = self.spec.loss;
        let rows: Vec<usize> = (0..self.n()).filter(|&i| self.active[i]).collect();
        let mut scaled = Mat::<f64>::zeros(rows.len(), p);
        let root_w: Vec<f64> = rows
            .iter()
            .map(|&i| loss.d2_unchecked(self.y[i], z[i]).sqrt())
            .collect();
        for k in 0..p {
            let src = self.x.col(k);
            let out = scaled.col_mut(k);
            for (r, (&i, &w)) in out.iter_mut().zip(rows.iter().zip(&root_w)) {
                *r = w * src[i];
            }
        }
        triangular::matmul(
            dst.as_mut(),
            BlockStructure::TriangularLower,
            accum,
            scaled.transpose(),
            BlockStructure::Rectangular,
            scaled.as_ref(),
            BlockStructure::Rectangular,
            alpha,
            Par::Seq,
        );
        let diag = alpha * self.spec.reg.lambda * self.spec.reg.hessian_diag_value();
        for k in 0..p {
            dst[(k, k)] += diag;
        }
        Ok(())
    }

    /// `X_activeᵀ diag(ℓ̈_i(β)) X_active + λ∇²r(β)`, both triangles filled.
    pub fn hessian(&self, beta: &Col<f64>) -> Result<Mat<f64>> {
        let p = self.p();
        let mut h = Mat::<f64>::zeros(p, p);
        self.accumulate_hessian_lower(beta, 1.0, &mut h, Accum::Replace)?;
        symmetrize_from_lower(&mut h);
        Ok(h)
    }

    /// Solves `G(β) d = rhs`.
    pub fn hessian_solve(&self, beta: &Col<f64>, rhs: &Col<f64>) -> Result<Col<f64>> {
        let p = self.p();
        let mut h = Mat::<f64>::zeros(p, p);
        self.accumulate_hessian_lower(beta, 1.0, &mut h, Accum::Replace)?;
        spd_solve_lower(h, rhs)
    }

    /// Smallest eigenvalue of `G(β)`.
    pub fn hessian_min_eigenvalue(&self, beta: &Col<f64>) -> Result<f64> {
        let h = self.hessian(beta)?;
        let eig = h
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| Error::Factorization)?;
        Ok(eig.into_iter().fold(f64::INFINITY, f64::min))
    }
}

pub(crate) fn symmetrize_from_lower(h: &mut Mat<f64>) {
    let p = h.nrows();
    for j in 0..p {
        for i in 0..j {
            h[(i, j)] = h[(j, i)];
        }
    }
}

/// Cholesky solve using the lower triangle of `h`. On failure, adds
/// `1e-12 · tr(h) / p` to the diagonal and retries once.
pub fn spd_solve_lower(mut h: Mat<f64>, rhs: &Col<f64>) -> Result<Col<f64>> {
    match h.llt(Side::Lower) {
        Ok(llt) => Ok(llt.solve(rhs)),
        Err(_) => {
            let p = h.nrows();
            let trace: f64 = (0..p).map(|k| h[(k, k)]).sum();
            let jitter = 1e-12 * trace / p as f64;
            for k in 0..p {
                h[(k, k)] += jitter;
            }
            let llt = h.llt(Side::Lower).map_err(|_| Error::Factorization)?;
            Ok(llt.solve(rhs))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta: Col<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
}

/// Damped Newton with Armijo backtracking.
///
/// Stops when `‖∇L(β)‖ ≤ tol_abs` or after `max_iter` Newton steps;
/// non-convergence is reported through [`FitResult::converged`].
pub fn fit(obj: &Objective<'_>, init: &Col<f64>, tol_abs: f64, max_iter: usize) -> Result<FitResult> {
    if !(tol_abs > 0.0) {
        return Err(Error::domain(format!("tol_abs must be positive, got {tol_abs}")));
    }
    obj.check_dim(init)?;
    let mut beta = init.clone();
    let mut value = obj.value(&beta)?;
    let mut trace = vec![value];
    let mut iterations = 0;
    loop {
        let grad = obj.gradient(&beta)?;
        let grad_norm = grad.norm_l2();
        if grad_norm <= tol_abs || iterations == max_iter {
            return Ok(FitResult {
                beta,
                grad_norm,
                iterations,
                converged: grad_norm <= tol_abs,
                objective_trace: trace,
            });
        }
        let dir = -obj.hessian_solve(&beta, &grad)?;
        let slope = grad.transpose() * &dir;
        // Objective differences below this are roundoff.
        let slack = 64.0 * f64::EPSILON * (value.abs() + 1.0);
        let mut step = 1.0;
        let accepted = loop {
            let candidate = &beta + step * &dir;
            let cand_value = obj.value(&candidate)?;
            if cand_value <= value + ARMIJO * step * slope + slack {
                break Some((candidate, cand_value));
            }
            step *= SHRINK;
            if step < MIN_STEP {
                break None;
            }
        };
        iterations += 1;
        match accepted {
            Some((candidate, cand_value)) => {
                beta = candidate;
                value = cand_value.min(value);
                trace.push(cand_value);
            }
            None => {
                return Ok(FitResult {
                    beta,
                    grad_norm,
                    iterations,
                    converged: false,
                    objective_trace: trace,
                })
            }
        }
    }
}

/// [`fit`] followed by full Newton steps until the gradient norm stops
/// halving, so the result is accurate to roundoff rather than to `tol_abs`.
///
/// Use this for reference solutions that other Newton iterates are measured
/// against; a warm start at the same point would otherwise reproduce those
/// iterates exactly.
pub fn fit_polished(obj: &Objective<'_>, init: &Col<f64>, tol_abs: f64, max_iter: usize) -> Result<FitResult> {
    let mut res = fit(obj, init, tol_abs, max_iter)?;
    if !res.converged {
        return Ok(res);
    }
    for _ in 0..POLISH_STEPS {
        if res.grad_norm == 0.0 {
            break;
        }
        let grad = obj.gradient(&res.beta)?;
        let next = &res.beta - obj.hessian_solve(&res.beta, &grad)?;
        let next_norm = obj.gradient(&next)?.norm_l2();
        if next_norm >= res.grad_norm {
            break;
        }
        let halved = next_norm <= 0.5 * res.grad_norm;
        res.beta = next;
        res.grad_norm = next_norm;
        res.iterations += 1;
        res.objective_trace.push(obj.value(&res.beta)?);
        if !halved {
            break;
        }
    }
    Ok(res)
}

/// [`fit`] from the zero vector with the default tolerance.
pub fn fit_default(obj: &Objective<'_>) -> Result<FitResult> {
    fit(obj, &Col::zeros(obj.p()), default_tol(obj.p()), DEFAULT_MAX_ITER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{loss_value, LossFamily};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_problem(n: usize, p: usize, logistic: bool, seed: u64) -> (Mat<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Mat::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt());
        let y = (0..n)
            .map(|_| {
                if logistic {
                    f64::from(rng.random_bool(0.5))
                } else {
                    rng.sample(StandardNormal)
                }
            })
            .collect();
        (x, y)
    }

    fn col(v: &[f64]) -> Col<f64> {
        Col::from_fn(v.len(), |i| v[i])
    }

    fn dense_solve(a: &Mat<f64>, b: &Col<f64>) -> Col<f64> {
        // Gaussian elimination with partial pivoting, independent of faer's Cholesky.
        let n = a.nrows();
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| a[(i, j)]).chain([b[i]]).collect())
            .collect();
        for c in 0..n {
            let piv = (c..n)
                .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
                .unwrap();
            m.swap(c, piv);
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
            x[r] = (m[r][n] - s) / m[r][r];
        }
        col(&x)
    }

    fn naive_xtx(x: &Mat<f64>, rows: &[usize], w: &[f64]) -> Mat<f64> {
        let p = x.ncols();
        Mat::from_fn(p, p, |a, b| {
            rows.iter()
                .zip(w)
                .map(|(&i, &wi)| wi * x[(i, a)] * x[(i, b)])
                .sum()
        })
    }

    #[test]
    fn objective_value_special_cases() {
        let spec = ModelSpec::squared_ridge(0.7).unwrap();
        let x = Mat::<f64>::zeros(5, 3);
        let y = vec![0.0; 5];
        let obj = Objective::new(spec, x.as_ref(), &y).unwrap();
        let beta = col(&[1.0, -2.0, 0.5]);
        assert!((obj.value(&beta).unwrap() - 0.7 * 5.25).abs() < 1e-14);

        let (x, y) = random_problem(8, 3, true, 1);
        let spec = ModelSpec::logistic_ridge(1.0).unwrap();
        let obj = Objective::new(spec, x.as_ref(), &y).unwrap();
        let v = obj.value(&Col::zeros(3)).unwrap();
        assert!((v - 8.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn removal_subtracts_removed_losses() {
        let (x, y) = random_problem(12, 4, true, 2);
        let spec = ModelSpec::logistic_ridge(0.5).unwrap();
        let obj = Objective::new(spec, x.as_ref(), &y).unwrap();
        let beta = col(&[0.3, -1.0, 2.0, 0.1]);
        let req = RemovalRequest::new(vec![1, 7, 9]);
        let sub = obj.without(&req).unwrap();
        assert_eq!(sub.n_active(), 9);
        let z = obj.margins(&beta).unwrap();
        let removed: f64 = req
            .indices()
            .iter()
            .map(|&i| loss_value(LossFamily::Logistic, y[i], z[i]).unwrap())
            .sum();
        let diff = obj.value(&beta).unwrap() - sub.value(&beta).unwrap();
        assert!((diff - removed).abs() < 1e-12);
    }

    #[test]
    fn dimension_and_domain_errors() {
        let (x, y) = random_problem(6, 2, true, 3);
        let spec = ModelSpec::logistic_ridge(1.0).unwrap();
        let obj = Objective::new(spec, x.as_ref(), &y).unwrap();
        assert!(matches!(
            obj.value(&Col::zeros(3)),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
        assert!(obj.gradient(&Col::zeros(1)).is_err());
        assert!(obj.hessian(&Col::zeros(5)).is_err());
        let bad_y = vec![0.0, 1.0, 0.5, 0.0, 1.0, 0.0];
        assert!(Objective::new(spec, x.as_ref(), &bad_y).is_err());
        assert!(Objective::new(spec, x.as_ref(), &y[..5]).is_err());
        assert!(fit(&obj, &Col::zeros(2), 0.0, 10).is_err());
        let all = RemovalRequest::new((0..6).collect());
        assert!(obj.without(&all).is_err());
    }

    #[test]
    fn squared_gradient_and_hessian_closed_form() {
        let (x, y) = random_problem(15, 5, false, 4);
        let lambda = 0.3;
        let spec = ModelSpec::squared_ridge(lambda).unwrap();
        let full = Objective::new(spec, x.as_ref(), &y).unwrap();
        let obj = full.without(&RemovalRequest::new(vec![0, 4])).unwrap();
        let rows: Vec<usize> = (0..15).filter(|i| ![0, 4].contains(i)).collect();
        let beta = col(&[0.5, -0.2, 1.0, 0.0, 0.3]);
        let ones = vec![1.0; rows.len()];
        let mut xtx = naive_xtx(&x, &rows, &ones);
        let g = obj.gradient(&beta).unwrap();
        for a in 0..5 {
            let xtx_beta: f64 = (0..5).map(|b| xtx[(a, b)] * beta[b]).sum();
            let xty: f64 = rows.iter().map(|&i| x[(i, a)] * y[i]).sum();
            let want = xtx_beta - xty + 2.0 * lambda * beta[a];
            assert!((g[a] - want).abs() < 1e-12, "{} vs {}", g[a], want);
        }
        for k in 0..5 {
            xtx[(k, k)] += 2.0 * lambda;
        }
        let h = obj.hessian(&beta).unwrap();
        let h0 = obj.hessian(&Col::zeros(5)).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                assert!((h[(a, b)] - xtx[(a, b)]).abs() < 1e-12);
                assert_eq!(h[(a, b)], h0[(a, b)]);
            }
        }
    }

    #[test]
    fn logistic_hessian_at_zero_margin() {
        let (x, y) = random_problem(10, 4, true, 5);
        let spec = ModelSpec::logistic_ridge(2.0).unwrap();
        let obj = Objective::new(spec, x.as_ref(), &y).unwrap();
        let rows: Vec<usize> = (0..10).collect();
        let mut want = naive_xtx(&x, &rows, &[0.25; 10]);
        for k in 0..4 {
            want[(k, k)] += 4.0;
        }
        let h = obj.hessian(&Col::zeros(4)).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert!((h[(a, b)] - want[(a, b)]).abs() < 1e-12);
            }
        }
        assert!(obj.hessian_min_eigenvalue(&Col::zeros(4)).unwrap() >= 4.0 - 1e-12);
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        for (seed, logistic) in [(6, true), (7, false), (8, true)] {
            let (x, y) = random_problem(20, 6, logistic, seed);
            let spec = if logistic {
                ModelSpec::logistic_ridge(0.4).unwrap()
            } else {
                ModelSpec::squared_ridge(0.4).unwrap()
            };
            let obj = Objective::new(spec, x.as_ref(), &y)
                .unwrap()
                .without(&RemovalRequest::new(vec![3]))
                .unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let beta = Col::from_fn(6, |_| rng.sample::<f64, _>(StandardNormal));
            let g = obj.gradient(&beta).unwrap();
            let h = obj.hessian(&beta).unwrap();
            let step = 1e-5;
            for k in 0..6 {
                let mut e = Col::zeros(6);
                e[k] = step;
                let fd = (obj.value(&(&beta + &e)).unwrap() - obj.value(&(&beta - &e)).unwrap())
                    / (2.0 * step);
                assert!((fd - g[k]).abs() < 1e-6 * g[k].abs().max(1.0));
                let gd = (obj.gradient(&(&beta + &e)).unwrap() - obj.gradient(&(&beta - &e)).unwrap())
                    / (2.0 * step);
                for a in 0..6 {
                    assert!((gd[a] - h[(a, k)]).abs() < 1e-6 * h[(a, k)].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn squared_fit_matches_direct_solve() {
        let (x, y) = random_problem(40, 10, false, 9);
        let lambda = 1.0;
        let spec = ModelSpec::squared_ridge(lambda).unwrap();
        let obj = Objective::new(spec, x.as_ref(), &y).unwrap();
        let res = fit_default(&obj).unwrap();
        assert!(res.converged);
        let rows: Vec<usize> = (0..40).collect();
        let mut a = naive_xtx(&x, &rows, &[1.0; 40]);
        for k in 0..10 {
            a[(k, k)] += 2.0 * lambda;
        }
        let b = Col::from_fn(10, |k| rows.iter().map(|&i| x[(i, k)] * y[i]).sum());
        let want = dense_solve(&a, &b);
        assert!((&res.beta - &want).norm_l2() <= 1e-10 * want.norm_l2());
    }

    #[test]
    fn zero_response_gives_zero_fit() {
        let (x, _) = random_problem(10, 3, false, 10);
        let y = vec![0.0; 10];
        let obj = Objective::new(ModelSpec::squared_ridge(1.0).unwrap(), x.as_ref(), &y).unwrap();
        let res = fit_default(&obj).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
        assert!(res.beta.norm_l2() == 0.0);
    }

    #[test]
    fn small_logistic_fit_matches_gradient_descent() {
        let (x, y) = random_problem(6, 2, true, 11);
        let spec = ModelSpec::logistic_ridge(1.0).unwrap();
        let obj = Objective::new(spec, x.as_ref(), &y).unwrap();
        let res = fit_default(&obj).unwrap();
        assert!(res.converged);
        // Plain gradient descent, written against the raw loss formulas.
        let mut b = [0.0f64; 2];
        for _ in 0..1_000_000 {
            let mut g = [2.0 * b[0], 2.0 * b[1]];
            for i in 0..6 {
                let z = x[(i, 0)] * b[0] + x[(i, 1)] * b[1];
                let r = 1.0 / (1.0 + (-z).exp()) - y[i];
                g[0] += r * x[(i, 0)];
                g[1] += r * x[(i, 1)];
            }
            b[0] -= 1e-3 * g[0];
            b[1] -= 1e-3 * g[1];
        }
        assert!((res.beta[0] - b[0]).abs() <= 1e-6);
        assert!((res.beta[1] - b[1]).abs() <= 1e-6);
    }

    #[test]
    fn fit_properties_on_logistic() {
        let (x, y) = random_problem(60, 30, true, 12);
        let spec = ModelSpec::logistic_ridge(0.5).unwrap();
        let obj = Objective::new(spec, x.as_ref(), &y).unwrap();
        let tol = default_tol(30);
        let a = fit_default(&obj).unwrap();
        assert!(a.converged && a.grad_norm <= tol);
        assert!(obj.gradient(&a.beta).unwrap().norm_l2() <= tol);
        for w in a.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let init = Col::from_fn(30, |_| 3.0 * rng.sample::<f64, _>(StandardNormal));
        let b = fit(&obj, &init, tol, DEFAULT_MAX_ITER).unwrap();
        assert!(b.converged);
        assert!((&a.beta - &b.beta).norm_l2() <= 10.0 * tol / spec.lambda_nu());
        let same = obj.without(&RemovalRequest::new(vec![])).unwrap();
        let c = fit_default(&same).unwrap();
        assert_eq!(a.beta, c.beta);
    }

    #[test]
    fn max_iter_reports_nonconvergence() {
        let (x, y) = random_problem(30, 5, true, 13);
        let obj = Objective::new(ModelSpec::logistic_ridge(1.0).unwrap(), x.as_ref(), &y).unwrap();
        let res = fit(&obj, &Col::from_fn(5, |_| 10.0), 1e-300, 2).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 2);
    }

    #[test]
    fn jitter_retry_recovers_semidefinite_roundoff() {
        // Singular in exact arithmetic; the jitter makes it definite.
        let mut h = Mat::<f64>::identity(2, 2);
        h[(1, 0)] = 1.0;
        h[(1, 1)] = 1.0;
        let rhs = col(&[1.0, 1.0]);
        let sol = spd_solve_lower(h, &rhs).unwrap();
        assert!(sol.iter().all(|v| v.is_finite()));
        let mut bad = Mat::<f64>::identity(2, 2);
        bad[(1, 1)] = -1.0;
        assert!(matches!(spd_solve_lower(bad, &rhs), Err(Error::Factorization)));
    }
}
