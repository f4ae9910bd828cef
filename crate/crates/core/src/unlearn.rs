//! Newton-step removal of a forget set.
//!
//! Starting from the full-data optimum `β̂`, a few Newton iterations on the
//! leave-M-out objective approximate the retrained model `β̂_{\M}`. The
//! perturbed estimator adds one isotropic Laplace draw to the last iterate.

use std::collections::BTreeSet;

use faer::{Accum, Col, Mat};
use rand::Rng;

use crate::error::{Error, Result};
use crate::noise::{sample_isotropic_laplace, NoiseSpec};
use crate::quadrature::gauss_legendre_unit;
use crate::solver::{spd_solve_lower, Objective};

/// Rows to forget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemovalRequest {
    indices: Vec<usize>,
}

impl RemovalRequest {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        RemovalRequest { indices }
    }

    pub fn empty() -> Self {
        RemovalRequest { indices: vec![] }
    }

    /// Sorted row indices.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn m(&self) -> usize {
        self.indices.len()
    }

    /// Indices must be distinct, in range, and leave at least one row.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidRemoval("duplicate index".into()));
        }
        if let Some(&last) = self.indices.last() {
            if last >= n {
                return Err(Error::InvalidRemoval(format!(
                    "index {last} out of range for n = {n}"
                )));
            }
        }
        if self.m() + 1 > n {
            return Err(Error::InvalidRemoval(format!(
                "cannot remove {} of {n} rows",
                self.m()
            )));
        }
        Ok(())
    }

    /// `m` distinct rows drawn uniformly without replacement.
    pub fn random<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Self> {
        if m + 1 > n {
            return Err(Error::InvalidRemoval(format!("cannot remove {m} of {n} rows")));
        }
        Ok(Self::new(rand::seq::index::sample(rng, n, m).into_vec()))
    }
}

impl FromIterator<usize> for RemovalRequest {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect::<BTreeSet<_>>().into_iter().collect())
    }
}

#[derive(Debug, Clone)]
pub struct UnlearnResult {
    /// `β̃^{(0)} = β̂, β̃^{(1)}, …, β̃^{(T)}`.
    pub iterates: Vec<Col<f64>>,
    pub noise: Col<f64>,
    /// `β̃^{(T)} + b`.
    pub perturbed: Col<f64>,
    pub scale_used: f64,
}

impl UnlearnResult {
    pub fn last_iterate(&self) -> &Col<f64> {
        self.iterates.last().expect("iterates always holds β̂")
    }

    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }
}

/// One Newton step `β − G_{\M}(β)⁻¹ ∇L_{\M}(β)` on the objective passed in.
///
/// The Hessian is assembled and factorized at `beta`; nothing is reused
/// from earlier steps.
pub fn newton_step(obj_without: &Objective<'_>, beta: &Col<f64>) -> Result<Col<f64>> {
    let grad = obj_without.gradient(beta)?;
    let delta = obj_without.hessian_solve(beta, &grad)?;
    Ok(beta - &delta)
}

/// `steps` Newton iterates on `obj_without` from `start`, including `start`.
pub fn newton_path(obj_without: &Objective<'_>, start: &Col<f64>, steps: usize) -> Result<Vec<Col<f64>>> {
    let mut path = Vec::with_capacity(steps + 1);
    path.push(start.clone());
    for _ in 0..steps {
        let next = newton_step(obj_without, path.last().unwrap())?;
        path.push(next);
    }
    Ok(path)
}

/// The perturbed `T`-step Newton estimator for removing `req` from the model
/// fitted on `obj`.
///
/// `noise_scale = 0` disables the perturbation.
pub fn unlearn<R: Rng + ?Sized>(
    obj: &Objective<'_>,
    beta_hat: &Col<f64>,
    req: &RemovalRequest,
    steps: usize,
    noise_scale: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<UnlearnResult> {
    let spec = NoiseSpec::new(beta_hat.nrows(), noise_scale, epsilon)?;
    let without = obj.without(req)?;
    let iterates = newton_path(&without, beta_hat, steps)?;
    let noise = sample_isotropic_laplace(&spec, rng)?;
    let perturbed = iterates.last().unwrap() + &noise;
    Ok(UnlearnResult {
        iterates,
        noise,
        perturbed,
        scale_used: noise_scale,
    })
}

/// `Ḡ_{\M} = ∫₀¹ G_{\M}(β̂ + s(β̂_{\M} − β̂)) ds` by Gauss–Legendre quadrature,
/// lower triangle only.
fn segment_hessian_lower(
    without: &Objective<'_>,
    from: &Col<f64>,
    to: &Col<f64>,
    points: usize,
) -> Result<Mat<f64>> {
    let p = from.nrows();
    let (nodes, weights) = gauss_legendre_unit(points);
    let dir = to - from;
    let mut g = Mat::<f64>::zeros(p, p);
    for (q, (&s, &w)) in nodes.iter().zip(&weights).enumerate() {
        let beta = from + s * &dir;
        let accum = if q == 0 { Accum::Replace } else { Accum::Add };
        without.accumulate_hessian_lower(&beta, w, &mut g, accum)?;
    }
    Ok(g)
}

/// Residual of the exact leave-M-out identity
/// `β̂_{\M} − β̂ = Ḡ_{\M}⁻¹ Σ_{i∈M} ℓ̇_i(β̂) x_i`.
pub fn exact_loo_identity_residual(
    obj: &Objective<'_>,
    beta_hat: &Col<f64>,
    beta_hat_without: &Col<f64>,
    req: &RemovalRequest,
    quadrature_points: usize,
) -> Result<f64> {
    if quadrature_points == 0 {
        return Err(Error::domain("quadrature needs at least one point"));
    }
    let without = obj.without(req)?;
    let z = obj.margins(beta_hat)?;
    let loss = obj.spec().loss;
    let x = obj.x();
    let p = obj.p();
    let mut forced = Col::<f64>::zeros(p);
    for &i in req.indices() {
        let w = loss.d1_unchecked(obj.y()[i], z[i]);
        for k in 0..p {
            forced[k] += w * x[(i, k)];
        }
    }
    let g_bar = segment_hessian_lower(&without, beta_hat, beta_hat_without, quadrature_points)?;
    let predicted = spd_solve_lower(g_bar, &forced)?;
    let actual = beta_hat_without - beta_hat;
    Ok((&actual - &predicted).norm_l2())
}

/// Smallest integer step count strictly above `1 + log₂((α+1)/(1−3α))` with
/// `α = log(m+1)/log(n)`.
///
/// Fails when `α ≥ 1/3`: the rule only applies while `m = o(n^{1/3})`.
pub fn recommended_steps(m: usize, n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::domain(format!("step rule needs n >= 2, got {n}")));
    }
    let alpha = ((m + 1) as f64).ln() / (n as f64).ln();
    // The boundary m + 1 = n^{1/3} lands within roundoff of 1/3.
    if alpha >= 1.0 / 3.0 - 1e-12 {
        return Err(Error::domain(format!(
            "alpha = log(m+1)/log(n) = {alpha:.4} >= 1/3: the step rule requires m = o(n^(1/3)) \
             (m = {m}, n = {n})"
        )));
    }
    let threshold = 1.0 + ((alpha + 1.0) / (1.0 - 3.0 * alpha)).log2();
    Ok(threshold.floor() as usize + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::ModelSpec;
    use crate::solver::{default_tol, fit, fit_default, DEFAULT_MAX_ITER};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn problem(n: usize, p: usize, logistic: bool, seed: u64) -> (Mat<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let beta: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let x = Mat::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt());
        let y = (0..n)
            .map(|i| {
                let z: f64 = (0..p).map(|k| x[(i, k)] * beta[k]).sum();
                if logistic {
                    f64::from(rng.random_bool(crate::glm::sigmoid(z)))
                } else {
                    z + rng.sample::<f64, _>(StandardNormal)
                }
            })
            .collect();
        (x, y)
    }

    #[test]
    fn removal_request_validation() {
        assert!(RemovalRequest::new(vec![1, 1]).validate(5).is_err());
        assert!(RemovalRequest::new(vec![5]).validate(5).is_err());
        assert!(RemovalRequest::new(vec![0, 1, 2, 3, 4]).validate(5).is_err());
        assert!(RemovalRequest::new(vec![0, 1, 2, 3]).validate(5).is_ok());
        assert!(RemovalRequest::empty().validate(1).is_ok());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = RemovalRequest::random(10, 4, &mut rng).unwrap();
        assert_eq!(r.m(), 4);
        assert!(r.validate(10).is_ok());
        assert!(RemovalRequest::random(4, 4, &mut rng).is_err());
        let r: RemovalRequest = [3, 1, 3].into_iter().collect();
        assert_eq!(r.indices(), &[1, 3]);
    }

    #[test]
    fn step_rule() {
        assert_eq!(recommended_steps(1, 1000).unwrap(), 2);
        assert_eq!(recommended_steps(0, 1000).unwrap(), 2);
        // α = log 10 / log 1000 = 1/3 exactly on the boundary.
        assert!(recommended_steps(9, 1000).is_err());
        assert!(recommended_steps(50, 1000).is_err());
        assert!(recommended_steps(1, 1).is_err());
        // α = log 3 / log 1000 ≈ 0.159: T ≈ 2.15 → 3.
        assert_eq!(recommended_steps(2, 1000).unwrap(), 3);
    }

    #[test]
    fn one_step_is_exact_for_squared_ridge() {
        let (x, y) = problem(60, 20, false, 1);
        let spec = ModelSpec::squared_ridge(1.0).unwrap();
        let obj = Objective::new(spec, x.as_ref(), &y).unwrap();
        let beta_hat = fit_default(&obj).unwrap().beta;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in 1..=15 {
            let req = RemovalRequest::random(60, m, &mut rng).unwrap();
            let without = obj.without(&req).unwrap();
            let exact = fit_default(&without).unwrap().beta;
            let step = newton_step(&without, &beta_hat).unwrap();
            assert!((&step - &exact).norm_l2() <= 1e-8 * exact.norm_l2(), "m={m}");
            let res = unlearn(&obj, &beta_hat, &req, 2, 0.0, 1.0, &mut rng).unwrap();
            assert!((&res.iterates[2] - &res.iterates[1]).norm_l2() <= 1e-10 * exact.norm_l2());
        }
    }

    #[test]
    fn empty_removal_is_a_fixed_point() {
        let (x, y) = problem(50, 10, true, 3);
        let spec = ModelSpec::logistic_ridge(1.0).unwrap();
        let obj = Objective::new(spec, x.as_ref(), &y).unwrap();
        let beta_hat = fit_default(&obj).unwrap().beta;
        let without = obj.without(&RemovalRequest::empty()).unwrap();
        let step = newton_step(&without, &beta_hat).unwrap();
        assert!((&step - &beta_hat).norm_l2() <= default_tol(10) / spec.lambda_nu());
    }

    #[test]
    fn identity_pipeline_and_perturbation() {
        let (x, y) = problem(30, 5, true, 4);
        let obj = Objective::new(ModelSpec::logistic_ridge(1.0).unwrap(), x.as_ref(), &y).unwrap();
        let beta_hat = fit_default(&obj).unwrap().beta;
        let req = RemovalRequest::new(vec![2]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let res = unlearn(&obj, &beta_hat, &req, 0, 0.0, 1.0, &mut rng).unwrap();
        assert_eq!(res.perturbed, beta_hat);
        assert_eq!(res.iterates[0], beta_hat);
        let res = unlearn(&obj, &beta_hat, &req, 2, 0.3, 1.0, &mut rng).unwrap();
        assert_eq!(res.steps(), 2);
        assert_eq!(res.iterates[0], beta_hat);
        assert_eq!(res.perturbed, res.last_iterate() + &res.noise);
        assert!(res.noise.norm_l2() > 0.0);
        assert!(unlearn(&obj, &beta_hat, &req, 1, -1.0, 1.0, &mut rng).is_err());
        assert!(unlearn(&obj, &beta_hat, &req, 1, 1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn noise_does_not_depend_on_data() {
        let (x, y) = problem(30, 5, true, 6);
        let (x2, y2) = problem(30, 5, true, 7);
        let spec = ModelSpec::logistic_ridge(1.0).unwrap();
        let a = Objective::new(spec, x.as_ref(), &y).unwrap();
        let b = Objective::new(spec, x2.as_ref(), &y2).unwrap();
        let req = RemovalRequest::new(vec![0]);
        let ra = unlearn(&a, &Col::zeros(5), &req, 1, 0.5, 1.0, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let rb = unlearn(&b, &Col::zeros(5), &req, 2, 0.5, 1.0, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(ra.noise, rb.noise);
    }

    #[test]
    fn newton_error_contracts_on_logistic() {
        let (x, y) = problem(120, 60, true, 9);
        let spec = ModelSpec::logistic_ridge(1.0).unwrap();
        let obj = Objective::new(spec, x.as_ref(), &y).unwrap();
        let beta_hat = fit_default(&obj).unwrap().beta;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for m in [1, 3, 8] {
            let req = RemovalRequest::random(120, m, &mut rng).unwrap();
            let without = obj.without(&req).unwrap();
            let exact = fit(&without, &beta_hat, 1e-13, DEFAULT_MAX_ITER).unwrap().beta;
            let path = newton_path(&without, &beta_hat, 4).unwrap();
            let errs: Vec<f64> = path.iter().map(|b| (b - &exact).norm_l2()).collect();
            assert!(errs[1] < errs[0], "m={m}: {errs:?}");
            for w in errs.windows(2) {
                assert!(w[1] <= w[0] + 1e-14, "m={m}: {errs:?}");
            }
        }
    }

    #[test]
    fn loo_identity_on_squared_and_empty_removal() {
        let (x, y) = problem(40, 15, false, 11);
        let obj = Objective::new(ModelSpec::squared_ridge(1.0).unwrap(), x.as_ref(), &y).unwrap();
        let beta_hat = fit_default(&obj).unwrap().beta;
        let req = RemovalRequest::new(vec![3, 17]);
        let exact = fit_default(&obj.without(&req).unwrap()).unwrap().beta;
        for q in [1, 2, 7] {
            let r = exact_loo_identity_residual(&obj, &beta_hat, &exact, &req, q).unwrap();
            assert!(r <= 1e-9 * beta_hat.norm_l2(), "q={q}: {r}");
        }
        let r = exact_loo_identity_residual(&obj, &beta_hat, &beta_hat, &RemovalRequest::empty(), 4).unwrap();
        assert_eq!(r, 0.0);
        assert!(exact_loo_identity_residual(&obj, &beta_hat, &exact, &req, 0).is_err());
    }

    #[test]
    fn loo_identity_on_small_logistic() {
        let (x, y) = problem(80, 40, true, 12);
        let obj = Objective::new(ModelSpec::logistic_ridge(1.0).unwrap(), x.as_ref(), &y).unwrap();
        let beta_hat = fit(&obj, &Col::zeros(40), 1e-13, DEFAULT_MAX_ITER).unwrap().beta;
        let req = RemovalRequest::new(vec![5]);
        let exact = fit(&obj.without(&req).unwrap(), &beta_hat, 1e-13, DEFAULT_MAX_ITER).unwrap().beta;
        let gap = (&exact - &beta_hat).norm_l2();
        let r64 = exact_loo_identity_residual(&obj, &beta_hat, &exact, &req, 64).unwrap();
        assert!(r64 <= 1e-6 * gap, "{r64} vs gap {gap}");
        // A single midpoint node is visibly less accurate.
        let r1 = exact_loo_identity_residual(&obj, &beta_hat, &exact, &req, 1).unwrap();
        assert!(r1 > r64);
    }
}
