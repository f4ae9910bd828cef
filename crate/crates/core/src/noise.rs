//! Isotropic Laplace perturbation and its scale.
//!
//! The perturbation has density `∝ exp(−(ε/r)‖b‖)`. Its norm is
//! `Gamma(p, rate ε/r)` and its direction is uniform on the sphere, which is
//! how it is sampled. The scale `r` comes either from the closed-form
//! logistic-ridge constant chain ([`theoretical_scale`]) or from a
//! Monte Carlo estimate of the worst-case Newton error ([`calibrate`]).

use std::collections::HashSet;
use std::f64::consts::PI;

use faer::Col;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::ModelSpec;
use crate::solver::{default_tol, fit_default, fit_polished, Objective, DEFAULT_MAX_ITER};
use crate::unlearn::{newton_path, RemovalRequest};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub p: usize,
    pub scale: f64,
    pub epsilon: f64,
}

impl NoiseSpec {
    pub fn new(p: usize, scale: f64, epsilon: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::domain("noise dimension must be at least 1"));
        }
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::domain(format!("noise scale must be nonnegative, got {scale}")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::domain(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(NoiseSpec { p, scale, epsilon })
    }

    /// Rate `C = ε / r` of the norm law.
    pub fn rate(&self) -> f64 {
        self.epsilon / self.scale
    }

    /// `E‖b‖ = p r / ε`.
    pub fn mean_norm(&self) -> f64 {
        self.p as f64 * self.scale / self.epsilon
    }
}

/// Uniform direction on the unit sphere in dimension `p`.
pub fn sample_unit_sphere<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Col<f64> {
    loop {
        let g = Col::from_fn(p, |_| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm_l2();
        if norm > 0.0 {
            return g / norm;
        }
    }
}

/// One draw `b = R·u` with `R ~ Gamma(p, rate ε/r)` and `u` uniform on the
/// sphere. A zero scale returns the zero vector and consumes no randomness.
pub fn sample_isotropic_laplace<R: Rng + ?Sized>(spec: &NoiseSpec, rng: &mut R) -> Result<Col<f64>> {
    if spec.p == 0 {
        return Err(Error::domain("noise dimension must be at least 1"));
    }
    if spec.scale == 0.0 {
        return Ok(Col::zeros(spec.p));
    }
    let norm_law = Gamma::new(spec.p as f64, spec.scale / spec.epsilon)
        .map_err(|e| Error::domain(format!("gamma law: {e}")))?;
    let radius = norm_law.sample(rng);
    Ok(radius * sample_unit_sphere(spec.p, rng))
}

/// `log p_b(b) = p log C + log Γ(p/2) − log 2 − (p/2) log π − log Γ(p) − C‖b‖`.
pub fn log_density(spec: &NoiseSpec, b: &Col<f64>) -> Result<f64> {
    if spec.scale <= 0.0 {
        return Err(Error::domain("log density is undefined for a zero scale"));
    }
    if b.nrows() != spec.p {
        return Err(Error::DimensionMismatch {
            expected: spec.p,
            got: b.nrows(),
        });
    }
    let p = spec.p as f64;
    let c = spec.rate();
    let log_norm = p * c.ln() + ln_gamma(p / 2.0) - 2f64.ln() - 0.5 * p * PI.ln() - ln_gamma(p);
    Ok(log_norm - c * b.norm_l2())
}

/// Inputs of the closed-form logistic-ridge scale.
///
/// The chain assumes `C_X = 1`, `s = 1`, `C_y = 1` and a ridge penalty with a
/// Lipschitz-constant-zero Hessian. `tail` is the constant `c` controlling
/// how fast the failure probability vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    pub lambda: f64,
    /// `n / p`.
    pub gamma0: f64,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub t: usize,
    pub nu: f64,
    pub tail: f64,
}

impl TheoryConstants {
    pub fn new(lambda: f64, n: usize, p: usize, m: usize, t: usize) -> Self {
        TheoryConstants {
            lambda,
            gamma0: n as f64 / p as f64,
            n,
            p,
            m,
            t,
            nu: 1.0,
            tail: 3.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [self.lambda, self.gamma0, self.nu, self.tail];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::domain("lambda, gamma0, nu and tail must be positive"));
        }
        if self.n < 2 || self.p == 0 || self.m == 0 || self.t == 0 {
            return Err(Error::domain("theoretical scale needs n >= 2 and p, m, t >= 1"));
        }
        Ok(())
    }
}

/// Every intermediate constant of the logistic-ridge chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantChain {
    pub polylog1: f64,
    pub c_l: f64,
    pub polylog5: f64,
    pub c_ll: f64,
    pub c_xx: f64,
    pub c2: f64,
    pub c1: f64,
    /// `C₂ m³ / (2λνn)`.
    pub ratio: f64,
}

pub fn constant_chain(tc: &TheoryConstants) -> Result<ConstantChain> {
    tc.validate()?;
    let lambda = tc.lambda;
    let log_n = (tc.n as f64).ln();
    let m = tc.m as f64;
    let p = tc.p as f64;
    let sqrt_g = tc.gamma0.sqrt();
    // 2√(2(1+c)γ₀ log n / λ); equals 4√(2γ₀ log n / λ) at c = 3.
    let polylog1 = 2.0 * (2.0 * (1.0 + tc.tail) * tc.gamma0 * log_n / lambda).sqrt();
    let c_l = polylog1 + 8.0 / lambda;
    let polylog5 = 4.0 * (sqrt_g + 3.0) / lambda * (m * (2.0 * m + tc.tail) / p * log_n).sqrt();
    let c_ll = 4.0 + 8.0 / lambda + polylog1 + polylog5;
    let c_xx = (sqrt_g + 3.0) / lambda * (m / p * (1.0 + 16.0 * log_n)).sqrt();
    let c2 = (sqrt_g + 4.0).powi(2) * c_ll;
    let c1 = 2.0 / (3f64.sqrt() * lambda * lambda) * c2 * c_l * c_l * c_xx;
    let ratio = c2 * m.powi(3) / (2.0 * lambda * tc.nu * tc.n as f64);
    Ok(ConstantChain {
        polylog1,
        c_l,
        polylog5,
        c_ll,
        c_xx,
        c2,
        c1,
        ratio,
    })
}

/// `log r_{t,n} = 2^{t−1} log C₁ + 2^{t−2} log(C₂ m³ / (2λνn))`.
pub fn log_theoretical_scale(tc: &TheoryConstants) -> Result<f64> {
    let chain = constant_chain(tc)?;
    let t = tc.t as i32;
    Ok(2f64.powi(t - 1) * chain.c1.ln() + 2f64.powi(t - 2) * chain.ratio.ln())
}

/// `r_{t,n} = C₁^{2^{t−1}} (C₂ m³ / (2λνn))^{2^{t−2}}`.
///
/// Overflows to `inf` for large `t` when `C₁ > 1`; use
/// [`log_theoretical_scale`] when that matters.
pub fn theoretical_scale(tc: &TheoryConstants) -> Result<f64> {
    Ok(log_theoretical_scale(tc)?.exp())
}

/// The one-step scale in its `C₁ m^{3/2} / √n` form.
///
/// This differs from [`theoretical_scale`] at `t = 1` by the factor
/// `√(C₂ / (2λν))`; both are exposed and neither is preferred here.
pub fn one_step_scale_lemma_form(tc: &TheoryConstants) -> Result<f64> {
    let chain = constant_chain(tc)?;
    Ok(chain.c1 * (tc.m as f64).powf(1.5) / (tc.n as f64).sqrt())
}

/// `log C(n, k)`; a direct product for small `min(k, n − k)`, log-Gamma otherwise.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    assert!(k <= n);
    let k_small = k.min(n - k);
    if k_small <= 64 {
        return (1..=k_small)
            .map(|i| ((n - k_small + i) as f64 / i as f64).ln())
            .sum();
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Result of a Monte Carlo scale calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub steps: Vec<usize>,
    /// Max over the sampled sets of `‖β̂_{\M} − β̃^{(T)}‖`, one per step count.
    pub raw_max: Vec<f64>,
    /// `√(log C(n, m) / log m0)`; exactly 1 when every set was enumerated.
    pub rescale: f64,
    /// `raw_max · rescale`.
    pub scales: Vec<f64>,
    pub subsets: usize,
}

impl Calibration {
    pub fn scale_for(&self, steps: usize) -> Option<f64> {
        self.steps.iter().position(|&t| t == steps).map(|i| self.scales[i])
    }
}

fn all_combinations(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..m).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..m).rev().find(|&i| cur[i] != i + n - m) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..m {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// `m0` distinct size-`m` subsets of `[n]`, uniformly at random.
pub fn sample_distinct_subsets<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    m0: usize,
    rng: &mut R,
) -> Result<Vec<RemovalRequest>> {
    if m + 1 > n {
        return Err(Error::InvalidRemoval(format!("cannot remove {m} of {n} rows")));
    }
    let log_total = ln_binomial(n, m);
    if log_total < (m0 as f64).ln() - 1e-9 {
        return Err(Error::InsufficientSubsets {
            available: log_total.exp().round(),
            requested: m0,
        });
    }
    // Enumerate when rejection sampling would mostly reject.
    if log_total <= (4.0 * m0 as f64).ln() && log_total < 20.0 {
        let all = all_combinations(n, m);
        let picked = rand::seq::index::sample(rng, all.len(), m0.min(all.len()));
        return Ok(picked.iter().map(|i| RemovalRequest::new(all[i].clone())).collect());
    }
    let mut seen = HashSet::with_capacity(m0);
    let mut out = Vec::with_capacity(m0);
    while out.len() < m0 {
        let req = RemovalRequest::random(n, m, rng)?;
        if seen.insert(req.indices().to_vec()) {
            out.push(req);
        }
    }
    Ok(out)
}

/// Worst observed Newton error over `m0` random forget sets of size `m`,
/// for each step count in `steps`, rescaled by `√(log C(n, m) / log m0)`.
///
/// Exact retrains are warm-started at `beta_hat`. The sets are drawn from
/// `rng` up front; the per-set work runs in parallel and is deterministic.
pub fn calibrate<R: Rng + ?Sized>(
    obj: &Objective<'_>,
    beta_hat: &Col<f64>,
    m: usize,
    steps: &[usize],
    m0: usize,
    rng: &mut R,
) -> Result<Calibration> {
    if m0 < 2 {
        return Err(Error::domain(format!("calibration needs m0 >= 2, got {m0}")));
    }
    let subsets = sample_distinct_subsets(obj.n(), m, m0, rng)?;
    let max_steps = steps.iter().copied().max().unwrap_or(0);
    let tol = default_tol(obj.p());
    let errors: Vec<Vec<f64>> = subsets
        .par_iter()
        .map(|req| {
            let without = obj.without(req)?;
            let path = newton_path(&without, beta_hat, max_steps)?;
            let exact = fit_polished(&without, beta_hat, tol, DEFAULT_MAX_ITER)?;
            if !exact.converged {
                return Err(Error::NonConvergence {
                    grad_norm: exact.grad_norm,
                    iterations: exact.iterations,
                });
            }
            Ok(steps.iter().map(|&t| (&path[t] - &exact.beta).norm_l2()).collect())
        })
        .collect::<Result<_>>()?;
    let raw_max: Vec<f64> = (0..steps.len())
        .map(|j| errors.iter().map(|e| e[j]).fold(0.0, f64::max))
        .collect();
    let rescale = (ln_binomial(obj.n(), m) / (m0 as f64).ln()).sqrt();
    let rescale = if (rescale - 1.0).abs() < 1e-12 { 1.0 } else { rescale };
    Ok(Calibration {
        steps: steps.to_vec(),
        scales: raw_max.iter().map(|r| r * rescale).collect(),
        raw_max,
        rescale,
        subsets: m0,
    })
}

/// Calibrated noise scale for `steps` Newton steps on `dataset`.
pub fn empirical_scale<R: Rng + ?Sized>(
    dataset: &Dataset,
    spec: &ModelSpec,
    m: usize,
    steps: usize,
    m0: usize,
    rng: &mut R,
) -> Result<f64> {
    let obj = dataset.objective(*spec)?;
    let full = fit_default(&obj)?;
    if !full.converged {
        return Err(Error::NonConvergence {
            grad_norm: full.grad_norm,
            iterations: full.iterations,
        });
    }
    Ok(calibrate(&obj, &full.beta, m, &[steps], m0, rng)?.scales[0])
}
