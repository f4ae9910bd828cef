//! Accuracy and certifiability measurements.

use faer::Col;
use rand::Rng;

use crate::data::{Dataset, PointSource};
use crate::error::{Error, Result};
use crate::glm::LossFamily;
use crate::noise::{log_density, sample_isotropic_laplace, NoiseSpec};
use crate::unlearn::RemovalRequest;

pub fn l2_distance(a: &Col<f64>, b: &Col<f64>) -> f64 {
    (a - b).norm_l2()
}

/// Monte Carlo estimate of the expected absolute loss gap on fresh points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GedEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_test: usize,
}

impl GedEstimate {
    pub fn from_gaps(gaps: &[f64]) -> Self {
        let n = gaps.len();
        let mean = gaps.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        GedEstimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            n_test: n,
        }
    }
}

/// `|ℓ(y₀|x₀ᵀβ_a) − ℓ(y₀|x₀ᵀβ_b)|` at each of `n_test` fresh points.
pub fn loss_gaps<S: PointSource, R: Rng + ?Sized>(
    loss: LossFamily,
    beta_a: &Col<f64>,
    beta_b: &Col<f64>,
    sampler: &S,
    n_test: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let p = beta_a.nrows();
    if beta_b.nrows() != p || sampler.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: if beta_b.nrows() != p { beta_b.nrows() } else { sampler.p() },
        });
    }
    Ok((0..n_test)
        .map(|_| {
            let (y, x) = sampler.draw(rng);
            let za = x.transpose() * beta_a;
            let zb = x.transpose() * beta_b;
            (loss.value_unchecked(y, za) - loss.value_unchecked(y, zb)).abs()
        })
        .collect())
}

/// Estimates `E|ℓ(y₀|x₀ᵀβ_exact) − ℓ(y₀|x₀ᵀβ_perturbed)|` over fresh points,
/// holding the perturbation inside `beta_perturbed` fixed.
pub fn ged_estimate<S: PointSource, R: Rng + ?Sized>(
    loss: LossFamily,
    beta_exact: &Col<f64>,
    beta_perturbed: &Col<f64>,
    sampler: &S,
    n_test: usize,
    rng: &mut R,
) -> Result<GedEstimate> {
    if n_test < 2 {
        return Err(Error::domain(format!("GED needs n_test >= 2, got {n_test}")));
    }
    let gaps = loss_gaps(loss, beta_exact, beta_perturbed, sampler, n_test, rng)?;
    Ok(GedEstimate::from_gaps(&gaps))
}

/// Mean absolute loss gap over the forgotten rows.
pub fn in_sample_error(
    loss: LossFamily,
    beta_perturbed: &Col<f64>,
    beta_exact: &Col<f64>,
    dataset: &Dataset,
    req: &RemovalRequest,
) -> Result<f64> {
    if req.m() == 0 {
        return Err(Error::InvalidRemoval("in-sample error needs a nonempty forget set".into()));
    }
    req.validate(dataset.n())?;
    let mut total = 0.0;
    for &i in req.indices() {
        let x = dataset.row(i);
        let y = dataset.y[i];
        loss.check_response(y)?;
        let za = x.transpose() * beta_perturbed;
        let zb = x.transpose() * beta_exact;
        total += (loss.value_unchecked(y, za) - loss.value_unchecked(y, zb)).abs();
    }
    Ok(total / req.m() as f64)
}

/// Outcome of the direct-perturbation certifiability check.
///
/// `satisfied` is the exact condition `‖β̃ − β̂_{\M}‖ ≤ r`, under which the
/// two perturbed output densities stay within `e^{±ε}` of each other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertReport {
    pub delta_norm: f64,
    pub scale: f64,
    pub epsilon: f64,
    pub satisfied: bool,
    pub max_observed_log_ratio: f64,
    pub n_probe: usize,
}

impl CertReport {
    /// `ε ‖Δ‖ / r`, the largest log density ratio any probe can show.
    pub fn log_ratio_bound(&self) -> f64 {
        self.epsilon * self.delta_norm / self.scale
    }
}

/// `|log p_b(u − β̃) − log p_b(u − β_exact)|` at one probe point `u`.
pub fn probe_log_ratio(
    beta_tilde: &Col<f64>,
    beta_exact: &Col<f64>,
    scale: f64,
    epsilon: f64,
    u: &Col<f64>,
) -> Result<f64> {
    let spec = NoiseSpec::new(beta_tilde.nrows(), scale, epsilon)?;
    let a = log_density(&spec, &(u - beta_tilde))?;
    let b = log_density(&spec, &(u - beta_exact))?;
    Ok((a - b).abs())
}

/// Checks the norm condition and probes the density ratio at `n_probe`
/// points drawn from the perturbed law centred at `beta_tilde`.
pub fn certify_check<R: Rng + ?Sized>(
    beta_tilde: &Col<f64>,
    beta_exact: &Col<f64>,
    scale: f64,
    epsilon: f64,
    n_probe: usize,
    rng: &mut R,
) -> Result<CertReport> {
    if !(scale > 0.0) {
        return Err(Error::domain(format!("certification needs scale > 0, got {scale}")));
    }
    if beta_exact.nrows() != beta_tilde.nrows() {
        return Err(Error::DimensionMismatch {
            expected: beta_tilde.nrows(),
            got: beta_exact.nrows(),
        });
    }
    let spec = NoiseSpec::new(beta_tilde.nrows(), scale, epsilon)?;
    let delta_norm = l2_distance(beta_tilde, beta_exact);
    let mut max_ratio: f64 = 0.0;
    for _ in 0..n_probe {
        let u = beta_tilde + sample_isotropic_laplace(&spec, rng)?;
        max_ratio = max_ratio.max(probe_log_ratio(beta_tilde, beta_exact, scale, epsilon, &u)?);
    }
    Ok(CertReport {
        delta_norm,
        scale,
        epsilon,
        satisfied: delta_norm <= scale,
        max_observed_log_ratio: max_ratio,
        n_probe,
    })
}
