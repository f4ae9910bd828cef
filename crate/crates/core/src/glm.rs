//! Loss families and separable regularizers.
//!
//! A loss family is described by its value and its first three derivatives
//! in the linear predictor `z`; the solver and the unlearning updates only
//! ever touch a loss through that contract.

use std::fmt;
use std::str::FromStr;

use faer::Col;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossFamily {
    /// `½(y − z)²`, the Gaussian negative log-likelihood up to constants.
    Squared,
    /// Bernoulli negative log-likelihood with the canonical logit link.
    Logistic,
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LossFamily {
    pub fn name(self) -> &'static str {
        match self {
            LossFamily::Squared => "squared",
            LossFamily::Logistic => "logistic",
        }
    }

    /// Checks that `y` is an admissible response for this family.
    pub fn check_response(self, y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::domain(format!("non-finite response {y}")));
        }
        if self == LossFamily::Logistic && y != 0.0 && y != 1.0 {
            return Err(Error::domain(format!(
                "logistic loss requires y in {{0, 1}}, got {y}"
            )));
        }
        Ok(())
    }

    fn check(self, y: f64, z: f64) -> Result<()> {
        self.check_response(y)?;
        if !z.is_finite() {
            return Err(Error::domain(format!("non-finite linear predictor {z}")));
        }
        Ok(())
    }

    /// Loss value; the caller guarantees `(y, z)` is admissible.
    #[inline]
    pub(crate) fn value_unchecked(self, y: f64, z: f64) -> f64 {
        match self {
            LossFamily::Squared => 0.5 * (y - z) * (y - z),
            LossFamily::Logistic => y * softplus(-z) + (1.0 - y) * softplus(z),
        }
    }

    #[inline]
    pub(crate) fn d1_unchecked(self, y: f64, z: f64) -> f64 {
        match self {
            LossFamily::Squared => z - y,
            // y ∈ {0, 1}; σ(z) − 1 = −σ(−z) avoids cancellation.
            LossFamily::Logistic if y == 1.0 => -sigmoid(-z),
            LossFamily::Logistic => sigmoid(z) - y,
        }
    }

    #[inline]
    pub(crate) fn d2_unchecked(self, _y: f64, z: f64) -> f64 {
        match self {
            LossFamily::Squared => 1.0,
            // σ(z)σ(−z) keeps full relative precision in both tails.
            LossFamily::Logistic => sigmoid(z) * sigmoid(-z),
        }
    }

    #[inline]
    pub(crate) fn d3_unchecked(self, _y: f64, z: f64) -> f64 {
        match self {
            LossFamily::Squared => 0.0,
            LossFamily::Logistic => {
                let (s, t) = (sigmoid(z), sigmoid(-z));
                s * t * (t - s)
            }
        }
    }
}

impl fmt::Display for LossFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" | "linear" => Ok(LossFamily::Squared),
            "logistic" => Ok(LossFamily::Logistic),
            other => Err(Error::domain(format!("unknown loss family `{other}`"))),
        }
    }
}

/// `ℓ(y | z)`.
pub fn loss_value(loss: LossFamily, y: f64, z: f64) -> Result<f64> {
    loss.check(y, z)?;
    Ok(loss.value_unchecked(y, z))
}

/// First, second and third derivative of the loss in `z`.
pub fn loss_d123(loss: LossFamily, y: f64, z: f64) -> Result<(f64, f64, f64)> {
    loss.check(y, z)?;
    Ok((
        loss.d1_unchecked(y, z),
        loss.d2_unchecked(y, z),
        loss.d3_unchecked(y, z),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegularizerKind {
    /// `r(β) = ‖β‖²`.
    Ridge,
}

/// A separable, strongly convex penalty `λ r(β)`.
///
/// `nu` is the declared strong-convexity constant that enters the noise
/// calibration formulas. It is configuration and is not derived from the
/// penalty: ridge admits any `0 < nu <= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularizer {
    pub kind: RegularizerKind,
    pub lambda: f64,
    pub nu: f64,
}

impl Regularizer {
    pub fn ridge(lambda: f64) -> Result<Self> {
        Self::ridge_with_nu(lambda, 1.0)
    }

    pub fn ridge_with_nu(lambda: f64, nu: f64) -> Result<Self> {
        let reg = Regularizer {
            kind: RegularizerKind::Ridge,
            lambda,
            nu,
        };
        reg.validate()?;
        Ok(reg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::domain(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        match self.kind {
            RegularizerKind::Ridge => {
                if !(self.nu > 0.0 && self.nu <= 2.0) {
                    return Err(Error::domain(format!(
                        "ridge strong-convexity constant nu must lie in (0, 2], got {}",
                        self.nu
                    )));
                }
            }
        }
        Ok(())
    }

    /// `r(β)`, without the `λ` factor.
    pub fn value(&self, beta: &Col<f64>) -> f64 {
        match self.kind {
            RegularizerKind::Ridge => beta.squared_norm_l2(),
        }
    }

    /// Diagonal of `∇²r`; constant for ridge.
    pub fn hessian_diag_value(&self) -> f64 {
        match self.kind {
            RegularizerKind::Ridge => 2.0,
        }
    }

    /// Frobenius-norm Lipschitz constant of `β ↦ ∇²r(β)`.
    pub fn hessian_lipschitz(&self) -> f64 {
        match self.kind {
            RegularizerKind::Ridge => 0.0,
        }
    }
}

/// Gradient and Hessian diagonal of `r` (without `λ`).
pub fn reg_grad_hess(reg: &Regularizer, beta: &Col<f64>) -> Result<(Col<f64>, Col<f64>)> {
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::domain("non-finite coefficient"));
    }
    let p = beta.nrows();
    match reg.kind {
        RegularizerKind::Ridge => Ok((
            Col::from_fn(p, |k| 2.0 * beta[k]),
            Col::from_fn(p, |_| reg.hessian_diag_value()),
        )),
    }
}

/// Loss family plus penalty: the full R-ERM model description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub loss: LossFamily,
    pub reg: Regularizer,
}

impl ModelSpec {
    pub fn new(loss: LossFamily, reg: Regularizer) -> Result<Self> {
        reg.validate()?;
        Ok(ModelSpec { loss, reg })
    }

    pub fn logistic_ridge(lambda: f64) -> Result<Self> {
        Self::new(LossFamily::Logistic, Regularizer::ridge(lambda)?)
    }

    pub fn squared_ridge(lambda: f64) -> Result<Self> {
        Self::new(LossFamily::Squared, Regularizer::ridge(lambda)?)
    }

    /// `λν`, the strong-convexity modulus of the objective used by the
    /// theory formulas.
    pub fn lambda_nu(&self) -> f64 {
        self.reg.lambda * self.reg.nu
    }
}
