use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest linear predictor accepted by the Poisson mean `exp(mu)`.
pub const POISSON_MU_LIMIT: f64 = 700.0;

/// Exponential-family response model with canonical link.
///
/// For the Gaussian family `sigma2` is the error variance. `None` means
/// "unknown": the MLE fit replaces it with the residual plug-in, and
/// derivative evaluations before that treat it as 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GlmFamily {
    Gaussian { sigma2: Option<f64> },
    Logistic,
    Poisson,
}

impl GlmFamily {
    pub fn gaussian() -> Self {
        GlmFamily::Gaussian { sigma2: None }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GlmFamily::Gaussian { .. } => "gaussian",
            GlmFamily::Logistic => "logistic",
            GlmFamily::Poisson => "poisson",
        }
    }

    pub(crate) fn sigma2(&self) -> f64 {
        match self {
            GlmFamily::Gaussian { sigma2 } => sigma2.unwrap_or(1.0),
            _ => 1.0,
        }
    }

    /// Mean function m(mu).
    pub fn mean(&self, mu: f64) -> f64 {
        match self {
            GlmFamily::Gaussian { .. } => mu,
            GlmFamily::Logistic => sigmoid(mu),
            GlmFamily::Poisson => mu.exp(),
        }
    }

    /// Per-observation weight `-d²l/dmu²`.
    pub fn weight(&self, mu: f64) -> Result<f64> {
        match self {
            GlmFamily::Gaussian { .. } => Ok(1.0 / self.sigma2()),
            GlmFamily::Logistic => {
                let e = (-mu.abs()).exp();
                Ok(e / ((1.0 + e) * (1.0 + e)))
            }
            GlmFamily::Poisson => {
                if mu > POISSON_MU_LIMIT {
                    Err(Error::Overflow(mu))
                } else {
                    Ok(mu.exp())
                }
            }
        }
    }

    /// Derivative of the per-observation log-likelihood in mu, `(y - m(mu)) / phi`.
    pub fn residual(&self, mu: f64, y: f64) -> f64 {
        (y - self.mean(mu)) / self.sigma2()
    }

    /// Per-observation log-likelihood.
    pub fn loglik(&self, mu: f64, y: f64) -> f64 {
        match self {
            GlmFamily::Gaussian { .. } => {
                let s2 = self.sigma2();
                let r = y - mu;
                -r * r / (2.0 * s2) - 0.5 * (2.0 * PI * s2).ln()
            }
            GlmFamily::Logistic => y * mu - softplus(mu),
            GlmFamily::Poisson => y * mu - mu.exp() - ln_gamma(y + 1.0),
        }
    }

    /// Checks that a response value is in the family's support.
    pub fn validate_response(&self, y: f64) -> bool {
        if !y.is_finite() {
            return false;
        }
        match self {
            GlmFamily::Gaussian { .. } => true,
            GlmFamily::Logistic => y == 0.0 || y == 1.0,
            GlmFamily::Poisson => y >= 0.0 && y.fract() == 0.0,
        }
    }
}

impl fmt::Display for GlmFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GlmFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "linear" | "normal" => Ok(GlmFamily::gaussian()),
            "logistic" | "binomial" | "logit" => Ok(GlmFamily::Logistic),
            "poisson" => Ok(GlmFamily::Poisson),
            other => Err(Error::InvalidArgument(format!("unknown family '{other}'"))),
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(mu: f64) -> f64 {
    if mu >= 0.0 {
        1.0 / (1.0 + (-mu).exp())
    } else {
        let e = mu.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^mu) without overflow.
pub fn softplus(mu: f64) -> f64 {
    mu.max(0.0) + (-mu.abs()).exp().ln_1p()
}
