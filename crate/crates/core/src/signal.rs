//! Strong / weak / noise classification from estimated selection
//! probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::onestep::OneStepFit;
use crate::stats::quantile_type7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub delta1: f64,
    pub delta2: f64,
    pub tau: f64,
    pub alpha: f64,
}

impl Thresholds {
    pub fn new(delta1: f64, delta2: f64, tau: f64, alpha: f64) -> Result<Self> {
        if !(delta1 > 0.0 && delta1 <= 1.0) {
            return Err(Error::InvalidArgument(format!("delta1 must be in (0, 1], got {delta1}")));
        }
        if !(0.0..1.0).contains(&delta2) {
            return Err(Error::InvalidArgument(format!("delta2 must be in [0, 1), got {delta2}")));
        }
        check_unit("tau", tau)?;
        check_unit("alpha", alpha)?;
        if delta2 >= delta1 {
            return Err(Error::InvalidArgument(format!("delta2 ({delta2}) must be below delta1 ({delta1})")));
        }
        if delta1 <= 1.0 - alpha {
            return Err(Error::InvalidArgument(format!("delta1 ({delta1}) must exceed 1 - alpha ({})", 1.0 - alpha)));
        }
        Ok(Thresholds { delta1, delta2, tau, alpha })
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be in (0, 1), got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub delta2: f64,
    /// No covariate was left unselected, so `delta2` fell back to 0.
    pub all_selected: bool,
}

/// The `1 - tau` type-7 quantile of the estimated selection probabilities
/// of the covariates the one-step fit left out.
pub fn calibrate_delta2(p_hat: &[f64], onestep: &OneStepFit, tau: f64) -> Result<Calibration> {
    check_unit("tau", tau)?;
    if p_hat.len() != onestep.p() {
        return Err(Error::DimensionMismatch(format!(
            "{} probabilities for {} covariates",
            p_hat.len(),
            onestep.p()
        )));
    }
    let unselected: Vec<f64> = (0..p_hat.len()).filter(|&j| !onestep.is_active(j)).map(|j| p_hat[j]).collect();
    Ok(match quantile_type7(&unselected, 1.0 - tau) {
        Some(delta2) => Calibration { delta2, all_selected: false },
        None => Calibration { delta2: 0.0, all_selected: true },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalClass {
    Strong,
    Weak,
    Noise,
}

impl SignalClass {
    pub fn name(&self) -> &'static str {
        match self {
            SignalClass::Strong => "strong",
            SignalClass::Weak => "weak",
            SignalClass::Noise => "noise",
        }
    }
}

/// One label per covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalClassification {
    pub labels: Vec<SignalClass>,
}

impl SignalClassification {
    fn indices(&self, c: SignalClass) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &l)| l == c).map(|(j, _)| j).collect()
    }

    pub fn strong(&self) -> Vec<usize> {
        self.indices(SignalClass::Strong)
    }

    pub fn weak(&self) -> Vec<usize> {
        self.indices(SignalClass::Weak)
    }

    pub fn noise(&self) -> Vec<usize> {
        self.indices(SignalClass::Noise)
    }
}

pub fn classify_one(p: f64, delta1: f64, delta2: f64) -> SignalClass {
    if p > delta1 {
        SignalClass::Strong
    } else if p > delta2 {
        SignalClass::Weak
    } else {
        SignalClass::Noise
    }
}

pub fn classify(p_hat: &[f64], th: &Thresholds) -> SignalClassification {
    SignalClassification { labels: p_hat.iter().map(|&p| classify_one(p, th.delta1, th.delta2)).collect() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentifyOptions {
    pub delta1: f64,
    pub tau: f64,
    pub alpha: f64,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        IdentifyOptions { delta1: 0.99, tau: 0.1, alpha: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub thresholds: Thresholds,
    pub classification: SignalClassification,
    pub all_selected: bool,
}

/// Calibrates `delta2` and classifies every covariate.
pub fn identify(p_hat: &[f64], onestep: &OneStepFit, opts: &IdentifyOptions) -> Result<Identification> {
    let cal = calibrate_delta2(p_hat, onestep, opts.tau)?;
    let thresholds = Thresholds::new(opts.delta1, cal.delta2, opts.tau, opts.alpha)?;
    Ok(Identification { classification: classify(p_hat, &thresholds), thresholds, all_selected: cal.all_selected })
}
