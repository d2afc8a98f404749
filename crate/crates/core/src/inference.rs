//! Confidence intervals: de-biased one-step intervals for strong signals,
//! MLE intervals otherwise, and comparator methods.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{fit_mle, weighted_gram, Dataset, GlmFamily, MleFit};
use crate::onestep::OneStepFit;
use crate::signal::{SignalClass, SignalClassification};
use crate::stats::{mix_seed, quantile_sorted, z_half_alpha};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Bias and covariance estimates for the active one-step coefficients.
#[derive(Debug, Clone)]
pub struct DebiasedQuantities {
    /// 0-based covariate indices, in the order of the vectors below.
    pub active: Vec<usize>,
    pub bias_hat: DVector<f64>,
    pub cov_hat: DMatrix<f64>,
    /// Diagonal of `Sigma_lambda`.
    pub sigma_lambda: DVector<f64>,
    /// `X' D-dagger X`, p x p.
    pub z0: DMatrix<f64>,
}

impl DebiasedQuantities {
    fn position(&self, j: usize) -> Option<usize> {
        self.active.iter().position(|&a| a == j)
    }

    pub fn bias(&self, j: usize) -> Option<f64> {
        self.position(j).map(|k| self.bias_hat[k])
    }

    pub fn std_error(&self, j: usize) -> Option<f64> {
        self.position(j).map(|k| self.cov_hat[(k, k)].max(0.0).sqrt())
    }
}

/// `X' D X - (X' D 1)(1' D X) / 1'D1`.
pub fn z_matrix(d: &DVector<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let xd1 = x.tr_mul(d);
    weighted_gram(x, d) - &xd1 * xd1.transpose() / d.sum()
}

fn sub_matrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// Bias and covariance from the already-restricted pieces: `z_a` is
/// `Z^(0)` on the active set, `info_inv_a` is `{(I^(0)_B)^{-1}}_A`.
pub fn debias_core(
    z_a: &DMatrix<f64>,
    info_inv_a: &DMatrix<f64>,
    n: usize,
    lambda: f64,
    beta0_a: &DVector<f64>,
    beta1_a: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>)> {
    let nf = n as f64;
    let sigma = DVector::from_fn(beta0_a.len(), |k, _| lambda / (beta0_a[k].abs() * beta1_a[k].abs()));
    let k = z_a / nf + DMatrix::from_diagonal(&sigma);
    let chol = k.cholesky().ok_or(Error::SingularSystem)?;
    let rhs = DVector::from_fn(beta0_a.len(), |k, _| lambda * beta1_a[k].signum() / beta0_a[k].abs());
    let bias = -chol.solve(&rhs);
    let kinv = chol.inverse();
    let mut cov = &kinv * z_a * info_inv_a * z_a * &kinv / (nf * nf * nf);
    cov = (&cov + cov.transpose()) * 0.5;
    Ok((bias, cov, sigma))
}

pub fn debiased_quantities(mle: &MleFit, onestep: &OneStepFit, data: &Dataset) -> Result<DebiasedQuantities> {
    let z0 = z_matrix(&mle.d0, &data.x_std);
    let active = onestep.active_set.clone();
    if active.is_empty() {
        return Ok(DebiasedQuantities {
            active,
            bias_hat: DVector::zeros(0),
            cov_hat: DMatrix::zeros(0, 0),
            sigma_lambda: DVector::zeros(0),
            z0,
        });
    }
    let z_a = sub_matrix(&z0, &active);
    let info_b = sub_matrix(&mle.info, &onestep.b_set);
    let info_b_inv = info_b.cholesky().ok_or(Error::SingularSystem)?.inverse();
    let s = active.len();
    let info_inv_a = info_b_inv.view((1, 1), (s, s)).into_owned();
    let beta0_a = DVector::from_fn(s, |k, _| mle.gamma0[active[k] + 1]);
    let beta1_a = DVector::from_fn(s, |k, _| onestep.gamma1[active[k] + 1]);
    let (bias_hat, cov_hat, sigma_lambda) =
        debias_core(&z_a, &info_inv_a, data.n(), onestep.lambda, &beta0_a, &beta1_a)?;
    Ok(DebiasedQuantities { active, bias_hat, cov_hat, sigma_lambda, z0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    DebiasedOnestep,
    Mle,
    Bootstrap,
    Absent,
}

impl CiMethod {
    pub fn name(&self) -> &'static str {
        match self {
            CiMethod::DebiasedOnestep => "debiased_onestep",
            CiMethod::Mle => "mle",
            CiMethod::Bootstrap => "bootstrap",
            CiMethod::Absent => "absent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub method: CiMethod,
    /// `(lower, upper)`; `None` when no interval is constructed.
    pub bounds: Option<(f64, f64)>,
}

impl Interval {
    pub fn absent() -> Self {
        Interval { method: CiMethod::Absent, bounds: None }
    }

    pub fn width(&self) -> Option<f64> {
        self.bounds.map(|(l, u)| u - l)
    }

    pub fn contains(&self, v: f64) -> Option<bool> {
        self.bounds.map(|(l, u)| l <= v && v <= u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    pub alpha: f64,
    /// One entry per covariate.
    pub intervals: Vec<Interval>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")))
    }
}

/// De-biased one-step interval for an active covariate `j` (0-based).
pub fn ci_strong(onestep: &OneStepFit, dq: &DebiasedQuantities, j: usize, alpha: f64) -> Result<Interval> {
    check_alpha(alpha)?;
    let k = dq.position(j).ok_or(Error::NotActive(j))?;
    let center = onestep.gamma1[j + 1] - dq.bias_hat[k];
    let half = z_half_alpha(alpha) * dq.cov_hat[(k, k)].max(0.0).sqrt();
    Ok(Interval { method: CiMethod::DebiasedOnestep, bounds: Some((center - half, center + half)) })
}

/// Wald interval from the MLE for covariate `j` (0-based).
pub fn ci_mle(mle: &MleFit, j: usize, alpha: f64) -> Result<Interval> {
    check_alpha(alpha)?;
    if j >= mle.p() {
        return Err(Error::InvalidArgument(format!("covariate index {j} out of range")));
    }
    let center = mle.gamma0[j + 1];
    let half = z_half_alpha(alpha) * mle.std_error(j + 1);
    Ok(Interval { method: CiMethod::Mle, bounds: Some((center - half, center + half)) })
}

pub fn mle_ci(mle: &MleFit, alpha: f64) -> Result<IntervalSet> {
    let intervals = (0..mle.p()).map(|j| ci_mle(mle, j, alpha)).collect::<Result<_>>()?;
    Ok(IntervalSet { alpha, intervals })
}

/// De-biased intervals on the active set; nothing elsewhere.
pub fn asymptotic_ci(onestep: &OneStepFit, dq: &DebiasedQuantities, alpha: f64) -> Result<IntervalSet> {
    let intervals = (0..onestep.p())
        .map(|j| if onestep.is_active(j) { ci_strong(onestep, dq, j, alpha) } else { Ok(Interval::absent()) })
        .collect::<Result<_>>()?;
    Ok(IntervalSet { alpha, intervals })
}

fn strong_or_mle(mle: &MleFit, onestep: &OneStepFit, dq: &DebiasedQuantities, j: usize, alpha: f64) -> Result<Interval> {
    // A strong label on an unselected covariate has no de-biased estimate.
    if onestep.is_active(j) {
        ci_strong(onestep, dq, j, alpha)
    } else {
        ci_mle(mle, j, alpha)
    }
}

/// Strong covariates get the de-biased interval; weak and noise covariates
/// the MLE interval.
pub fn two_step_ci(
    mle: &MleFit,
    onestep: &OneStepFit,
    dq: &DebiasedQuantities,
    classification: &SignalClassification,
    alpha: f64,
) -> Result<IntervalSet> {
    let intervals = classification
        .labels
        .iter()
        .enumerate()
        .map(|(j, c)| match c {
            SignalClass::Strong => strong_or_mle(mle, onestep, dq, j, alpha),
            _ => ci_mle(mle, j, alpha),
        })
        .collect::<Result<_>>()?;
    Ok(IntervalSet { alpha, intervals })
}

/// As [`two_step_ci`] but without intervals for noise covariates.
pub fn old_two_step_ci(
    mle: &MleFit,
    onestep: &OneStepFit,
    dq: &DebiasedQuantities,
    classification: &SignalClassification,
    alpha: f64,
) -> Result<IntervalSet> {
    let intervals = classification
        .labels
        .iter()
        .enumerate()
        .map(|(j, c)| match c {
            SignalClass::Strong => strong_or_mle(mle, onestep, dq, j, alpha),
            SignalClass::Weak => ci_mle(mle, j, alpha),
            SignalClass::Noise => Ok(Interval::absent()),
        })
        .collect::<Result<_>>()?;
    Ok(IntervalSet { alpha, intervals })
}

/// Fraction of bootstrap replicates allowed to fail.
pub const MAX_BOOTSTRAP_FAILURE_RATE: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct BootstrapResult {
    pub intervals: IntervalSet,
    pub failed: usize,
    pub replicates: usize,
}

/// Paired (x, y) resampling percentile intervals for the MLE slopes.
pub fn bootstrap_ci(family: &GlmFamily, data: &Dataset, b: usize, alpha: f64, seed: u64) -> Result<BootstrapResult> {
    check_alpha(alpha)?;
    if b < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bootstrap replicates, got {b}")));
    }
    let n = data.n();
    let p = data.p();
    let fits: Vec<Option<DVector<f64>>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, r as u64));
            let rows: Vec<usize> = (0..n).map(|_| rand::Rng::random_range(&mut rng, 0..n)).collect();
            let sample = data.select_rows(&rows);
            match fit_mle(family, &sample) {
                Ok(f) if f.converged => Some(f.beta()),
                _ => None,
            }
        })
        .collect();
    let ok: Vec<&DVector<f64>> = fits.iter().flatten().collect();
    let failed = b - ok.len();
    if failed as f64 > MAX_BOOTSTRAP_FAILURE_RATE * b as f64 || ok.is_empty() {
        return Err(Error::TooManyFailures { failed, total: b });
    }
    let intervals = (0..p)
        .map(|j| {
            let mut v: Vec<f64> = ok.iter().map(|beta| beta[j]).collect();
            v.sort_by(|a, c| a.total_cmp(c));
            let lo = quantile_sorted(&v, alpha / 2.0);
            let hi = quantile_sorted(&v, 1.0 - alpha / 2.0);
            Interval { method: CiMethod::Bootstrap, bounds: Some((lo, hi)) }
        })
        .collect();
    Ok(BootstrapResult { intervals: IntervalSet { alpha, intervals }, failed, replicates: b })
}
