use nalgebra::{DMatrix, DVector};

use super::{Dataset, GlmFamily};
use crate::error::{Error, Result};

/// Newton iterations before giving up with `converged = false`.
pub const MAX_NEWTON_ITER: usize = 100;
/// Step halvings attempted per Newton iteration.
pub const MAX_HALVINGS: usize = 30;
/// `|gamma|_inf` beyond which the fit is declared separated / divergent.
pub const SEPARATION_LIMIT: f64 = 1e3;
const SCORE_TOL: f64 = 1e-8;
const REL_LOGLIK_TOL: f64 = 1e-10;
const SEPARATION_STEP: f64 = 1e-2;

/// Unpenalized maximum-likelihood fit and the quantities evaluated at it.
#[derive(Debug, Clone)]
pub struct MleFit {
    /// Family with the Gaussian variance resolved.
    pub family: GlmFamily,
    /// `(alpha, beta_1, ..., beta_p)`.
    pub gamma0: DVector<f64>,
    /// Diagonal of `D(gamma0)`.
    pub d0: DVector<f64>,
    /// `X~' D X~ / n`.
    pub info: DMatrix<f64>,
    /// `(X~' D X~)^{-1}`.
    pub cov: DMatrix<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl MleFit {
    pub fn p(&self) -> usize {
        self.gamma0.len() - 1
    }

    pub fn alpha(&self) -> f64 {
        self.gamma0[0]
    }

    /// Slope coefficients `beta^(0)`.
    pub fn beta(&self) -> DVector<f64> {
        self.gamma0.rows(1, self.p()).into_owned()
    }

    /// Standard error of coefficient `k` of gamma (0 = intercept).
    pub fn std_error(&self, k: usize) -> f64 {
        self.cov[(k, k)].sqrt()
    }

    /// Rebuilds the fit quantities at a given parameter vector, e.g. one read
    /// back from a serialized fit. `converged` reports whether the score
    /// vanishes there.
    pub fn at(family: GlmFamily, gamma: DVector<f64>, data: &Dataset) -> Result<MleFit> {
        let score = score(&family, &gamma, data)?;
        let converged = score.amax() < 1e-6;
        finish(family, gamma, data, converged, 0)
    }
}

fn check_dims(gamma: &DVector<f64>, data: &Dataset) -> Result<()> {
    if gamma.len() != data.p() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "gamma has {} entries, expected {}",
            gamma.len(),
            data.p() + 1
        )));
    }
    Ok(())
}

pub fn linear_predictor(gamma: &DVector<f64>, data: &Dataset) -> Result<DVector<f64>> {
    check_dims(gamma, data)?;
    Ok(&data.x_tilde * gamma)
}

pub fn log_likelihood(family: &GlmFamily, gamma: &DVector<f64>, data: &Dataset) -> Result<f64> {
    let eta = linear_predictor(gamma, data)?;
    Ok(eta.iter().zip(data.y.iter()).map(|(&mu, &y)| family.loglik(mu, y)).sum())
}

/// Gradient of the log-likelihood in gamma: `X~' (y - m(mu)) / phi`.
pub fn score(family: &GlmFamily, gamma: &DVector<f64>, data: &Dataset) -> Result<DVector<f64>> {
    let eta = linear_predictor(gamma, data)?;
    let resid = DVector::from_iterator(
        eta.len(),
        eta.iter().zip(data.y.iter()).map(|(&mu, &y)| family.residual(mu, y)),
    );
    Ok(data.x_tilde.tr_mul(&resid))
}

/// Diagonal of `D(gamma)`, the negative second derivative of each
/// observation's log-likelihood in its linear predictor.
pub fn weight_diagonal(family: &GlmFamily, gamma: &DVector<f64>, data: &Dataset) -> Result<DVector<f64>> {
    let eta = linear_predictor(gamma, data)?;
    let w: Result<Vec<f64>> = eta.iter().map(|&mu| family.weight(mu)).collect();
    Ok(DVector::from_vec(w?))
}

/// `X~' diag(d) X~`.
pub fn weighted_gram(x: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let mut xd = x.clone();
    for (mut row, &w) in xd.row_iter_mut().zip(d.iter()) {
        row *= w;
    }
    x.tr_mul(&xd)
}

/// Negative Hessian of the log-likelihood, `X~' D(gamma) X~`.
pub fn neg_hessian(family: &GlmFamily, gamma: &DVector<f64>, data: &Dataset) -> Result<DMatrix<f64>> {
    let d = weight_diagonal(family, gamma, data)?;
    Ok(weighted_gram(&data.x_tilde, &d))
}

fn finish(
    family: GlmFamily,
    gamma0: DVector<f64>,
    data: &Dataset,
    converged: bool,
    iterations: usize,
) -> Result<MleFit> {
    let d0 = weight_diagonal(&family, &gamma0, data)?;
    let h = weighted_gram(&data.x_tilde, &d0);
    let chol = h.clone().cholesky().ok_or(Error::SingularInformation)?;
    let cov = chol.inverse();
    let info = h / data.n() as f64;
    let loglik = log_likelihood(&family, &gamma0, data)?;
    Ok(MleFit { family, gamma0, d0, info, cov, loglik, converged, iterations })
}

/// Newton–Raphson with step halving from gamma = 0.
///
/// For the Gaussian family with unknown variance, the variance is replaced by
/// `RSS / (n - p - 1)` after the coefficients converge.
pub fn fit_mle(family: &GlmFamily, data: &Dataset) -> Result<MleFit> {
    let mut family = *family;
    let n = data.n();
    let p = data.p();
    let mut gamma = DVector::zeros(p + 1);
    let mut ll = log_likelihood(&family, &gamma, data)?;
    let mut converged = false;
    let mut polish = 0;
    let mut iter = 0;

    while iter < MAX_NEWTON_ITER {
        iter += 1;
        let g = score(&family, &gamma, data)?;
        let h = neg_hessian(&family, &gamma, data)?;
        let step = h.cholesky().ok_or(Error::SingularInformation)?.solve(&g);
        if g.amax() < SCORE_TOL || polish > 2 {
            // A vanishing score with a Newton step that stays large means the
            // likelihood keeps increasing along a ray: the maximum is at
            // infinity.
            if step.amax() > SEPARATION_STEP {
                return Err(Error::SeparationDetected { limit: SEPARATION_LIMIT });
            }
            converged = true;
            break;
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = &gamma + &step * t;
            if cand.amax() > SEPARATION_LIMIT {
                return Err(Error::SeparationDetected { limit: SEPARATION_LIMIT });
            }
            let ll_c = log_likelihood(&family, &cand, data)?;
            if ll_c.is_finite() && ll_c >= ll - 1e-12 * ll.abs() {
                accepted = Some((cand, ll_c));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, ll_c)) = accepted else {
            // No ascent direction left at working precision.
            converged = score(&family, &gamma, data)?.amax() < 1e-6;
            break;
        };
        let rel = (ll_c - ll).abs() / (ll.abs() + 1.0);
        gamma = cand;
        ll = ll_c;
        if rel < REL_LOGLIK_TOL {
            // Newton converges quadratically; a couple of extra steps push the
            // score down to round-off once the likelihood has stalled.
            polish += 1;
        }
    }

    if let GlmFamily::Gaussian { sigma2: None } = family {
        let eta = &data.x_tilde * &gamma;
        let rss: f64 = eta.iter().zip(data.y.iter()).map(|(m, y)| (y - m) * (y - m)).sum();
        let df = n.saturating_sub(p + 1).max(1) as f64;
        let s2 = rss / df;
        if !(s2 > 0.0) {
            return Err(Error::InvalidData("residual variance is zero; supply sigma2".into()));
        }
        family = GlmFamily::Gaussian { sigma2: Some(s2) };
    }
    finish(family, gamma, data, converged, iter)
}
