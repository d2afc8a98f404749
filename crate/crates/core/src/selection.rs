//! Selection probabilities of the one-step adaptive lasso: the population
//! approximation and its maximum-likelihood plug-in estimate.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariates::CovariateModel;
use crate::error::{Error, Result};
use crate::glm::{weighted_gram, Dataset, GlmFamily, MleFit};
use crate::stats::{mix_seed, norm_cdf};

/// Monte Carlo chunks; each gets its own derived seed.
pub const MC_CHUNKS: usize = 20;
pub const DEFAULT_MC_DRAWS: usize = 200_000;

const P_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// `Phi((beta - t)/s) + Phi((-beta - t)/s)`, kept inside the open unit
/// interval.
pub fn selection_prob_formula(beta: f64, t: f64, s: f64) -> f64 {
    let v = norm_cdf((beta - t) / s) + norm_cdf((-beta - t) / s);
    v.clamp(f64::MIN_POSITIVE, P_MAX)
}

/// Plug-in threshold and scale for covariate `j` (0-based).
pub fn plugin_threshold_scale(mle: &MleFit, data: &Dataset, lambda: f64, j: usize) -> Result<(f64, f64)> {
    let p = data.p();
    if j >= p {
        return Err(Error::InvalidArgument(format!("covariate index {j} out of range for p={p}")));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let n = data.n() as f64;
    let d = &mle.d0;
    let x = data.x_std.column(j);
    let sd: f64 = d.sum();
    let sdx: f64 = d.iter().zip(x.iter()).map(|(w, v)| w * v).sum();
    let sdx2: f64 = d.iter().zip(x.iter()).map(|(w, v)| w * v * v).sum();
    let denom = sdx2 * sd - sdx * sdx;
    if !(denom > 0.0) {
        return Err(Error::DegenerateDenominator(j));
    }
    let t = (n * lambda * sd / denom).sqrt();
    let s = mle.cov[(j + 1, j + 1)].sqrt();
    Ok((t, s))
}

/// Estimated selection probability of covariate `j` (0-based).
pub fn estimated_selection_prob(mle: &MleFit, data: &Dataset, lambda: f64, j: usize) -> Result<f64> {
    let (t, s) = plugin_threshold_scale(mle, data, lambda, j)?;
    Ok(selection_prob_formula(mle.gamma0[j + 1], t, s))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionProfile {
    pub p_hat: Vec<f64>,
    pub lambda: f64,
}

pub fn selection_profile(mle: &MleFit, data: &Dataset, lambda: f64) -> Result<SelectionProfile> {
    let p_hat = (0..data.p())
        .map(|j| estimated_selection_prob(mle, data, lambda, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectionProfile { p_hat, lambda })
}

/// Monte Carlo estimate of `E(D x~ x~')` for one observation at the true
/// parameter. Independent of lambda and n, so one estimate serves a whole
/// lambda ladder.
#[derive(Debug, Clone)]
pub struct PopulationMoments {
    /// Pooled `E(D x~ x~')`, (p+1) x (p+1); `[0,0]` is `E(D)`.
    pub m: DMatrix<f64>,
    /// Per-chunk estimates, used for Monte Carlo standard errors.
    pub chunks: Vec<DMatrix<f64>>,
    pub draws: usize,
}

/// Value and Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
}

fn approx_from_moments(m: &DMatrix<f64>, n: usize, lambda: f64, beta: f64, j: usize) -> Result<f64> {
    let (ed, edx, edx2) = (m[(0, 0)], m[(0, j + 1)], m[(j + 1, j + 1)]);
    let denom = edx2 * ed - edx * edx;
    if !(denom > 0.0) {
        return Err(Error::DegenerateDenominator(j));
    }
    let t = (lambda * ed / denom).sqrt();
    let total = m * n as f64;
    let inv = total.cholesky().ok_or(Error::DegenerateDenominator(j))?.inverse();
    Ok(selection_prob_formula(beta, t, inv[(j + 1, j + 1)].sqrt()))
}

impl PopulationMoments {
    pub fn estimate(
        family: &GlmFamily,
        gamma0: &DVector<f64>,
        cm: &CovariateModel,
        draws: usize,
        seed: u64,
    ) -> Result<Self> {
        let p = cm.p();
        if gamma0.len() != p + 1 {
            return Err(Error::DimensionMismatch(format!(
                "gamma0 has {} entries but the covariate model has p={p}",
                gamma0.len()
            )));
        }
        if draws < MC_CHUNKS {
            return Err(Error::InvalidArgument(format!("need at least {MC_CHUNKS} Monte Carlo draws")));
        }
        let sampler = cm.sampler()?;
        let chunks = (0..MC_CHUNKS)
            .into_par_iter()
            .map(|k| {
                let size = draws / MC_CHUNKS + usize::from(k < draws % MC_CHUNKS);
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, k as u64));
                let x = sampler.sample(&mut rng, size);
                let xt = DMatrix::from_fn(size, p + 1, |i, c| if c == 0 { 1.0 } else { x[(i, c - 1)] });
                let eta = &xt * gamma0;
                let d = eta.iter().map(|&mu| family.weight(mu)).collect::<Result<Vec<_>>>()?;
                Ok(weighted_gram(&xt, &DVector::from_vec(d)) / size as f64)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut m = DMatrix::zeros(p + 1, p + 1);
        for (k, c) in chunks.iter().enumerate() {
            let size = draws / MC_CHUNKS + usize::from(k < draws % MC_CHUNKS);
            m += c * (size as f64 / draws as f64);
        }
        Ok(PopulationMoments { m, chunks, draws })
    }

    /// Approximate selection probability of covariate `j` (0-based) with
    /// true coefficient `beta`, for sample size `n` and tuning `lambda`.
    pub fn selection_prob(&self, n: usize, lambda: f64, beta: f64, j: usize) -> Result<McEstimate> {
        if j + 1 >= self.m.nrows() {
            return Err(Error::InvalidArgument(format!("covariate index {j} out of range")));
        }
        let value = approx_from_moments(&self.m, n, lambda, beta, j)?;
        let per_chunk = self
            .chunks
            .iter()
            .map(|c| approx_from_moments(c, n, lambda, beta, j))
            .collect::<Result<Vec<_>>>()?;
        let k = per_chunk.len() as f64;
        let mean = per_chunk.iter().sum::<f64>() / k;
        let var = per_chunk.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
        Ok(McEstimate { value, se: (var / k).sqrt() })
    }
}

/// Approximate (population) selection probability of covariate `j`
/// (0-based) under the true parameter `gamma0`.
#[allow(clippy::too_many_arguments)]
pub fn approximate_selection_prob(
    family: &GlmFamily,
    gamma0: &DVector<f64>,
    cm: &CovariateModel,
    n: usize,
    lambda: f64,
    j: usize,
    mc_draws: usize,
    seed: u64,
) -> Result<McEstimate> {
    PopulationMoments::estimate(family, gamma0, cm, mc_draws, seed)?.selection_prob(n, lambda, gamma0[j + 1], j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::fit_mle;
    use rand::Rng;

    fn two_phi(x: f64) -> f64 {
        2.0 * norm_cdf(x)
    }

    #[test]
    fn zero_beta_is_symmetric_pair() {
        let v = selection_prob_formula(0.0, 0.3, 0.1);
        assert!((v - two_phi(-3.0)).abs() < 1e-15);
    }

    #[test]
    fn formula_increases_with_abs_beta() {
        let mut last = 0.0;
        for k in 0..30 {
            let v = selection_prob_formula(k as f64 * 0.02, 0.2, 0.07);
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn stays_inside_unit_interval() {
        assert!(selection_prob_formula(50.0, 0.01, 0.01) < 1.0);
        assert!(selection_prob_formula(0.0, 50.0, 0.01) > 0.0);
    }

    #[test]
    fn gaussian_orthogonal_design_closed_form() {
        // Orthogonal columns standardized to mean 0, sd 1; y independent of X.
        let n = 100;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw = DMatrix::from_fn(n, 3, |_, _| rng.random::<f64>() - 0.5);
        let with_one = DMatrix::from_fn(n, 4, |i, j| if j == 0 { 1.0 } else { raw[(i, j - 1)] });
        let q = with_one.qr().q();
        let x = q.columns(1, 3) * ((n - 1) as f64).sqrt();
        let y = DVector::from_fn(n, |_, _| rng.random::<f64>());
        let fam = GlmFamily::Gaussian { sigma2: Some(1.0) };
        let data = Dataset::from_design(x.into_owned(), y, &fam).unwrap();
        let mut mle = fit_mle(&fam, &data).unwrap();
        mle.gamma0[1] = 0.0;
        let v = estimated_selection_prob(&mle, &data, 0.04, 0).unwrap();
        assert!((v - two_phi(-2.0)).abs() < 1e-10, "{v}");
        assert!((v - 0.045_500_263_896_358_4).abs() < 1e-10);
    }

    #[test]
    fn profile_matches_single_and_duplicates_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 80;
        let c = DVector::from_fn(n, |_, _| rng.random::<f64>());
        let z = DVector::from_fn(n, |_, _| rng.random::<f64>());
        let x = DMatrix::from_fn(n, 1, |i, _| c[i]);
        let y = DVector::from_fn(n, |i, _| (rng.random::<f64>() < 0.3 + 0.4 * c[i]) as u8 as f64);
        let data = Dataset::new(x, y.clone(), &GlmFamily::Logistic).unwrap();
        let mle = fit_mle(&GlmFamily::Logistic, &data).unwrap();
        let prof = selection_profile(&mle, &data, 0.03).unwrap();
        assert_eq!(prof.p_hat.len(), 1);
        assert_eq!(prof.p_hat[0], estimated_selection_prob(&mle, &data, 0.03, 0).unwrap());

        // Two columns with the same plug-ins: same data column pattern, MLE
        // coefficients forced equal.
        let x2 = DMatrix::from_fn(n, 2, |i, j| if j == 0 { c[i] } else { z[i] });
        let data2 = Dataset::new(x2, y, &GlmFamily::Logistic).unwrap();
        let mut mle2 = fit_mle(&GlmFamily::Logistic, &data2).unwrap();
        mle2.gamma0[2] = mle2.gamma0[1];
        let mut data_dup = data2.clone();
        let col = data_dup.x_std.column(0).into_owned();
        data_dup.x_std.set_column(1, &col);
        mle2.cov[(2, 2)] = mle2.cov[(1, 1)];
        let prof = selection_profile(&mle2, &data_dup, 0.03).unwrap();
        assert!((prof.p_hat[0] - prof.p_hat[1]).abs() < 1e-12);
    }

    #[test]
    fn degenerate_denominator_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = DMatrix::from_fn(30, 1, |_, _| rng.random::<f64>());
        let y = DVector::from_fn(30, |i, _| (i % 2) as f64);
        let data = Dataset::new(x, y, &GlmFamily::Logistic).unwrap();
        let mut mle = fit_mle(&GlmFamily::Logistic, &data).unwrap();
        mle.d0.fill(0.0);
        assert!(matches!(
            estimated_selection_prob(&mle, &data, 0.1, 0),
            Err(Error::DegenerateDenominator(0))
        ));
    }

    #[test]
    fn linear_independent_matches_closed_form() {
        let fam = GlmFamily::Gaussian { sigma2: Some(1.0) };
        let cm = CovariateModel::GaussianAr1 { rho: 0.0, p: 3 };
        let (n, lambda) = (100, 0.04);
        for &b in &[0.0, 0.1, 0.25] {
            let gamma0 = DVector::from_vec(vec![0.5, b, 1.0, -0.4]);
            let est = approximate_selection_prob(&fam, &gamma0, &cm, n, lambda, 0, DEFAULT_MC_DRAWS, 17).unwrap();
            let s = 1.0 / (n as f64).sqrt();
            let want = norm_cdf((b - lambda.sqrt()) / s) + norm_cdf((-b - lambda.sqrt()) / s);
            assert!((est.value - want).abs() <= 3.0 * est.se + 1e-12, "b={b} {est:?} want {want}");
        }
    }

    #[test]
    fn logistic_minimum_at_zero() {
        let cm = CovariateModel::GaussianAr1 { rho: 0.0, p: 2 };
        let grid = [-0.2, -0.1, 0.0, 0.1, 0.2];
        let vals: Vec<f64> = grid
            .iter()
            .map(|&b| {
                let g = DVector::from_vec(vec![0.3, b, 0.2]);
                approximate_selection_prob(&GlmFamily::Logistic, &g, &cm, 300, 0.05, 0, DEFAULT_MC_DRAWS, 2)
                    .unwrap()
                    .value
            })
            .collect();
        assert!(vals[2] < vals[1] && vals[2] < vals[3], "{vals:?}");
        assert!(vals[1] < vals[0] && vals[3] < vals[4]);
    }

    #[test]
    fn logistic_symmetric_in_beta() {
        let cm = CovariateModel::GaussianAr1 { rho: 0.0, p: 2 };
        for &b in &[0.1, 0.3] {
            let plus = DVector::from_vec(vec![0.3, b, 0.2]);
            let minus = DVector::from_vec(vec![0.3, -b, 0.2]);
            let a = approximate_selection_prob(&GlmFamily::Logistic, &plus, &cm, 300, 0.05, 0, 100_000, 8).unwrap();
            let c = approximate_selection_prob(&GlmFamily::Logistic, &minus, &cm, 300, 0.05, 0, 100_000, 9).unwrap();
            let se = (a.se * a.se + c.se * c.se).sqrt();
            assert!((a.value - c.value).abs() <= 3.0 * se, "{a:?} {c:?}");
        }
    }

    #[test]
    fn poisson_nondecreasing() {
        let cm = CovariateModel::GaussianAr1 { rho: 0.0, p: 2 };
        let mut prev: Option<McEstimate> = None;
        for k in 0..10 {
            let g = DVector::from_vec(vec![0.3, 0.1 * k as f64, 0.2]);
            let e = approximate_selection_prob(&GlmFamily::Poisson, &g, &cm, 300, 0.05, 0, 100_000, 4).unwrap();
            if let Some(p) = prev {
                assert!(e.value + 2.0 * e.se.max(p.se) >= p.value, "k={k}");
            }
            prev = Some(e);
        }
    }

    #[test]
    fn asymptotic_limits() {
        let cm = CovariateModel::IndependentExponential { p: 2 };
        let g = DVector::from_vec(vec![0.0, 0.0, 0.5]);
        let mom = PopulationMoments::estimate(&GlmFamily::Logistic, &g, &cm, 50_000, 1).unwrap();
        // n lambda = 1e4
        let v = mom.selection_prob(1000, 10.0, 0.0, 0).unwrap();
        assert!(v.value < 0.01);
        // n lambda -> infinity on a ladder
        let mut last = 1.0;
        for &n in &[100usize, 1_000, 10_000, 100_000] {
            let v = mom.selection_prob(n, 1.0 / (n as f64).powf(0.75), 0.0, 0).unwrap().value;
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-3);
        // sqrt(n) lambda -> 0 with a nonzero coefficient
        let mut last = 0.0;
        for &n in &[100usize, 1_000, 10_000, 100_000] {
            let v = mom.selection_prob(n, 1.0 / n as f64, 0.5, 1).unwrap().value;
            assert!(v >= last);
            last = v;
        }
        assert!(last > 0.999);
    }

    #[test]
    fn moments_deterministic_for_seed() {
        let cm = CovariateModel::GaussianAr1 { rho: 0.5, p: 3 };
        let g = DVector::from_vec(vec![0.1, 0.5, 0.0, -0.3]);
        let a = PopulationMoments::estimate(&GlmFamily::Logistic, &g, &cm, 10_000, 42).unwrap();
        let b = PopulationMoments::estimate(&GlmFamily::Logistic, &g, &cm, 10_000, 42).unwrap();
        assert_eq!(a.m, b.m);
        assert_eq!(a.chunks.len(), MC_CHUNKS);
    }
}
