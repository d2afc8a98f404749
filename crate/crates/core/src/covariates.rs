//! Population covariate models with mean 0 and unit variance per coordinate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateModel {
    /// Gaussian with `corr(x_j, x_k) = rho^|j-k|`.
    GaussianAr1 { rho: f64, p: usize },
    /// Gaussian with all pairwise correlations `rho`.
    GaussianExchangeable { rho: f64, p: usize },
    /// Independent `Exp(1) - 1` coordinates.
    IndependentExponential { p: usize },
}

impl CovariateModel {
    pub fn p(&self) -> usize {
        match *self {
            CovariateModel::GaussianAr1 { p, .. }
            | CovariateModel::GaussianExchangeable { p, .. }
            | CovariateModel::IndependentExponential { p } => p,
        }
    }

    /// Population correlation matrix.
    pub fn correlation(&self) -> DMatrix<f64> {
        let p = self.p();
        match *self {
            CovariateModel::GaussianAr1 { rho, .. } => {
                DMatrix::from_fn(p, p, |j, k| rho.powi((j as i32 - k as i32).abs()))
            }
            CovariateModel::GaussianExchangeable { rho, .. } => {
                DMatrix::from_fn(p, p, |j, k| if j == k { 1.0 } else { rho })
            }
            CovariateModel::IndependentExponential { .. } => DMatrix::identity(p, p),
        }
    }

    /// Prepares a sampler; fails if the correlation matrix is not positive
    /// definite.
    pub fn sampler(&self) -> Result<CovariateSampler> {
        if self.p() == 0 {
            return Err(Error::InvalidArgument("covariate model needs p >= 1".into()));
        }
        let chol = match self {
            CovariateModel::IndependentExponential { .. } => None,
            _ => {
                let c = self.correlation().cholesky().ok_or_else(|| {
                    Error::InvalidArgument(format!("{self:?} has no positive definite correlation"))
                })?;
                Some(c.l())
            }
        };
        Ok(CovariateSampler { model: *self, chol })
    }
}

#[derive(Debug, Clone)]
pub struct CovariateSampler {
    model: CovariateModel,
    chol: Option<DMatrix<f64>>,
}

impl CovariateSampler {
    pub fn p(&self) -> usize {
        self.model.p()
    }

    pub fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let p = self.p();
        match &self.chol {
            Some(l) => {
                let z = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
                l * z
            }
            None => DVector::from_fn(p, |_, _| {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }),
        }
    }

    /// `n` independent rows.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> DMatrix<f64> {
        let p = self.p();
        let mut x = DMatrix::zeros(n, p);
        for i in 0..n {
            let row = self.sample_row(rng);
            x.row_mut(i).copy_from(&row.transpose());
        }
        x
    }
}
