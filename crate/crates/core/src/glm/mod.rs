//! GLM families, datasets and unpenalized maximum-likelihood fitting.

mod dataset;
mod family;
mod mle;

pub use dataset::{standardize, Dataset};
pub use family::{sigmoid, softplus, GlmFamily, POISSON_MU_LIMIT};
pub use mle::{
    fit_mle, linear_predictor, log_likelihood, neg_hessian, score, weight_diagonal, weighted_gram,
    MleFit, MAX_HALVINGS, MAX_NEWTON_ITER, SEPARATION_LIMIT,
};
