//! Weak signal identification and post-selection inference for
//! penalized generalized linear models.

// `!(x > 0.0)` is used on purpose so NaN takes the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariates;
pub mod error;
pub mod glm;
pub mod inference;
pub mod onestep;
pub mod selection;
pub mod signal;
pub mod sim;
pub mod stats;
pub mod tuning;

pub use error::{Error, Result};
pub use glm::{fit_mle, Dataset, GlmFamily, MleFit};
pub use onestep::{one_step_fit, OneStepFit};
pub use tuning::{select_lambda, LambdaChoice, TuningOptions};
pub use covariates::CovariateModel;
pub use selection::{selection_profile, PopulationMoments, SelectionProfile};
pub use inference::{debiased_quantities, two_step_ci, CiMethod, DebiasedQuantities, Interval, IntervalSet};
pub use signal::{identify, IdentifyOptions, Identification, SignalClass, SignalClassification, Thresholds};
pub use sim::{run_monte_carlo, DgpConfig, Method, SimOptions, SimulationReport};
