//! One-step adaptive lasso: working data, coordinate descent and the
//! back-transformation to the original coefficient scale.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{Dataset, MleFit};

/// Weighted, weighted-mean-centered design and response for the lasso step.
#[derive(Debug, Clone)]
pub struct WorkingData {
    pub x_star: DMatrix<f64>,
    pub y_star: DVector<f64>,
    /// Adaptive weights `|beta_j^(0)|`.
    pub w: DVector<f64>,
    /// `sum_i x*_ij^2`.
    pub col_norms: DVector<f64>,
    /// `X*' X*`.
    pub gram: DMatrix<f64>,
    /// `X*' y*`.
    pub xty: DVector<f64>,
}

impl WorkingData {
    pub fn n(&self) -> usize {
        self.x_star.nrows()
    }

    pub fn p(&self) -> usize {
        self.x_star.ncols()
    }

    /// Smallest lambda at which the lasso solution is identically zero.
    pub fn lambda_max(&self) -> f64 {
        self.xty.amax() / self.n() as f64
    }
}

/// `v -> sqrt(D) v - sqrt(D) 1 (1'D1)^{-1} 1'D v`, applied in place.
fn apply_d_star(d: &DVector<f64>, sqrt_d: &DVector<f64>, sum_d: f64, v: &mut [f64]) {
    let m: f64 = d.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>() / sum_d;
    for (vi, &s) in v.iter_mut().zip(sqrt_d.iter()) {
        *vi = s * (*vi - m);
    }
}

pub fn build_working_data(mle: &MleFit, data: &Dataset) -> WorkingData {
    let d = &mle.d0;
    let sqrt_d = d.map(f64::sqrt);
    let sum_d = d.sum();
    let w = mle.beta().abs();

    let mut x_star = data.x_std.clone();
    for (j, mut col) in x_star.column_iter_mut().enumerate() {
        if w[j] == 0.0 {
            col.fill(0.0);
            continue;
        }
        apply_d_star(d, &sqrt_d, sum_d, col.as_mut_slice());
        col *= w[j];
    }
    let mut y_star = &data.x_std * mle.beta();
    apply_d_star(d, &sqrt_d, sum_d, y_star.as_mut_slice());

    let gram = x_star.tr_mul(&x_star);
    let xty = x_star.tr_mul(&y_star);
    let col_norms = gram.diagonal();
    WorkingData { x_star, y_star, w, col_norms, gram, xty }
}

/// `sgn(z) (|z| - r)_+`.
pub fn soft_threshold(z: f64, r: f64) -> f64 {
    if z > r {
        z - r
    } else if z < -r {
        z + r
    } else {
        0.0
    }
}

/// Lasso objective on the working data: `||y* - X* b||^2 / (2n) + lambda ||b||_1`.
pub fn lasso_objective(wd: &WorkingData, beta: &DVector<f64>, lambda: f64) -> f64 {
    let r = &wd.y_star - &wd.x_star * beta;
    r.norm_squared() / (2.0 * wd.n() as f64) + lambda * beta.lp_norm(1)
}

/// `sum_i (y*_i - x*_i' b) x*_ij` for every j.
pub fn working_gradient(wd: &WorkingData, beta: &DVector<f64>) -> DVector<f64> {
    &wd.xty - &wd.gram * beta
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdOptions {
    /// Stop once the largest coordinate change in a sweep is below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for CdOptions {
    fn default() -> Self {
        CdOptions { tol: 1e-9, max_sweeps: 10_000 }
    }
}

pub fn coordinate_descent(wd: &WorkingData, lambda: f64) -> Result<DVector<f64>> {
    coordinate_descent_from(wd, lambda, &DVector::zeros(wd.p()), &CdOptions::default())
}

/// Cyclic coordinate descent from `init`. Running out of sweeps yields
/// [`Error::NoConvergence`] carrying the last iterate.
pub fn coordinate_descent_from(
    wd: &WorkingData,
    lambda: f64,
    init: &DVector<f64>,
    opts: &CdOptions,
) -> Result<DVector<f64>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {lambda}")));
    }
    let p = wd.p();
    if init.len() != p {
        return Err(Error::DimensionMismatch(format!("init has {} entries, expected {p}", init.len())));
    }
    let nl = wd.n() as f64 * lambda;
    let mut beta = init.clone();
    for j in 0..p {
        if wd.col_norms[j] <= 0.0 {
            beta[j] = 0.0;
        }
    }
    // grad_j = c_j - sum_k G_jk beta_k, kept current across updates
    let mut grad = working_gradient(wd, &beta);
    for _ in 0..opts.max_sweeps {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let gjj = wd.col_norms[j];
            if gjj <= 0.0 {
                continue;
            }
            let old = beta[j];
            let new = soft_threshold((grad[j] + gjj * old) / gjj, nl / gjj);
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                grad.axpy(-delta, &wd.gram.column(j), 1.0);
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < opts.tol {
            return Ok(beta);
        }
    }
    Err(Error::NoConvergence { beta, sweeps: opts.max_sweeps })
}

/// The one-step estimate `gamma^(1)` at a given lambda.
#[derive(Debug, Clone)]
pub struct OneStepFit {
    /// `(alpha^(1), beta^(1))`.
    pub gamma1: DVector<f64>,
    pub lambda: f64,
    /// Lasso solution on the working data.
    pub beta_star: DVector<f64>,
    /// 0-based covariate indices with `beta^(1)_j != 0`.
    pub active_set: Vec<usize>,
    /// Positions in gamma: the intercept (0) and `j + 1` for active `j`.
    pub b_set: Vec<usize>,
}

impl OneStepFit {
    pub fn p(&self) -> usize {
        self.beta_star.len()
    }

    pub fn alpha(&self) -> f64 {
        self.gamma1[0]
    }

    pub fn beta(&self) -> DVector<f64> {
        self.gamma1.rows(1, self.p()).into_owned()
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.gamma1[j + 1] != 0.0
    }
}

pub fn one_step_fit(mle: &MleFit, data: &Dataset, lambda: f64) -> Result<OneStepFit> {
    let wd = build_working_data(mle, data);
    let beta_star = coordinate_descent(&wd, lambda)?;
    Ok(finish_one_step(mle, data, &wd, beta_star, lambda))
}

/// Steps 3 and 4: back-transform the working solution and update the
/// intercept.
pub fn finish_one_step(
    mle: &MleFit,
    data: &Dataset,
    wd: &WorkingData,
    beta_star: DVector<f64>,
    lambda: f64,
) -> OneStepFit {
    let p = wd.p();
    let beta1 = beta_star.component_mul(&wd.w);
    let diff = mle.beta() - &beta1;
    let shift = &data.x_std * diff;
    let alpha1 = mle.d0.dot(&shift) / mle.d0.sum() + mle.alpha();

    let mut gamma1 = DVector::zeros(p + 1);
    gamma1[0] = alpha1;
    gamma1.rows_mut(1, p).copy_from(&beta1);
    let active_set: Vec<usize> = (0..p).filter(|&j| beta1[j] != 0.0).collect();
    let b_set = std::iter::once(0).chain(active_set.iter().map(|j| j + 1)).collect();
    OneStepFit { gamma1, lambda, beta_star, active_set, b_set }
}
