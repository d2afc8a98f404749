//! Tuning-parameter selection: BIC and K-fold cross-validation over a
//! log-spaced grid, combined by their midpoint.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{fit_mle, log_likelihood, Dataset, GlmFamily, MleFit};
use crate::onestep::{build_working_data, coordinate_descent_from, finish_one_step, CdOptions, OneStepFit, WorkingData};

/// Ratio between the smallest and largest grid value.
pub const GRID_RATIO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningOptions {
    pub grid_size: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for TuningOptions {
    fn default() -> Self {
        TuningOptions { grid_size: 100, folds: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaChoice {
    /// Midpoint of the BIC and CV choices.
    pub lambda: f64,
    pub lambda_bic: f64,
    pub lambda_cv: f64,
    /// Decreasing grid the two criteria were evaluated on.
    pub grid: Vec<f64>,
    pub bic: Vec<f64>,
    /// Summed held-out deviance; `+inf` where some fold failed.
    pub cv: Vec<f64>,
}

/// `-2 loglik / n + df log(n) / n`, df = number of nonzero slopes.
pub fn bic_score(family: &GlmFamily, data: &Dataset, gamma: &DVector<f64>) -> Result<f64> {
    let n = data.n() as f64;
    let ll = log_likelihood(family, gamma, data)?;
    let df = gamma.iter().skip(1).filter(|&&b| b != 0.0).count() as f64;
    Ok(-2.0 * ll / n + df * n.ln() / n)
}

/// `size` log-spaced values from `lambda_max` down to `lambda_max * 1e-4`.
pub fn lambda_grid(lambda_max: f64, size: usize) -> Vec<f64> {
    match size {
        0 => vec![],
        1 => vec![lambda_max],
        _ => {
            let step = GRID_RATIO.ln() / (size - 1) as f64;
            (0..size).map(|k| lambda_max * (step * k as f64).exp()).collect()
        }
    }
}

/// One-step fits along a decreasing grid with warm starts. Entries are
/// `Err` where the fit failed.
pub fn fit_path(mle: &MleFit, data: &Dataset, wd: &WorkingData, grid: &[f64]) -> Vec<Result<OneStepFit>> {
    let opts = CdOptions::default();
    let mut warm = DVector::zeros(wd.p());
    grid.iter()
        .map(|&lambda| {
            let b = coordinate_descent_from(wd, lambda, &warm, &opts)?;
            warm.copy_from(&b);
            Ok(finish_one_step(mle, data, wd, b, lambda))
        })
        .collect()
}

fn argmin(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &x) in v.iter().enumerate() {
        if x.is_finite() && best.is_none_or(|b| x < v[b]) {
            best = Some(k);
        }
    }
    best
}

/// Fold label of every observation from a seeded permutation.
pub fn fold_labels(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut labels = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        labels[i] = pos % folds;
    }
    labels
}

/// Selects lambda on the full-data grid. `mle` must be the fit on `data`;
/// its resolved family (including a Gaussian plug-in variance) is used for
/// every fold.
pub fn select_lambda(mle: &MleFit, data: &Dataset, opts: &TuningOptions) -> Result<LambdaChoice> {
    if opts.folds < 2 || opts.folds > data.n() {
        return Err(Error::InvalidArgument(format!("folds must be in 2..=n, got {}", opts.folds)));
    }
    if opts.grid_size == 0 {
        return Err(Error::InvalidArgument("grid_size must be positive".into()));
    }
    let family = mle.family;
    let wd = build_working_data(mle, data);
    let lmax = wd.lambda_max();
    if !(lmax > 0.0) {
        return Err(Error::TuningFailed("lambda_max is zero".into()));
    }
    let grid = lambda_grid(lmax, opts.grid_size);

    let bic: Vec<f64> = fit_path(mle, data, &wd, &grid)
        .into_iter()
        .map(|f| f.and_then(|f| bic_score(&family, data, &f.gamma1)).unwrap_or(f64::INFINITY))
        .collect();

    let labels = fold_labels(data.n(), opts.folds, opts.seed);
    let mut cv = vec![0.0; grid.len()];
    for k in 0..opts.folds {
        let train: Vec<usize> = (0..data.n()).filter(|&i| labels[i] != k).collect();
        let test: Vec<usize> = (0..data.n()).filter(|&i| labels[i] == k).collect();
        let (tr, te) = (data.select_rows(&train), data.select_rows(&test));
        let fold_fits = fit_mle(&family, &tr).map(|m| {
            let wdk = build_working_data(&m, &tr);
            fit_path(&m, &tr, &wdk, &grid)
        });
        match fold_fits {
            Ok(fits) => {
                for (c, f) in cv.iter_mut().zip(fits) {
                    *c += f
                        .and_then(|f| log_likelihood(&family, &f.gamma1, &te))
                        .map(|ll| -2.0 * ll)
                        .unwrap_or(f64::INFINITY);
                }
            }
            Err(_) => cv.iter_mut().for_each(|c| *c = f64::INFINITY),
        }
    }

    let kb = argmin(&bic).ok_or_else(|| Error::TuningFailed("every BIC candidate failed".into()))?;
    let kc = argmin(&cv).ok_or_else(|| Error::TuningFailed("every CV candidate failed".into()))?;
    let (lambda_bic, lambda_cv) = (grid[kb], grid[kc]);
    Ok(LambdaChoice { lambda: 0.5 * (lambda_bic + lambda_cv), lambda_bic, lambda_cv, grid, bic, cv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn toy(n: usize, p: usize, seed: u64) -> (Dataset, MleFit) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let y = DVector::from_fn(n, |i, _| {
            let eta = 0.3 + 2.0 * x[(i, 0)] + 0.4 * x[(i, 1)];
            (rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())) as u8 as f64
        });
        let data = Dataset::new(x, y, &GlmFamily::Logistic).unwrap();
        let mle = fit_mle(&GlmFamily::Logistic, &data).unwrap();
        (data, mle)
    }

    #[test]
    fn bic_hand_computation() {
        let x = DMatrix::from_fn(20, 2, |i, j| ((i * (j + 3)) % 7) as f64 + 0.1 * i as f64);
        let y = DVector::from_fn(20, |i, _| (i as f64 * 0.37).sin());
        let fam = GlmFamily::Gaussian { sigma2: Some(1.0) };
        let data = Dataset::new(x, y, &fam).unwrap();
        let gamma = DVector::from_vec(vec![0.1, 0.0, -0.2]);
        let mu = &data.x_tilde * &gamma;
        let rss = (&data.y - mu).norm_squared();
        let ll = -rss / 2.0 - 10.0 * (2.0 * std::f64::consts::PI).ln();
        let want = -2.0 * ll / 20.0 + 20f64.ln() / 20.0;
        assert!((bic_score(&fam, &data, &gamma).unwrap() - want).abs() < 1e-12);

        let null = DVector::from_vec(vec![0.1, 0.0, 0.0]);
        let ll0 = log_likelihood(&fam, &null, &data).unwrap();
        assert!((bic_score(&fam, &data, &null).unwrap() + 2.0 * ll0 / 20.0).abs() < 1e-12);
    }

    #[test]
    fn bic_prefers_fewer_parameters_at_equal_fit() {
        let (data, _) = toy(50, 3, 1);
        let fam = GlmFamily::Logistic;
        let a = DVector::from_vec(vec![0.0, 1e-300, 1e-300, 0.0]);
        let b = DVector::from_vec(vec![0.0, 1e-300, 1e-300, 1e-300]);
        assert!(bic_score(&fam, &data, &a).unwrap() < bic_score(&fam, &data, &b).unwrap());
    }

    #[test]
    fn grid_shape() {
        let g = lambda_grid(2.0, 5);
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 2.0);
        assert!((g[4] - 2e-4).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(lambda_grid(0.7, 1), vec![0.7]);
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let (data, mle) = toy(80, 3, 2);
        let opts = TuningOptions { grid_size: 1, folds: 4, seed: 3 };
        let c = select_lambda(&mle, &data, &opts).unwrap();
        assert_eq!(c.lambda, c.grid[0]);
        assert_eq!(c.lambda_bic, c.lambda_cv);
    }

    #[test]
    fn selection_is_deterministic_and_in_range() {
        let (data, mle) = toy(150, 4, 4);
        let opts = TuningOptions { grid_size: 30, folds: 5, seed: 11 };
        let a = select_lambda(&mle, &data, &opts).unwrap();
        let b = select_lambda(&mle, &data, &opts).unwrap();
        assert_eq!(a.lambda, b.lambda);
        assert!(a.lambda <= a.grid[0] && a.lambda >= *a.grid.last().unwrap());
        assert!(a.lambda == 0.5 * (a.lambda_bic + a.lambda_cv));
    }

    #[test]
    fn folds_are_balanced() {
        let labels = fold_labels(23, 5, 9);
        let mut counts = [0; 5];
        labels.iter().for_each(|&l| counts[l] += 1);
        assert_eq!(counts, [5, 5, 5, 4, 4]);
    }

    #[test]
    fn rejects_bad_fold_count() {
        let (data, mle) = toy(30, 2, 5);
        let opts = TuningOptions { grid_size: 5, folds: 1, seed: 0 };
        assert!(matches!(select_lambda(&mle, &data, &opts), Err(Error::InvalidArgument(_))));
    }
}
