use nalgebra::{DMatrix, DVector};

use super::GlmFamily;
use crate::error::{Error, Result};

/// Design matrix and response for one fit.
///
/// `x_std` holds column-standardized covariates and `x_tilde = [1 | x_std]`.
/// Datasets built through [`Dataset::new`] satisfy mean 0 / sd 1 per column;
/// row subsets made with [`Dataset::select_rows`] keep the parent scaling.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x_raw: DMatrix<f64>,
    pub x_std: DMatrix<f64>,
    pub x_tilde: DMatrix<f64>,
    pub y: DVector<f64>,
    pub col_means: DVector<f64>,
    pub col_sds: DVector<f64>,
}

/// Centers each column and scales it to unit sample standard deviation
/// (n − 1 denominator).
pub fn standardize(
    x_raw: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>)> {
    let (n, p) = x_raw.shape();
    if n < 2 {
        return Err(Error::InvalidData(format!("need at least 2 rows, got {n}")));
    }
    let mut x_std = x_raw.clone();
    let mut means = DVector::zeros(p);
    let mut sds = DVector::zeros(p);
    for j in 0..p {
        let col = x_raw.column(j);
        let mean = col.mean();
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        if !(sd > 0.0) || !sd.is_finite() || sd <= 1e-12 * mean.abs() {
            return Err(Error::ConstantColumn(j));
        }
        for i in 0..n {
            x_std[(i, j)] = (x_raw[(i, j)] - mean) / sd;
        }
        means[j] = mean;
        sds[j] = sd;
    }
    Ok((x_std, means, sds))
}

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] })
}

impl Dataset {
    /// Validates the response against `family` and standardizes `x_raw`.
    pub fn new(x_raw: DMatrix<f64>, y: DVector<f64>, family: &GlmFamily) -> Result<Self> {
        Self::check_shapes(&x_raw, &y, family)?;
        let (x_std, col_means, col_sds) = standardize(&x_raw)?;
        let x_tilde = with_intercept(&x_std);
        Ok(Dataset { x_raw, x_std, x_tilde, y, col_means, col_sds })
    }

    /// Uses `x` as the standardized design without rescaling it. Intended for
    /// designs that are already on the working scale (orthonormal test
    /// designs, previously standardized data).
    pub fn from_design(x: DMatrix<f64>, y: DVector<f64>, family: &GlmFamily) -> Result<Self> {
        Self::check_shapes(&x, &y, family)?;
        let p = x.ncols();
        let x_tilde = with_intercept(&x);
        Ok(Dataset {
            x_raw: x.clone(),
            x_std: x,
            x_tilde,
            y,
            col_means: DVector::zeros(p),
            col_sds: DVector::from_element(p, 1.0),
        })
    }

    fn check_shapes(x: &DMatrix<f64>, y: &DVector<f64>, family: &GlmFamily) -> Result<()> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "x has {n} rows but y has {} entries",
                y.len()
            )));
        }
        if p == 0 {
            return Err(Error::InvalidData("no covariates".into()));
        }
        if n <= p {
            return Err(Error::InvalidData(format!("need n > p, got n={n}, p={p}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite covariate value".into()));
        }
        if let Some(i) = y.iter().position(|&v| !family.validate_response(v)) {
            return Err(Error::InvalidData(format!(
                "response {} at row {i} is not valid for the {} family",
                y[i],
                family.name()
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.x_std.nrows()
    }

    pub fn p(&self) -> usize {
        self.x_std.ncols()
    }

    /// Row subset (with repetition allowed) on the parent's scale.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)]);
        Dataset {
            x_raw: pick(&self.x_raw),
            x_std: pick(&self.x_std),
            x_tilde: pick(&self.x_tilde),
            y: DVector::from_fn(rows.len(), |i, _| self.y[rows[i]]),
            col_means: self.col_means.clone(),
            col_sds: self.col_sds.clone(),
        }
    }
}
