//! Simulation study driver: data generation, replications and aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariates::CovariateModel;
use crate::error::{Error, Result};
use crate::glm::{fit_mle, sigmoid, standardize, Dataset, GlmFamily};
use crate::inference::{asymptotic_ci, bootstrap_ci, debiased_quantities, mle_ci, old_two_step_ci, two_step_ci, IntervalSet};
use crate::onestep::one_step_fit;
use crate::selection::selection_profile;
use crate::signal::{identify, IdentifyOptions, SignalClass};
use crate::stats::{median, mix_seed};
use crate::tuning::{select_lambda, TuningOptions};

/// Data-generating process: AR(1) Gaussian covariates and slopes
/// `(1, 1, 0.5, theta, 0.3 x q, 0, ..., 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub alpha0: f64,
    pub theta: f64,
    pub q: usize,
    pub family: GlmFamily,
    /// Master seed; replication `r` uses `mix_seed(seed, r)`.
    pub seed: u64,
}

impl DgpConfig {
    pub fn new(n: usize, p: usize, rho: f64, theta: f64, seed: u64) -> Self {
        DgpConfig { n, p, rho, alpha0: 0.5, theta, q: 0, family: GlmFamily::Logistic, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 4 + self.q {
            return Err(Error::InvalidArgument(format!("need p >= 4 + q, got p={} q={}", self.p, self.q)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidArgument(format!("rho must be in [0, 1), got {}", self.rho)));
        }
        if self.n <= self.p + 1 {
            return Err(Error::InvalidArgument(format!("need n > p + 1, got n={} p={}", self.n, self.p)));
        }
        Ok(())
    }

    pub fn beta0(&self) -> DVector<f64> {
        DVector::from_fn(self.p, |j, _| match j {
            0 | 1 => 1.0,
            2 => 0.5,
            3 => self.theta,
            j if j < 4 + self.q => 0.3,
            _ => 0.0,
        })
    }

    /// `(alpha0, beta0)`.
    pub fn gamma0(&self) -> DVector<f64> {
        let mut g = DVector::zeros(self.p + 1);
        g[0] = self.alpha0;
        g.rows_mut(1, self.p).copy_from(&self.beta0());
        g
    }

    pub fn covariate_model(&self) -> CovariateModel {
        CovariateModel::GaussianAr1 { rho: self.rho, p: self.p }
    }
}

/// Draws one dataset. The response is generated from the standardized
/// covariates, so `gamma0` is the truth on the fitting scale.
pub fn generate_dataset(cfg: &DgpConfig, rep_seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    simulate_data(&cfg.covariate_model(), &cfg.family, cfg.alpha0, &cfg.beta0(), cfg.n, rep_seed)
}

/// Covariates from `cm`, response from `family` at `alpha0 + x_std' beta0`.
pub fn simulate_data(
    cm: &CovariateModel,
    family: &GlmFamily,
    alpha0: f64,
    beta0: &DVector<f64>,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if beta0.len() != cm.p() {
        return Err(Error::DimensionMismatch(format!("beta0 has {} entries, p={}", beta0.len(), cm.p())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_raw = cm.sampler()?.sample(&mut rng, n);
    let (x_std, _, _) = standardize(&x_raw)?;
    let eta = &x_std * beta0;
    let y = DVector::from_fn(n, |i, _| {
        let mu = alpha0 + eta[i];
        match family {
            GlmFamily::Logistic => f64::from(u8::from(rng.random::<f64>() < sigmoid(mu))),
            GlmFamily::Poisson => Poisson::new(mu.exp()).map(|d| d.sample(&mut rng)).unwrap_or(0.0),
            GlmFamily::Gaussian { sigma2 } => {
                Normal::new(mu, sigma2.unwrap_or(1.0).sqrt()).map(|d| d.sample(&mut rng)).unwrap_or(mu)
            }
        }
    });
    Dataset::new(x_raw, y, family)
}

/// Interval methods a simulation can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Two-step: de-biased for strong, MLE otherwise.
    Proposed,
    /// Two-step without intervals for noise covariates.
    OldTwostep,
    /// De-biased one-step on every selected covariate.
    Asym,
    Mle,
    /// Paired bootstrap percentile.
    Bootstrap,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Proposed, Method::OldTwostep, Method::Asym, Method::Mle, Method::Bootstrap];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::OldTwostep => "old_twostep",
            Method::Asym => "asym",
            Method::Mle => "mle",
            Method::Bootstrap => "bootstrap",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub reps: usize,
    pub methods: Vec<Method>,
    pub identify: IdentifyOptions,
    pub grid_size: usize,
    pub folds: usize,
    pub bootstrap_b: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            reps: 200,
            methods: vec![Method::Proposed, Method::OldTwostep, Method::Asym, Method::Mle],
            identify: IdentifyOptions::default(),
            grid_size: 100,
            folds: 5,
            bootstrap_b: 1000,
        }
    }
}

/// Everything one replication contributes to the report.
#[derive(Debug, Clone)]
pub struct Replication {
    pub lambda: f64,
    pub lambda_bic: f64,
    pub lambda_cv: f64,
    pub selected: Vec<bool>,
    pub labels: Vec<SignalClass>,
    pub p_hat: Vec<f64>,
    pub intervals: BTreeMap<Method, IntervalSet>,
}

pub fn run_replication(cfg: &DgpConfig, opts: &SimOptions, rep: usize) -> Result<Replication> {
    let rep_seed = mix_seed(cfg.seed, rep as u64);
    let data = generate_dataset(cfg, mix_seed(rep_seed, 0))?;
    let mle = fit_mle(&cfg.family, &data)?;
    let tuning = TuningOptions { grid_size: opts.grid_size, folds: opts.folds, seed: mix_seed(rep_seed, 1) };
    let choice = select_lambda(&mle, &data, &tuning)?;
    let fit = one_step_fit(&mle, &data, choice.lambda)?;
    let profile = selection_profile(&mle, &data, choice.lambda)?;
    let id = identify(&profile.p_hat, &fit, &opts.identify)?;
    let dq = debiased_quantities(&mle, &fit, &data)?;
    let alpha = opts.identify.alpha;

    let mut intervals = BTreeMap::new();
    for &m in &opts.methods {
        let set = match m {
            Method::Proposed => two_step_ci(&mle, &fit, &dq, &id.classification, alpha)?,
            Method::OldTwostep => old_two_step_ci(&mle, &fit, &dq, &id.classification, alpha)?,
            Method::Asym => asymptotic_ci(&fit, &dq, alpha)?,
            Method::Mle => mle_ci(&mle, alpha)?,
            Method::Bootstrap => {
                bootstrap_ci(&mle.family, &data, opts.bootstrap_b, alpha, mix_seed(rep_seed, 2))?.intervals
            }
        };
        intervals.insert(m, set);
    }
    Ok(Replication {
        lambda: choice.lambda,
        lambda_bic: choice.lambda_bic,
        lambda_cv: choice.lambda_cv,
        selected: (0..cfg.p).map(|j| fit.is_active(j)).collect(),
        labels: id.classification.labels,
        p_hat: profile.p_hat,
        intervals,
    })
}

/// Per-coordinate interval statistics for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    /// Replications that produced an interval.
    pub intervals: Vec<usize>,
    pub covered: Vec<usize>,
    /// Over replications with an interval; `None` when there were none.
    pub coverage: Vec<Option<f64>>,
    pub mean_width: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: DgpConfig,
    pub options: SimOptions,
    pub reps: usize,
    pub succeeded: usize,
    /// Failed replications by error kind.
    pub failures: BTreeMap<String, usize>,
    pub selection_freq: Vec<f64>,
    pub strong_freq: Vec<f64>,
    pub weak_freq: Vec<f64>,
    pub noise_freq: Vec<f64>,
    pub median_p_hat: Vec<Option<f64>>,
    pub methods: BTreeMap<Method, MethodSummary>,
    pub lambdas: Vec<f64>,
    pub lambdas_bic: Vec<f64>,
    pub lambdas_cv: Vec<f64>,
}

impl SimulationReport {
    pub fn failed(&self) -> usize {
        self.reps - self.succeeded
    }

    /// Rate of non-noise labels over the coordinates whose true slope is 0.
    pub fn false_positive_rate(&self) -> Option<f64> {
        let beta = self.config.beta0();
        let zeros: Vec<usize> = (0..self.config.p).filter(|&j| beta[j] == 0.0).collect();
        if zeros.is_empty() || self.succeeded == 0 {
            return None;
        }
        Some(zeros.iter().map(|&j| 1.0 - self.noise_freq[j]).sum::<f64>() / zeros.len() as f64)
    }
}

/// Runs `opts.reps` replications in parallel and merges them in replication
/// order, so the report does not depend on the thread count.
pub fn run_monte_carlo(cfg: &DgpConfig, opts: &SimOptions) -> Result<SimulationReport> {
    cfg.validate()?;
    if opts.reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    let outcomes: Vec<Result<Replication>> =
        (0..opts.reps).into_par_iter().map(|r| run_replication(cfg, opts, r)).collect();
    Ok(aggregate(cfg, opts, outcomes))
}

pub fn aggregate(cfg: &DgpConfig, opts: &SimOptions, outcomes: Vec<Result<Replication>>) -> SimulationReport {
    let p = cfg.p;
    let beta0 = cfg.beta0();
    let mut failures = BTreeMap::new();
    let mut ok = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => ok.push(r),
            Err(e) => *failures.entry(e.kind().to_string()).or_insert(0) += 1,
        }
    }
    let s = ok.len();
    let freq = |f: &dyn Fn(&Replication, usize) -> bool| -> Vec<f64> {
        (0..p)
            .map(|j| if s == 0 { 0.0 } else { ok.iter().filter(|r| f(r, j)).count() as f64 / s as f64 })
            .collect()
    };
    let selection_freq = freq(&|r, j| r.selected[j]);
    let strong_freq = freq(&|r, j| r.labels[j] == SignalClass::Strong);
    let weak_freq = freq(&|r, j| r.labels[j] == SignalClass::Weak);
    let noise_freq = freq(&|r, j| r.labels[j] == SignalClass::Noise);
    let median_p_hat = (0..p).map(|j| median(&ok.iter().map(|r| r.p_hat[j]).collect::<Vec<_>>())).collect();

    let mut methods = BTreeMap::new();
    for &m in &opts.methods {
        let mut intervals = vec![0; p];
        let mut covered = vec![0; p];
        let mut width = vec![0.0; p];
        for r in &ok {
            for (j, iv) in r.intervals[&m].intervals.iter().enumerate() {
                if let (Some(w), Some(c)) = (iv.width(), iv.contains(beta0[j])) {
                    intervals[j] += 1;
                    covered[j] += usize::from(c);
                    width[j] += w;
                }
            }
        }
        let coverage = (0..p).map(|j| (intervals[j] > 0).then(|| covered[j] as f64 / intervals[j] as f64)).collect();
        let mean_width = (0..p).map(|j| (intervals[j] > 0).then(|| width[j] / intervals[j] as f64)).collect();
        methods.insert(m, MethodSummary { intervals, covered, coverage, mean_width });
    }

    SimulationReport {
        config: *cfg,
        options: opts.clone(),
        reps: s + failures.values().sum::<usize>(),
        succeeded: s,
        failures,
        selection_freq,
        strong_freq,
        weak_freq,
        noise_freq,
        median_p_hat,
        methods,
        lambdas: ok.iter().map(|r| r.lambda).collect(),
        lambdas_bic: ok.iter().map(|r| r.lambda_bic).collect(),
        lambdas_cv: ok.iter().map(|r| r.lambda_cv).collect(),
    }
}

/// Fraction of successful replications that selected covariate `j`.
pub fn empirical_selection_prob(report: &SimulationReport, j: usize) -> f64 {
    report.selection_freq[j]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub method: Method,
    /// 0-based covariate index.
    pub coordinate: usize,
    pub intervals: usize,
    /// Percent.
    pub coverage: Option<f64>,
    /// Mean width times 100.
    pub width: Option<f64>,
}

pub fn coverage_summary(report: &SimulationReport) -> Vec<CoverageRow> {
    let mut rows = Vec::new();
    for (&method, s) in &report.methods {
        for j in 0..report.config.p {
            rows.push(CoverageRow {
                method,
                coordinate: j,
                intervals: s.intervals[j],
                coverage: s.coverage[j].map(|c| 100.0 * c),
                width: s.mean_width[j].map(|w| 100.0 * w),
            });
        }
    }
    rows
}

/// Six significant digits, `%g` style, locale independent. `NA` for missing
/// or non-finite values.
pub fn format_sig6(v: Option<f64>) -> String {
    let Some(x) = v.filter(|x| x.is_finite()) else {
        return "NA".to_string();
    };
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mant.to_string()), exp.abs())
    }
}

/// One row per method and coordinate (1-based in the output).
pub fn coverage_tsv(report: &SimulationReport) -> String {
    let mut out = String::from("method\tcoordinate\tintervals\tcoverage_pct\twidth_x100\tselection_freq\tstrong\tweak\tnoise\n");
    for row in coverage_summary(report) {
        let j = row.coordinate;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            row.method.name(),
            j + 1,
            row.intervals,
            format_sig6(row.coverage),
            format_sig6(row.width),
            format_sig6(Some(report.selection_freq[j])),
            format_sig6(Some(report.strong_freq[j])),
            format_sig6(Some(report.weak_freq[j])),
            format_sig6(Some(report.noise_freq[j])),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{CiMethod, Interval};

    #[test]
    fn beta_template() {
        let mut cfg = DgpConfig::new(100, 8, 0.0, 0.4, 1);
        cfg.q = 2;
        assert_eq!(cfg.beta0().as_slice(), &[1.0, 1.0, 0.5, 0.4, 0.3, 0.3, 0.0, 0.0]);
        cfg.q = 5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn generated_correlations() {
        let cfg = DgpConfig::new(5000, 4, 0.5, 0.0, 1);
        let d = generate_dataset(&cfg, 7).unwrap();
        let c = d.x_std.column(0).dot(&d.x_std.column(1)) / 4999.0;
        assert!((c - 0.5).abs() < 0.05, "{c}");
        let cfg = DgpConfig::new(5000, 4, 0.0, 0.0, 1);
        let d = generate_dataset(&cfg, 8).unwrap();
        for (a, b) in [(0, 1), (0, 3), (2, 3)] {
            let c = d.x_std.column(a).dot(&d.x_std.column(b)) / 4999.0;
            assert!(c.abs() < 0.1);
        }
    }

    #[test]
    fn intercept_only_success_rate() {
        let cm = CovariateModel::GaussianAr1 { rho: 0.0, p: 3 };
        let d = simulate_data(&cm, &GlmFamily::Logistic, 0.5, &DVector::zeros(3), 5000, 5).unwrap();
        assert!((d.y.mean() - 0.6225).abs() < 0.02);
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(Some(93.8)), "93.8");
        assert_eq!(format_sig6(Some(0.1234567)), "0.123457");
        assert_eq!(format_sig6(Some(123456789.0)), "1.23457e+08");
        assert_eq!(format_sig6(Some(1e-7)), "1e-07");
        assert_eq!(format_sig6(Some(-2.5)), "-2.5");
        assert_eq!(format_sig6(Some(0.0)), "0");
        assert_eq!(format_sig6(Some(100.0)), "100");
        assert_eq!(format_sig6(Some(999999.5)), "1e+06");
        assert_eq!(format_sig6(None), "NA");
        assert_eq!(format_sig6(Some(f64::NAN)), "NA");
    }

    fn synthetic(covers: &[Option<bool>]) -> Replication {
        let intervals = covers
            .iter()
            .map(|c| match c {
                None => Interval::absent(),
                Some(true) => Interval { method: CiMethod::Mle, bounds: Some((-1.0, 2.0)) },
                Some(false) => Interval { method: CiMethod::Mle, bounds: Some((5.0, 6.0)) },
            })
            .collect();
        let p = covers.len();
        Replication {
            lambda: 0.1,
            lambda_bic: 0.1,
            lambda_cv: 0.1,
            selected: vec![true; p],
            labels: vec![SignalClass::Weak; p],
            p_hat: vec![0.5; p],
            intervals: BTreeMap::from([(Method::Mle, IntervalSet { alpha: 0.05, intervals })]),
        }
    }

    #[test]
    fn aggregation_counts() {
        let cfg = DgpConfig::new(100, 4, 0.0, 0.0, 1);
        let opts = SimOptions { reps: 4, methods: vec![Method::Mle], ..SimOptions::default() };
        let outs = vec![
            Ok(synthetic(&[Some(true), Some(false), None, Some(true)])),
            Ok(synthetic(&[Some(true), Some(true), None, Some(false)])),
            Ok(synthetic(&[Some(false), Some(true), None, Some(false)])),
            Err(Error::SingularSystem),
        ];
        let rep = aggregate(&cfg, &opts, outs);
        assert_eq!(rep.succeeded, 3);
        assert_eq!(rep.failures["singular_system"], 1);
        let m = &rep.methods[&Method::Mle];
        assert_eq!(m.coverage[0], Some(2.0 / 3.0));
        assert_eq!(m.coverage[2], None);
        assert_eq!(m.mean_width[2], None);
        let rows = coverage_summary(&rep);
        assert!((rows[1].coverage.unwrap() - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(rows[2].coverage, None);
        assert!((rows[0].width.unwrap() - 700.0 / 3.0).abs() < 1e-9);
        assert!(coverage_tsv(&rep).contains("mle\t3\t0\tNA\tNA"));
    }
}
