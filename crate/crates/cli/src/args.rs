use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wsi_core::{GlmFamily, Method};

#[derive(Debug, Parser)]
#[command(name = "wsi", version, about = "Weak signal identification and two-step inference for GLMs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// MLE, tuning parameter and one-step adaptive lasso estimates.
    Fit(FitArgs),
    /// Estimated selection probabilities and strong/weak/noise labels.
    Identify(IdentifyArgs),
    /// Confidence intervals for every covariate.
    Infer(InferArgs),
    /// Monte Carlo study on simulated logistic data.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Logistic,
    Poisson,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Tsv,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaArg {
    Auto,
    Fixed(f64),
}

fn parse_lambda(s: &str) -> Result<LambdaArg, String> {
    if s == "auto" {
        return Ok(LambdaArg::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(LambdaArg::Fixed(v)),
        _ => Err(format!("expected 'auto' or a positive number, got '{s}'")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Known Gaussian noise variance; estimated from the residuals if omitted.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Name of the response column.
    #[arg(long, default_value = "y")]
    pub response: String,
}

impl DataArgs {
    pub fn glm_family(&self) -> GlmFamily {
        match self.family {
            FamilyArg::Logistic => GlmFamily::Logistic,
            FamilyArg::Poisson => GlmFamily::Poisson,
            FamilyArg::Gaussian => GlmFamily::Gaussian { sigma2: self.sigma2 },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    /// "auto" picks the midpoint of the BIC and cross-validation choices.
    #[arg(long, default_value = "auto", value_parser = parse_lambda)]
    pub lambda: LambdaArg,
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Seed for all randomness; a fresh one is drawn and printed if omitted.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassArgs {
    #[arg(long, default_value_t = 0.99)]
    pub delta1: f64,
    /// Target false positive rate used to calibrate the noise threshold.
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Write here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub tune: TuneArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct IdentifyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub tune: TuneArgs,
    #[command(flatten)]
    pub class: ClassArgs,
    /// Reuse the MLE and lambda from an earlier `fit` JSON output.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InferMethod {
    TwoStep,
    OldTwoStep,
    Asym,
    Mle,
    Bootstrap,
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub tune: TuneArgs,
    #[command(flatten)]
    pub class: ClassArgs,
    #[arg(long, value_enum, default_value = "two-step")]
    pub method: InferMethod,
    #[arg(long = "bootstrap-b", default_value_t = 1000)]
    pub bootstrap_b: usize,
    #[arg(long)]
    pub fit: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 350)]
    pub n: usize,
    #[arg(long, default_value_t = 25)]
    pub p: usize,
    /// AR(1) correlation of the covariates.
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    /// Coefficient of the fourth covariate.
    #[arg(long)]
    pub theta: f64,
    /// Number of extra 0.3 coefficients after the fourth.
    #[arg(long, default_value_t = 0)]
    pub q: usize,
    #[arg(long, default_value_t = 0.5)]
    pub alpha0: f64,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    /// Comma-separated subset of proposed, old_twostep, asym, mle, bootstrap.
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "proposed,old_twostep,asym,mle")]
    pub methods: Vec<Method>,
    #[arg(long = "bootstrap-b", default_value_t = 1000)]
    pub bootstrap_b: usize,
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[command(flatten)]
    pub class: ClassArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: OutArgs,
}
