use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use wsi_core::inference::{asymptotic_ci, bootstrap_ci, mle_ci, old_two_step_ci};
use wsi_core::sim::{coverage_summary, coverage_tsv, format_sig6, CoverageRow};
use wsi_core::stats::mix_seed;
use wsi_core::{
    debiased_quantities, fit_mle, identify, one_step_fit, run_monte_carlo, select_lambda, selection_profile, two_step_ci,
    CiMethod, Dataset, DgpConfig, GlmFamily, IdentifyOptions, Identification, MleFit, OneStepFit, SignalClass, SimOptions,
    SimulationReport, Thresholds, TuningOptions,
};

use crate::args::{ClassArgs, DataArgs, FitArgs, Format, IdentifyArgs, InferArgs, InferMethod, LambdaArg, SimulateArgs, TuneArgs};
use crate::error::{CliError, Result};
use crate::input::{load_csv, CsvData};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaInfo {
    pub value: f64,
    /// "auto", "fixed" or "fit_file".
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_bic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_cv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    /// 1-based covariate index.
    pub index: usize,
    pub name: String,
    pub estimate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleSection {
    /// Intercept followed by the slopes, on the standardized scale.
    pub gamma: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub coefficients: Vec<Coefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepSection {
    pub gamma: Vec<f64>,
    /// 1-based indices of the selected covariates.
    pub active_set: Vec<usize>,
    pub coefficients: Vec<Coefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub family: GlmFamily,
    pub n: usize,
    pub p: usize,
    pub covariates: Vec<String>,
    pub standardization: Standardization,
    pub lambda: LambdaInfo,
    pub mle: MleSection,
    pub onestep: OneStepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateRecord {
    pub index: usize,
    pub name: String,
    pub p_hat: f64,
    pub selected: bool,
    pub class: SignalClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifyDocument {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub family: GlmFamily,
    pub lambda: LambdaInfo,
    pub thresholds: Thresholds,
    /// Every covariate was selected, so the noise threshold fell back to 0.
    pub all_selected: bool,
    pub covariates: Vec<CovariateRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub index: usize,
    pub name: String,
    pub class: SignalClass,
    pub method: CiMethod,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInfo {
    pub replicates: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferDocument {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub family: GlmFamily,
    pub lambda: LambdaInfo,
    pub method: String,
    pub alpha: f64,
    pub thresholds: Thresholds,
    pub intervals: Vec<IntervalRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateDocument {
    pub schema_version: u32,
    pub command: String,
    pub report: SimulationReport,
    pub coverage: Vec<CoverageRow>,
}

/// Uses the given seed or draws one and reports it on stderr.
pub fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

/// Data, MLE and tuning parameter shared by fit, identify and infer.
struct Prepared {
    csv: CsvData,
    data: Dataset,
    mle: MleFit,
    lambda: LambdaInfo,
    seed: u64,
}

fn prepare(data_args: &DataArgs, tune: &TuneArgs, fit_file: Option<&Path>) -> Result<Prepared> {
    let seed = resolve_seed(tune.seed);
    let family = data_args.glm_family();
    let csv = load_csv(&data_args.input, &data_args.response)?;
    let data = Dataset::new(csv.x.clone(), csv.y.clone(), &family)?;
    let (mle, lambda) = match fit_file {
        Some(path) => {
            let doc = read_fit(path)?;
            check_fit_matches(path, &doc, &csv, &data, &family)?;
            let mle = MleFit::at(doc.family, DVector::from_vec(doc.mle.gamma.clone()), &data)?;
            let lambda = match tune.lambda {
                LambdaArg::Auto => LambdaInfo { source: "fit_file".into(), ..doc.lambda },
                LambdaArg::Fixed(v) => fixed(v),
            };
            (mle, lambda)
        }
        None => {
            let mle = fit_mle(&family, &data)?;
            let lambda = match tune.lambda {
                LambdaArg::Auto => {
                    let opts = TuningOptions { grid_size: tune.grid_size, folds: tune.folds, seed };
                    let c = select_lambda(&mle, &data, &opts)?;
                    LambdaInfo {
                        value: c.lambda,
                        source: "auto".into(),
                        lambda_bic: Some(c.lambda_bic),
                        lambda_cv: Some(c.lambda_cv),
                    }
                }
                LambdaArg::Fixed(v) => fixed(v),
            };
            (mle, lambda)
        }
    };
    Ok(Prepared { csv, data, mle, lambda, seed })
}

fn fixed(v: f64) -> LambdaInfo {
    LambdaInfo { value: v, source: "fixed".into(), lambda_bic: None, lambda_cv: None }
}

fn read_fit(path: &Path) -> Result<FitDocument> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    let doc: FitDocument =
        serde_json::from_str(&text).map_err(|e| CliError::BadFit { path: path.into(), message: e.to_string() })?;
    if doc.schema_version != SCHEMA_VERSION || doc.command != "fit" {
        return Err(CliError::BadFit {
            path: path.into(),
            message: format!("expected fit output with schema_version {SCHEMA_VERSION}"),
        });
    }
    Ok(doc)
}

fn check_fit_matches(path: &Path, doc: &FitDocument, csv: &CsvData, data: &Dataset, family: &GlmFamily) -> Result<()> {
    let bad = |message: String| Err(CliError::BadFit { path: path.into(), message });
    if doc.family.name() != family.name() {
        return bad(format!("fit used family {}, not {}", doc.family.name(), family.name()));
    }
    if doc.covariates != csv.names || doc.n != data.n() || doc.mle.gamma.len() != data.p() + 1 {
        return bad("fit was computed on a different data layout".into());
    }
    let same = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + y.abs()));
    if !same(&doc.standardization.means, data.col_means.as_slice()) || !same(&doc.standardization.sds, data.col_sds.as_slice()) {
        return bad("fit was computed on different data".into());
    }
    Ok(())
}

fn coefficients(names: &[String], estimates: &[f64], se: Option<&[f64]>) -> Vec<Coefficient> {
    names
        .iter()
        .enumerate()
        .map(|(j, name)| Coefficient {
            index: j + 1,
            name: name.clone(),
            estimate: estimates[j],
            std_error: se.map(|s| s[j]),
        })
        .collect()
}

pub fn fit(args: &FitArgs) -> Result<String> {
    let pr = prepare(&args.data, &args.tune, None)?;
    let os = one_step_fit(&pr.mle, &pr.data, pr.lambda.value)?;
    let p = pr.data.p();
    let se: Vec<f64> = (0..p).map(|j| pr.mle.std_error(j + 1)).collect();
    let doc = FitDocument {
        schema_version: SCHEMA_VERSION,
        command: "fit".into(),
        seed: pr.seed,
        family: pr.mle.family,
        n: pr.data.n(),
        p,
        covariates: pr.csv.names.clone(),
        standardization: Standardization {
            means: pr.data.col_means.iter().copied().collect(),
            sds: pr.data.col_sds.iter().copied().collect(),
        },
        lambda: pr.lambda.clone(),
        mle: MleSection {
            gamma: pr.mle.gamma0.iter().copied().collect(),
            loglik: pr.mle.loglik,
            converged: pr.mle.converged,
            iterations: pr.mle.iterations,
            coefficients: coefficients(&pr.csv.names, pr.mle.beta().as_slice(), Some(&se)),
        },
        onestep: onestep_section(&pr.csv.names, &os),
    };
    match args.out.format {
        Format::Json => to_json(&doc),
        Format::Tsv => {
            let mut out = String::from("index\tname\tmle\tstd_error\tonestep\tselected\n");
            for (m, o) in doc.mle.coefficients.iter().zip(&doc.onestep.coefficients) {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    m.index,
                    m.name,
                    format_sig6(Some(m.estimate)),
                    format_sig6(m.std_error),
                    format_sig6(Some(o.estimate)),
                    os.is_active(m.index - 1)
                );
            }
            Ok(out)
        }
    }
}

fn onestep_section(names: &[String], os: &OneStepFit) -> OneStepSection {
    OneStepSection {
        gamma: os.gamma1.iter().copied().collect(),
        active_set: os.active_set.iter().map(|j| j + 1).collect(),
        coefficients: coefficients(names, os.beta().as_slice(), None),
    }
}

fn identify_opts(c: &ClassArgs) -> IdentifyOptions {
    IdentifyOptions { delta1: c.delta1, tau: c.tau, alpha: c.alpha }
}

fn classify_prepared(pr: &Prepared, class: &ClassArgs) -> Result<(OneStepFit, Vec<f64>, Identification)> {
    let os = one_step_fit(&pr.mle, &pr.data, pr.lambda.value)?;
    let profile = selection_profile(&pr.mle, &pr.data, pr.lambda.value)?;
    let id = identify(&profile.p_hat, &os, &identify_opts(class))?;
    Ok((os, profile.p_hat, id))
}

pub fn identify_cmd(args: &IdentifyArgs) -> Result<String> {
    let pr = prepare(&args.data, &args.tune, args.fit.as_deref())?;
    let (os, p_hat, id) = classify_prepared(&pr, &args.class)?;
    let covariates = pr
        .csv
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| CovariateRecord {
            index: j + 1,
            name: name.clone(),
            p_hat: p_hat[j],
            selected: os.is_active(j),
            class: id.classification.labels[j],
        })
        .collect();
    let doc = IdentifyDocument {
        schema_version: SCHEMA_VERSION,
        command: "identify".into(),
        seed: pr.seed,
        family: pr.mle.family,
        lambda: pr.lambda.clone(),
        thresholds: id.thresholds,
        all_selected: id.all_selected,
        covariates,
    };
    match args.out.format {
        Format::Json => to_json(&doc),
        Format::Tsv => {
            let mut out = String::from("index\tname\tp_hat\tselected\tclass\n");
            for c in &doc.covariates {
                let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", c.index, c.name, format_sig6(Some(c.p_hat)), c.selected, c.class.name());
            }
            Ok(out)
        }
    }
}

fn method_name(m: InferMethod) -> &'static str {
    match m {
        InferMethod::TwoStep => "two_step",
        InferMethod::OldTwoStep => "old_two_step",
        InferMethod::Asym => "asym",
        InferMethod::Mle => "mle",
        InferMethod::Bootstrap => "bootstrap",
    }
}

pub fn infer(args: &InferArgs) -> Result<String> {
    let pr = prepare(&args.data, &args.tune, args.fit.as_deref())?;
    let (os, _, id) = classify_prepared(&pr, &args.class)?;
    let alpha = args.class.alpha;
    let mut bootstrap = None;
    let set = match args.method {
        InferMethod::TwoStep | InferMethod::OldTwoStep | InferMethod::Asym => {
            let dq = debiased_quantities(&pr.mle, &os, &pr.data)?;
            match args.method {
                InferMethod::TwoStep => two_step_ci(&pr.mle, &os, &dq, &id.classification, alpha)?,
                InferMethod::OldTwoStep => old_two_step_ci(&pr.mle, &os, &dq, &id.classification, alpha)?,
                _ => asymptotic_ci(&os, &dq, alpha)?,
            }
        }
        InferMethod::Mle => mle_ci(&pr.mle, alpha)?,
        InferMethod::Bootstrap => {
            let b = bootstrap_ci(&pr.mle.family, &pr.data, args.bootstrap_b, alpha, mix_seed(pr.seed, 1))?;
            bootstrap = Some(BootstrapInfo { replicates: b.replicates, failed: b.failed });
            b.intervals
        }
    };
    let intervals = set
        .intervals
        .iter()
        .enumerate()
        .map(|(j, iv)| IntervalRecord {
            index: j + 1,
            name: pr.csv.names[j].clone(),
            class: id.classification.labels[j],
            method: iv.method,
            lower: iv.bounds.map(|b| b.0),
            upper: iv.bounds.map(|b| b.1),
        })
        .collect();
    let doc = InferDocument {
        schema_version: SCHEMA_VERSION,
        command: "infer".into(),
        seed: pr.seed,
        family: pr.mle.family,
        lambda: pr.lambda.clone(),
        method: method_name(args.method).into(),
        alpha,
        thresholds: id.thresholds,
        intervals,
        bootstrap,
    };
    match args.out.format {
        Format::Json => to_json(&doc),
        Format::Tsv => {
            let mut out = String::from("index\tname\tclass\tmethod\tlower\tupper\n");
            for r in &doc.intervals {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    r.index,
                    r.name,
                    r.class.name(),
                    r.method.name(),
                    format_sig6(r.lower),
                    format_sig6(r.upper)
                );
            }
            Ok(out)
        }
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<String> {
    let seed = resolve_seed(args.seed);
    let cfg = DgpConfig { q: args.q, alpha0: args.alpha0, ..DgpConfig::new(args.n, args.p, args.rho, args.theta, seed) };
    if args.methods.is_empty() {
        return Err(CliError::Usage("--methods must name at least one method".into()));
    }
    // Validate thresholds up front rather than once per replication.
    Thresholds::new(args.class.delta1, 0.0, args.class.tau, args.class.alpha)?;
    let opts = SimOptions {
        reps: args.reps,
        methods: args.methods.clone(),
        identify: identify_opts(&args.class),
        grid_size: args.grid_size,
        folds: args.folds,
        bootstrap_b: args.bootstrap_b,
    };
    let report = run_monte_carlo(&cfg, &opts)?;
    if report.succeeded == 0 {
        let kinds: Vec<&str> = report.failures.keys().map(String::as_str).collect();
        return Err(CliError::Numerical(format!("every replication failed ({})", kinds.join(", "))));
    }
    match args.out.format {
        Format::Json => to_json(&SimulateDocument {
            schema_version: SCHEMA_VERSION,
            command: "simulate".into(),
            coverage: coverage_summary(&report),
            report,
        }),
        Format::Tsv => Ok(coverage_tsv(&report)),
    }
}

fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc).map_err(|e| CliError::Usage(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
