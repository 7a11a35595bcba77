//! `mipnoise <subcommand> --config <path> [--seed N] [--out DIR]`.
//!
//! Every subcommand writes its outputs and a `manifest.json` under the output
//! directory and prints the manifest to stdout. Flags override config keys,
//! which override defaults.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::algorithm::{BaseAlgorithm, MeanQuery, ReciprocalSum, SecondMoment};
use crate::attack::{dp_epsilon_from_eta, max_accuracy, optimal_attacker_accuracy, AttackReport};
use crate::data::{load_dataset, DatasetTable};
use crate::error::{Error, Result};
use crate::mechanisms::{privatize_laplace_dp, privatize_mip, LaplaceMechanism, MipMechanism, MipParams};
use crate::moments::{estimate_moments, exact_moments, sensitivity_exact, MomentEstimator, ResampleSize, SensitivityNorm};
use crate::noise::NoiseVariant;
use crate::rng::SeedStream;
use crate::subset::random_half_split;

use super::config::{config_hash, parse_key_values, Command, ExperimentConfig};
use super::results::emit_results;
use super::{run_fig1, run_synth, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "mipnoise", version, about = "Membership inference privacy noise calibration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Noise level versus privacy level on the pathological dataset.
    Fig1(Common),
    /// Covariance-fit error versus privacy level for raw, MIP and DP-SGD.
    Synth(Common),
    /// Estimate a moment profile and print it as JSON.
    Moments(MomentsArgs),
    /// Release one privatized output as JSON.
    Privatize(PrivatizeArgs),
    /// Monte Carlo accuracy of the Bayes attacker against a mechanism.
    AttackEval(AttackArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgName {
    Mean,
    Covariance,
    ReciprocalSum,
}

impl FromStr for AlgName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        <Self as ValueEnum>::from_str(s, false).map_err(|_| Error::validation(format!("unknown algorithm `{s}`")))
    }
}

impl AlgName {
    pub fn build(self) -> Arc<dyn BaseAlgorithm> {
        match self {
            AlgName::Mean => Arc::new(MeanQuery),
            AlgName::Covariance => Arc::new(SecondMoment),
            AlgName::ReciprocalSum => Arc::new(ReciprocalSum),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Mip,
    LaplaceDp,
}

impl FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        <Self as ValueEnum>::from_str(s, false).map_err(|_| Error::validation(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorName {
    Bootstrap,
    Exact,
}

impl FromStr for EstimatorName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        <Self as ValueEnum>::from_str(s, false).map_err(|_| Error::validation(format!("unknown estimator `{s}`")))
    }
}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub common: Common,
    /// CSV dataset, one record per row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub alg: Option<AlgName>,
    #[arg(long = "M")]
    pub order: Option<u32>,
    #[arg(long = "B")]
    pub resamples: Option<usize>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorName>,
    /// Resample half-splits of the full data instead of the training half.
    #[arg(long)]
    pub half_of_data: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PrivatizeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub alg: Option<AlgName>,
    #[arg(long, value_enum)]
    pub method: Option<MethodName>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "M")]
    pub order: Option<u32>,
    #[arg(long = "B")]
    pub resamples: Option<usize>,
    /// `density_exact` or `paper_literal`.
    #[arg(long)]
    pub variant: Option<NoiseVariant>,
    /// Laplace sensitivity; enumerated exactly when omitted.
    #[arg(long)]
    pub sensitivity: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct AttackArgs {
    #[command(flatten)]
    pub common: Common,
    /// Flat mechanism description: `data`, `alg`, `method`, `eta`, `M`,
    /// `variant`, `epsilon`, `sensitivity`. A `mechanism` key in the config
    /// file is resolved relative to that file.
    #[arg(long)]
    pub mechanism: Option<PathBuf>,
    /// `all` or a comma-separated list of record indices.
    #[arg(long)]
    pub targets: Option<String>,
    #[arg(long)]
    pub rounds: Option<usize>,
}

/// Parses arguments, runs, prints the manifest. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(manifest) => {
            println!("{}", serde_json::to_string_pretty(&manifest).expect("manifest serializes"));
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Validation(_) | Error::Malformed { .. } | Error::Capacity { .. } => 2,
                _ => 1,
            }
        }
    }
}

pub fn run(cli: &Cli) -> Result<RunManifest> {
    match &cli.command {
        Sub::Fig1(c) => run_experiment(Command::Fig1, c),
        Sub::Synth(c) => run_experiment(Command::Synth, c),
        Sub::Moments(a) => run_moments(a),
        Sub::Privatize(a) => run_privatize(a),
        Sub::AttackEval(a) => run_attack(a),
    }
}

/// Loads the config (or defaults), applies `--seed`, checks the name.
fn resolve(command: Command, common: &Common) -> Result<(ExperimentConfig, String, PathBuf)> {
    let (mut cfg, hash) = match &common.config {
        Some(path) => {
            let (cfg, text) = ExperimentConfig::load(path)?;
            (cfg, config_hash(&text))
        }
        None => {
            let cfg = ExperimentConfig::defaults(command);
            let hash = config_hash(&serde_json::to_string(&cfg)?);
            (cfg, hash)
        }
    };
    if cfg.name != command {
        return Err(Error::validation(format!(
            "config is for `{}`, not `{command}`",
            cfg.name
        )));
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, hash, out))
}

fn run_experiment(command: Command, common: &Common) -> Result<RunManifest> {
    let (cfg, hash, out) = resolve(command, common)?;
    let mut manifest = RunManifest::new(command, cfg.seed, hash);
    let stem = command.as_str();
    let (rows, detail) = match command {
        Command::Fig1 => {
            let report = run_fig1(&cfg)?;
            (report.rows, serde_json::to_value(&report.levels)?)
        }
        _ => {
            let report = run_synth(&cfg)?;
            let detail = serde_json::json!({
                "covariance": report.covariance,
                "settings": report.settings,
                "runs": report.runs,
                "noise_multipliers": report.noise_multipliers,
                "eta_is_extension": true,
            });
            (report.rows, detail)
        }
    };
    let files = emit_results(&rows, &out, stem, true)?;
    manifest.outputs.extend([files.csv, files.json, files.svg]);
    manifest.outputs.push(write_json(&out, &format!("{stem}_details.json"), &detail)?);
    manifest.write(&out)?;
    Ok(manifest)
}

fn pick<T: FromStr>(flag: Option<T>, extras: &BTreeMap<String, String>, key: &str, default: Option<T>) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match extras.get(key) {
        Some(v) => v
            .parse()
            .map_err(|_| Error::validation(format!("cannot parse `{key} = {v}`"))),
        None => default.ok_or_else(|| Error::validation(format!("missing required setting `{key}`"))),
    }
}

fn pick_opt<T: FromStr>(flag: Option<T>, extras: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => extras
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::validation(format!("cannot parse `{key} = {v}`")))
            })
            .transpose(),
    }
}

#[derive(Debug, Serialize)]
struct MomentsJson {
    #[serde(rename = "M")]
    order: u32,
    sigma: Vec<f64>,
    estimator: EstimatorName,
    /// Resamples for the bootstrap; subsets enumerated for the exact estimator.
    #[serde(rename = "B")]
    resamples: u64,
}

fn run_moments(a: &MomentsArgs) -> Result<RunManifest> {
    let (cfg, hash, out) = resolve(Command::Moments, &a.common)?;
    let x = &cfg.extras;
    let data = load_dataset(pick(a.data.clone(), x, "data", None)?)?;
    let alg = pick(a.alg, x, "alg", Some(AlgName::Mean))?.build();
    let order = pick(a.order, x, "M", Some(2))?;
    let resamples = pick(a.resamples, x, "B", Some(128))?;
    let estimator = pick(a.estimator, x, "estimator", Some(EstimatorName::Bootstrap))?;
    let half_of_data = a.half_of_data || pick(None, x, "half_of_data", Some(false))?;
    let json = match estimator {
        EstimatorName::Bootstrap => {
            let stream = SeedStream::new(cfg.seed);
            let (train, _) = random_half_split(&data, &stream)?;
            let est = MomentEstimator {
                size: if half_of_data {
                    ResampleSize::HalfOfData
                } else {
                    ResampleSize::HalfOfTrain
                },
                ..MomentEstimator::new(resamples, order)
            };
            let e = estimate_moments(&data, &train, alg.as_ref(), &est, &stream.named("moments"))?;
            MomentsJson {
                order,
                sigma: e.profile.sigma().to_vec(),
                estimator,
                resamples: resamples as u64,
            }
        }
        EstimatorName::Exact => {
            let m = exact_moments(&data, alg.as_ref(), data.len() / 2, order, true)?;
            MomentsJson {
                order,
                sigma: m.profile()?.sigma().to_vec(),
                estimator,
                resamples: m.subsets,
            }
        }
    };
    let mut manifest = RunManifest::new(Command::Moments, cfg.seed, hash);
    manifest.outputs.push(write_json(&out, "moments.json", &json)?);
    manifest.write(&out)?;
    Ok(manifest)
}

fn exact_or_given_sensitivity(data: &DatasetTable, alg: &dyn BaseAlgorithm, given: Option<f64>) -> Result<f64> {
    match given {
        Some(s) => Ok(s),
        None => sensitivity_exact(data, alg, data.len() / 2, &SensitivityNorm::Abs),
    }
}

fn run_privatize(a: &PrivatizeArgs) -> Result<RunManifest> {
    let (cfg, hash, out) = resolve(Command::Privatize, &a.common)?;
    let x = &cfg.extras;
    let data = load_dataset(pick(a.data.clone(), x, "data", None)?)?;
    let alg = pick(a.alg, x, "alg", Some(AlgName::Mean))?.build();
    let method = pick(a.method, x, "method", Some(MethodName::Mip))?;
    let eta = pick_opt(a.eta, x, "eta")?;
    let output = match method {
        MethodName::Mip => {
            let eta = eta.ok_or_else(|| Error::validation("--eta is required for the MIP method"))?;
            let order = pick(a.order, x, "M", Some(2))?;
            let mut params = MipParams::new(eta, order);
            params.variant = pick(a.variant, x, "variant", Some(NoiseVariant::default()))?;
            params.estimator = MomentEstimator::new(pick(a.resamples, x, "B", Some(128))?, order);
            privatize_mip(&data, alg.as_ref(), &params, cfg.seed)?
        }
        MethodName::LaplaceDp => {
            let epsilon = match (pick_opt(a.epsilon, x, "epsilon")?, eta) {
                (Some(e), _) => e,
                (None, Some(eta)) => dp_epsilon_from_eta(eta)?,
                (None, None) => return Err(Error::validation("--epsilon or --eta is required for laplace-dp")),
            };
            let s = exact_or_given_sensitivity(&data, alg.as_ref(), pick_opt(a.sensitivity, x, "sensitivity")?)?;
            privatize_laplace_dp(&data, alg.as_ref(), epsilon, s, cfg.seed)?
        }
    };
    let mut manifest = RunManifest::new(Command::Privatize, cfg.seed, hash);
    manifest.outputs.push(write_json(&out, "output.json", &output)?);
    manifest.write(&out)?;
    Ok(manifest)
}

/// `all` or a comma-separated index list.
pub fn parse_targets(spec: &str, n: usize) -> Result<Vec<usize>> {
    if spec.trim() == "all" {
        return Ok((0..n).collect());
    }
    let targets = spec
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::validation(format!("bad target `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(t) = targets.iter().find(|t| **t >= n) {
        return Err(Error::validation(format!("target {t} out of range for {n} records")));
    }
    if targets.is_empty() {
        return Err(Error::validation("no targets given"));
    }
    Ok(targets)
}

#[derive(Debug, Serialize)]
struct AttackSummary<'a> {
    mechanism_id: String,
    reports: &'a [AttackReport],
    max_accuracy: Option<&'a AttackReport>,
    prior_baseline: f64,
}

fn run_attack(a: &AttackArgs) -> Result<RunManifest> {
    let (cfg, hash, out) = resolve(Command::AttackEval, &a.common)?;
    let x = &cfg.extras;
    let mech_path = match (&a.mechanism, &a.common.config) {
        (Some(p), _) => p.clone(),
        (None, config) => {
            let p: PathBuf = pick(None, x, "mechanism", None)?;
            config.as_deref().map_or(p.clone(), |c| relative_to(c, &p))
        }
    };
    let text = std::fs::read_to_string(&mech_path).map_err(|e| Error::io(&mech_path, e))?;
    let m = parse_key_values(&text)?;
    let data_path = m
        .get("data")
        .map(|p| relative_to(&mech_path, Path::new(p)))
        .ok_or_else(|| Error::validation("mechanism config must set `data`"))?;
    let data = load_dataset(&data_path)?;
    let alg = pick(None, &m, "alg", Some(AlgName::Mean))?.build();
    let method = pick(None, &m, "method", Some(MethodName::Mip))?;
    let targets = parse_targets(&pick(a.targets.clone(), x, "targets", Some("all".to_string()))?, data.len())?;
    let rounds = pick(a.rounds, x, "rounds", Some(10_000))?;
    let seed = cfg.seed;

    let (id, reports) = match method {
        MethodName::Mip => {
            let eta = pick(None, &m, "eta", None)?;
            let order = pick(None, &m, "M", Some(2))?;
            let variant = pick(None, &m, "variant", Some(NoiseVariant::default()))?;
            let mech = MipMechanism::with_exact_moments(data, alg, eta, order, variant)?;
            let reports = targets
                .iter()
                .map(|&t| optimal_attacker_accuracy(&mech, t, rounds, seed))
                .collect::<Result<Vec<_>>>()?;
            (crate::mechanisms::Mechanism::id(&mech).to_string(), reports)
        }
        MethodName::LaplaceDp => {
            let epsilon = match (pick_opt(None, &m, "epsilon")?, pick_opt::<f64>(None, &m, "eta")?) {
                (Some(e), _) => e,
                (None, Some(eta)) => dp_epsilon_from_eta(eta)?,
                (None, None) => return Err(Error::validation("mechanism config needs `epsilon` or `eta`")),
            };
            let s = exact_or_given_sensitivity(&data, alg.as_ref(), pick_opt(None, &m, "sensitivity")?)?;
            let mech = LaplaceMechanism::new(data, alg, epsilon, s)?;
            let reports = targets
                .iter()
                .map(|&t| optimal_attacker_accuracy(&mech, t, rounds, seed))
                .collect::<Result<Vec<_>>>()?;
            (crate::mechanisms::Mechanism::id(&mech).to_string(), reports)
        }
    };
    let n = load_dataset(&data_path)?.len();
    let summary = AttackSummary {
        mechanism_id: id,
        reports: &reports,
        max_accuracy: max_accuracy(&reports),
        prior_baseline: AttackReport::prior_baseline(n, n / 2),
    };
    let mut manifest = RunManifest::new(Command::AttackEval, seed, hash);
    manifest.outputs.push(write_json(&out, "attack_reports.json", &summary)?);
    let csv_path = out.join("attack_reports.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| csv_error(&csv_path, e))?;
    w.write_record(["target_id", "accuracy", "stderr"]).map_err(|e| csv_error(&csv_path, e))?;
    for r in &reports {
        w.write_record([r.target_id.to_string(), r.accuracy.to_string(), r.std_error.to_string()])
            .map_err(|e| csv_error(&csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    manifest.outputs.push(csv_path);
    manifest.write(&out)?;
    Ok(manifest)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::validation(format!("{other:?}")),
    }
}

fn relative_to(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    config.parent().map_or_else(|| p.to_path_buf(), |dir| dir.join(p))
}

fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_parse() {
        assert_eq!(parse_targets("all", 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_targets("2, 0", 3).unwrap(), vec![2, 0]);
        assert!(parse_targets("3", 3).is_err());
        assert!(parse_targets("x", 3).is_err());
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "mipnoise", "privatize", "--data", "d.csv", "--alg", "reciprocal-sum", "--method", "laplace-dp",
            "--epsilon", "1", "--M", "4", "--B", "64", "--variant", "paper_literal", "--seed", "3",
        ])
        .unwrap();
        match cli.command {
            Sub::Privatize(a) => {
                assert_eq!(a.alg, Some(AlgName::ReciprocalSum));
                assert_eq!(a.method, Some(MethodName::LaplaceDp));
                assert_eq!((a.order, a.resamples), (Some(4), Some(64)));
                assert_eq!(a.variant, Some(NoiseVariant::PaperLiteral));
                assert_eq!(a.common.seed, Some(3));
            }
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["mipnoise", "fig2"]).is_err());
    }

    #[test]
    fn config_name_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cfg");
        std::fs::write(&path, "name = synth\n").unwrap();
        let common = Common {
            config: Some(path),
            seed: None,
            out: None,
        };
        assert!(resolve(Command::Fig1, &common).is_err());
        assert!(resolve(Command::Synth, &common).is_ok());
    }
}
