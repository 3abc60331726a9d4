//! The `htl` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use htl_core::features::{
    extract_features_with_reference, segment_windows, subsample_regular, FeatureKind, FeatureMatrix, Standardizer,
    WindowSpec,
};
use htl_core::harness::{
    fit_predict, grid_search, run_experiment_with, CvPlan, CvScheme, ExperimentPlan, GridPoint, GridSpec,
    MethodContext, Method, Metric, Pairing, Setting, SizeAxis, SplitPlan, TaskData,
};
use htl_core::lssvm::{train_ova, HyperParams};
use htl_core::mkal::{build_kernel_bank_from_scores, train_mkal, MkalConfig};
use htl_core::synth::{generate_synthetic_cohort, SynthConfig};
use htl_core::transfer::{optimize_beta, train_multikt, train_prior, SourceHypothesis};

use crate::dataset::{load_dataset, save_dataset};
use crate::error::{Error, Result};
use crate::exec::RayonExecutor;
use crate::features::{load_feature_dir, save_features, SubjectFeatures};
use crate::model::{ModelFile, ModelPayload};
use crate::records::save_records;
use crate::summary::{render, summarize};

/// Default worker count when `--jobs` is absent.
pub const JOBS_ENV: &str = "HTL_JOBS";

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "htl", version, about = "Hypothesis transfer learning benchmarks for windowed biosignals")]
#[command(args_override_self = true)]
pub struct Cli {
    /// JSON object of flag values; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-subject cohort.
    Synth(SynthArgs),
    /// Window and featurize every subject of a dataset.
    Features(FeaturesArgs),
    /// Train one model for one subject.
    Train(TrainArgs),
    /// Score a model on a subject's test repetitions.
    Eval(EvalArgs),
    /// Cross-validated hyperparameter search for one subject.
    Grid(GridArgs),
    /// Run a full experimental setting.
    Experiment(ExperimentArgs),
}

pub const SUBCOMMANDS: [&str; 6] = ["synth", "features", "train", "eval", "grid", "experiment"];

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method {s:?} (notransfer, prior, multikt, mkal)"))
}

fn parse_setting(s: &str) -> std::result::Result<Setting, String> {
    Setting::parse(s).ok_or_else(|| format!("unknown setting {s:?} (original, optimized, realistic)"))
}

fn parse_pairing(s: &str) -> std::result::Result<Pairing, String> {
    Pairing::parse(s).ok_or_else(|| format!("unknown pairing {s:?} (ii, aa, ai)"))
}

fn parse_kind(s: &str) -> std::result::Result<FeatureKind, String> {
    FeatureKind::parse(s).ok_or_else(|| format!("unknown feature kind {s:?} (mav, var, wl, avg, mdwt)"))
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    match s {
        "balanced" => Ok(Metric::Balanced),
        "standard" => Ok(Metric::Standard),
        _ => Metric::parse(s).ok_or_else(|| format!("unknown metric {s:?} (balanced_accuracy, accuracy)")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GridPreset {
    Original,
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CvKind {
    /// k folds over shuffled rows.
    Shuffled,
    /// One fold per repetition.
    Reps,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub intact: Option<usize>,
    #[arg(long)]
    pub amputee: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub movements: Option<u32>,
    #[arg(long)]
    pub repetitions: Option<u32>,
    #[arg(long, value_name = "HZ")]
    pub rate: Option<f64>,
    #[arg(long)]
    pub burst_samples: Option<usize>,
    #[arg(long)]
    pub rest_samples: Option<usize>,
    /// Inter-subject shift.
    #[arg(long)]
    pub shift: Option<f64>,
    #[arg(long)]
    pub noise_intact: Option<f64>,
    #[arg(long)]
    pub noise_amputee: Option<f64>,
    #[arg(long)]
    pub amputee_attenuation: Option<f64>,
    #[arg(long)]
    pub attenuated_channels: Option<usize>,
    #[arg(long)]
    pub repetition_jitter: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    pub kind: FeatureKind,
    #[arg(long, default_value_t = 200.0)]
    pub window_ms: f64,
    #[arg(long, default_value_t = 10.0)]
    pub step_ms: f64,
    /// Repetitions whose windows set the batch statistics of `avg`.
    #[arg(long, value_delimiter = ',', default_value = "1,3,4,6")]
    pub reference_reps: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "DIR")]
    pub features: PathBuf,
    #[arg(long)]
    pub subject: String,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long = "C", value_name = "C")]
    pub c: f64,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Directory of No-Transfer model files used as source hypotheses.
    #[arg(long, value_name = "DIR")]
    pub sources: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,3,4,6")]
    pub train_reps: Vec<u32>,
    #[arg(long, default_value_t = 1)]
    pub subsample: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = MkalConfig::DEFAULT_P)]
    pub mkal_p: f64,
    #[arg(long, default_value_t = MkalConfig::DEFAULT_EPOCHS)]
    pub mkal_epochs: usize,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub features: PathBuf,
    /// Defaults to the subject the model was trained on.
    #[arg(long)]
    pub subject: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "2,5")]
    pub test_reps: Vec<u32>,
    #[arg(long, value_parser = parse_metric, default_value = "balanced_accuracy")]
    pub metric: Metric,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, value_name = "DIR")]
    pub features: PathBuf,
    #[arg(long)]
    pub subject: String,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long, value_enum, default_value = "original")]
    pub grid: GridPreset,
    /// Comma-separated C values replacing the preset's.
    #[arg(long = "C", value_name = "LIST", value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
    /// Comma-separated gamma values replacing the preset's.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "shuffled")]
    pub cv: CvKind,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, value_parser = parse_metric, default_value = "balanced_accuracy")]
    pub metric: Metric,
    #[arg(long, value_delimiter = ',', default_value = "1,3,4,6")]
    pub train_reps: Vec<u32>,
    #[arg(long, default_value_t = 1)]
    pub subsample: usize,
    #[arg(long, default_value_t = 1)]
    pub tuning_subsample: usize,
    #[arg(long, value_name = "DIR")]
    pub sources: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = MkalConfig::DEFAULT_P)]
    pub mkal_p: f64,
    #[arg(long, default_value_t = MkalConfig::DEFAULT_EPOCHS)]
    pub mkal_epochs: usize,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_setting)]
    pub setting: Setting,
    #[arg(long, value_parser = parse_pairing)]
    pub pairing: Pairing,
    #[arg(long, value_parser = parse_method, value_delimiter = ',', required = true)]
    pub methods: Vec<Method>,
    #[arg(long)]
    pub seed: u64,
    /// Record file to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Training sample counts (original and optimized settings).
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub train_reps: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    pub test_reps: Option<Vec<u32>>,
    #[arg(long = "grid-C", value_name = "LIST", value_delimiter = ',')]
    pub grid_c: Option<Vec<f64>>,
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub grid_gamma: Option<Vec<f64>>,
    /// Use this C for every target instead of the cross-subject choice.
    #[arg(long = "fixed-C", requires = "fixed_gamma")]
    pub fixed_c: Option<f64>,
    #[arg(long, requires = "fixed_c")]
    pub fixed_gamma: Option<f64>,
    #[arg(long, value_parser = parse_kind)]
    pub feature_kind: Option<FeatureKind>,
    #[arg(long)]
    pub window_ms: Option<f64>,
    #[arg(long)]
    pub step_ms: Option<f64>,
    #[arg(long)]
    pub train_subsample: Option<usize>,
    #[arg(long)]
    pub tuning_subsample: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub mkal_p: Option<f64>,
    #[arg(long)]
    pub mkal_epochs: Option<usize>,
    #[arg(long)]
    pub allow_mkal_realistic: bool,
    /// Worker threads; defaults to the HTL_JOBS environment variable, else
    /// the number of CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    run(std::env::args_os().collect())
}

/// Parses `argv` (including the program name), runs, and reports errors
/// as a single `error[class]: message` line.
pub fn run(argv: Vec<OsString>) -> ExitCode {
    let cli = match parse(argv) {
        Ok(cli) => cli,
        Err(Parsed::Clap(e)) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.kind().as_str().map(str::to_string).unwrap_or_else(|| "invalid arguments".into());
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or(&text).trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(EXIT_USAGE);
        }
        Err(Parsed::Other(e)) => return report(&e),
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> ExitCode {
    let message = e.to_string().replace('\n', " ");
    eprintln!("error[{}]: {message}", e.class());
    if e.class() == "usage" {
        ExitCode::from(EXIT_USAGE)
    } else {
        ExitCode::from(EXIT_RUNTIME)
    }
}

enum Parsed {
    Clap(clap::Error),
    Other(Error),
}

/// Finds `--config`, then parses with the file's flags placed before the
/// user's so the command line wins.
fn parse(argv: Vec<OsString>) -> std::result::Result<Cli, Parsed> {
    let Some(path) = config_path(&argv) else {
        return Cli::try_parse_from(&argv).map_err(Parsed::Clap);
    };
    let extra = config_args(&path).map_err(Parsed::Other)?;
    let Some(at) = argv.iter().position(|a| SUBCOMMANDS.iter().any(|s| a == *s)) else {
        // No subcommand: let clap produce the usage error.
        return Cli::try_parse_from(&argv).map_err(Parsed::Clap);
    };
    let mut merged: Vec<OsString> = argv[..=at].to_vec();
    merged.extend(extra.into_iter().map(OsString::from));
    merged.extend(argv[at + 1..].iter().cloned());
    Cli::try_parse_from(&merged).map_err(Parsed::Clap)
}

/// Value of the last `--config FILE` or `--config=FILE`.
fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut found = None;
    let mut args = argv.iter().skip(1);
    while let Some(a) = args.next() {
        let Some(a) = a.to_str() else { continue };
        if a == "--" {
            break;
        }
        if a == "--config" {
            found = args.next().map(PathBuf::from);
        } else if let Some(v) = a.strip_prefix("--config=") {
            found = Some(PathBuf::from(v));
        }
    }
    found
}

/// Flags from a JSON object: `true` becomes a bare flag, `false` is
/// dropped, arrays are comma-joined.
fn config_args(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::format(path, 1, "config must be a JSON object of flag values"))?;
    let scalar = |v: &serde_json::Value| -> Option<String> {
        match v {
            serde_json::Value::String(s) => Some(s.clone()),
            serde_json::Value::Number(n) => Some(n.to_string()),
            _ => None,
        }
    };
    let mut out = Vec::new();
    for (key, v) in obj {
        if key == "config" {
            return Err(Error::format(path, 1, "config files cannot name another config"));
        }
        let flag = format!("--{key}");
        match v {
            serde_json::Value::Bool(true) => out.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::Array(items) => {
                let parts: Option<Vec<String>> = items.iter().map(scalar).collect();
                let parts = parts.ok_or_else(|| Error::format(path, 1, format!("{key}: list items must be strings or numbers")))?;
                out.push(flag);
                out.push(parts.join(","));
            }
            v => {
                let s = scalar(v).ok_or_else(|| Error::format(path, 1, format!("{key}: unsupported value")))?;
                out.push(flag);
                out.push(s);
            }
        }
    }
    Ok(out)
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Features(a) => features(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Grid(a) => grid(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        intact: a.intact.unwrap_or(d.intact),
        amputee: a.amputee.unwrap_or(d.amputee),
        channels: a.channels.unwrap_or(d.channels),
        movements: a.movements.unwrap_or(d.movements),
        repetitions: a.repetitions.unwrap_or(d.repetitions),
        sampling_rate: a.rate.unwrap_or(d.sampling_rate),
        burst_samples: a.burst_samples.unwrap_or(d.burst_samples),
        rest_samples: a.rest_samples.unwrap_or(d.rest_samples),
        shift: a.shift.unwrap_or(d.shift),
        noise_intact: a.noise_intact.unwrap_or(d.noise_intact),
        noise_amputee: a.noise_amputee.unwrap_or(d.noise_amputee),
        amputee_attenuation: a.amputee_attenuation.unwrap_or(d.amputee_attenuation),
        attenuated_channels: a.attenuated_channels.unwrap_or(d.attenuated_channels),
        repetition_jitter: a.repetition_jitter.unwrap_or(d.repetition_jitter),
        shared_subject_streams: d.shared_subject_streams,
        seed: a.seed,
    };
    let recs = generate_synthetic_cohort(&cfg)?;
    let manifest = save_dataset(&a.out, &recs)?;
    println!("wrote {} subjects to {}", manifest.subjects.len(), a.out.display());
    Ok(())
}

fn features(a: FeaturesArgs) -> Result<()> {
    let (_, recs) = load_dataset(&a.data)?;
    std::fs::create_dir_all(&a.out).map_err(Error::io(&a.out))?;
    let spec = WindowSpec {
        length_ms: a.window_ms,
        increment_ms: a.step_ms,
    };
    for rec in &recs {
        let windows = segment_windows(rec, &spec)?;
        let fm = extract_features_with_reference(&windows, a.kind, |r| a.reference_reps.contains(&r))?;
        let path = save_features(
            &a.out,
            &SubjectFeatures {
                subject_id: rec.subject_id.clone(),
                kind: rec.subject_kind,
                feature_kind: a.kind,
                features: fm,
            },
        )?;
        println!("{}\t{}", rec.subject_id, path.display());
    }
    Ok(())
}

fn subject_features(dir: &Path, subject: &str) -> Result<SubjectFeatures> {
    load_feature_dir(dir)?
        .into_iter()
        .find(|s| s.subject_id == subject)
        .ok_or_else(|| Error::Usage(format!("no features for subject {subject:?} in {}", dir.display())))
}

/// No-Transfer models in `dir` other than `exclude`, ordered by subject id.
fn load_sources(dir: &Path, exclude: &str) -> Result<Vec<SourceHypothesis>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(Error::io(dir))?
        .map(|e| e.map(|e| e.path()).map_err(Error::io(dir)))
        .collect::<Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let model = ModelFile::load(&p)?;
        if model.subject_id == exclude {
            continue;
        }
        match model.as_source() {
            Some(s) => out.push(s),
            None => {
                return Err(Error::Usage(format!(
                    "{} holds a {} model; sources must be notransfer models",
                    p.display(),
                    model.method().as_str()
                )))
            }
        }
    }
    out.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    if out.is_empty() {
        return Err(htl_core::Error::NoSources.into());
    }
    Ok(out)
}

fn sources_for(method: Method, dir: Option<&PathBuf>, subject: &str) -> Result<Vec<SourceHypothesis>> {
    match (method.uses_sources(), dir) {
        (false, _) => Ok(Vec::new()),
        (true, Some(d)) => load_sources(d, subject),
        (true, None) => Err(Error::Usage(format!("--sources is required for {}", method.as_str()))),
    }
}

fn training_rows(fm: &FeatureMatrix, reps: &[u32], subsample: usize) -> Result<FeatureMatrix> {
    let rows = fm.filter(|_, r| reps.contains(&r));
    if rows.is_empty() {
        return Err(htl_core::Error::EmptySplit("train").into());
    }
    Ok(subsample_regular(&rows, subsample, 0)?)
}

fn gamma_for(method: Method, gamma: Option<f64>) -> Result<Option<f64>> {
    match (method.uses_gamma(), gamma) {
        (true, Some(g)) => Ok(Some(g)),
        (true, None) => Err(Error::Usage(format!("--gamma is required for {}", method.as_str()))),
        (false, _) => Ok(None),
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let sf = subject_features(&a.features, &a.subject)?;
    let gamma = gamma_for(a.method, a.gamma)?;
    let sources = sources_for(a.method, a.sources.as_ref(), &a.subject)?;
    let rows = training_rows(&sf.features, &a.train_reps, a.subsample)?;
    let standardizer = Standardizer::fit(&rows)?;
    let x = standardizer.apply_matrix(&rows.features)?;
    let labels = &rows.labels;
    let payload = match a.method {
        Method::NoTransfer => ModelPayload::NoTransfer(train_ova(&x, labels, &HyperParams::rbf(a.c, gamma.unwrap_or(1.0))?)?),
        Method::Prior => ModelPayload::Prior(train_prior(&x, labels, &sources, a.c)?),
        Method::MultiKt => {
            let hp = HyperParams::rbf(a.c, gamma.unwrap_or(1.0))?;
            let weights = optimize_beta(&x, labels, &sources, &hp)?;
            ModelPayload::MultiKt(train_multikt(&x, labels, &sources, &hp, &weights)?)
        }
        Method::Mkal => {
            let seed = a.seed.ok_or_else(|| Error::Usage("--seed is required for mkal".into()))?;
            let scores = sources.iter().map(|s| s.score_matrix(&x)).collect::<htl_core::Result<Vec<_>>>()?;
            let bank = build_kernel_bank_from_scores(&x, scores, gamma.unwrap_or(1.0))?;
            let cfg = MkalConfig {
                p: a.mkal_p,
                epochs: a.mkal_epochs,
                lambda: 1.0 / (a.c * x.rows() as f64),
                seed,
            };
            ModelPayload::Mkal(train_mkal(&bank, labels, &cfg)?)
        }
    };
    let model = ModelFile::new(a.subject, a.c, gamma, a.train_reps, standardizer, payload, sources);
    model.save(&a.out)?;
    println!("wrote {} model to {}", model.method().as_str(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let model = ModelFile::load(&a.model)?;
    let subject = a.subject.unwrap_or_else(|| model.subject_id.clone());
    let sf = subject_features(&a.features, &subject)?;
    let test = sf.features.filter(|_, r| a.test_reps.contains(&r));
    if test.is_empty() {
        return Err(htl_core::Error::EmptySplit("test").into());
    }
    let predicted = model.predict(&test)?;
    let value = a.metric.evaluate(&test.labels, &predicted)?;
    println!(
        "subject={subject} method={} metric={} value={value} rows={}",
        model.method().as_str(),
        a.metric.as_str(),
        test.len()
    );
    Ok(())
}

fn grid(a: GridArgs) -> Result<()> {
    let sf = subject_features(&a.features, &a.subject)?;
    let sources = sources_for(a.method, a.sources.as_ref(), &a.subject)?;
    let preset = match a.grid {
        GridPreset::Original => GridSpec::original(),
        GridPreset::Extended => GridSpec::extended(),
    };
    let mut spec = GridSpec::new(a.c.unwrap_or(preset.c), a.gamma.unwrap_or(preset.gamma))?;
    if !a.method.uses_gamma() {
        spec = spec.c_only();
    }
    let rows = training_rows(&sf.features, &a.train_reps, a.subsample)?;
    let data = Standardizer::fit(&rows)?.apply(&rows)?;
    let task = TaskData::new(data.features.clone(), data.labels.clone(), &sources)?;
    let ctx = MethodContext::new(&sources, a.mkal_p, a.mkal_epochs, a.seed)?;
    let cv = CvPlan {
        scheme: match a.cv {
            CvKind::Shuffled => CvScheme::Shuffled { folds: a.folds },
            CvKind::Reps => CvScheme::ByRepetition { fallback: a.folds },
        },
        metric: a.metric,
        subsample: a.tuning_subsample,
    };
    let method = a.method;
    let fit = |p: &GridPoint, tr: &[usize], va: &[usize]| fit_predict(method, p, &ctx, &task.select(tr), &task.select(va));
    let choice = grid_search(&data, &spec, &cv, &fit, a.seed)?;
    let gamma = if method.uses_gamma() {
        choice.point.gamma.to_string()
    } else {
        "-".into()
    };
    println!("C={} gamma={gamma} score={}", choice.point.c, choice.score);
    Ok(())
}

/// `--jobs`, else the environment default, else the CPU count.
fn jobs(flag: Option<usize>) -> Result<usize> {
    if let Some(j) = flag {
        return Ok(j);
    }
    match std::env::var(JOBS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("{JOBS_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn experiment_plan(a: &ExperimentArgs) -> Result<ExperimentPlan> {
    let mut plan = ExperimentPlan::new(a.setting, a.pairing, a.methods.clone(), a.seed);
    if a.train_reps.is_some() || a.test_reps.is_some() {
        plan.split = SplitPlan::new(
            a.train_reps.clone().unwrap_or(plan.split.train_reps),
            a.test_reps.clone().unwrap_or(plan.split.test_reps),
        )?;
        if a.setting == Setting::Realistic {
            plan.sizes = SizeAxis::Repetitions(htl_core::harness::enumerate_rep_subsets(&plan.split.train_reps)?);
        }
    }
    if let Some(sizes) = &a.sizes {
        if a.setting == Setting::Realistic {
            return Err(Error::Usage("--sizes applies to the original and optimized settings".into()));
        }
        plan.sizes = SizeAxis::Samples(sizes.clone());
    }
    if a.grid_c.is_some() || a.grid_gamma.is_some() {
        plan.grid = GridSpec::new(
            a.grid_c.clone().unwrap_or(plan.grid.c),
            a.grid_gamma.clone().unwrap_or(plan.grid.gamma),
        )?;
    }
    if let (Some(c), Some(gamma)) = (a.fixed_c, a.fixed_gamma) {
        plan.fixed_hp = Some(GridPoint { c, gamma });
    }
    if let Some(k) = a.feature_kind {
        plan.features = k;
    }
    if let Some(w) = a.window_ms {
        plan.window.length_ms = w;
    }
    if let Some(s) = a.step_ms {
        plan.window.increment_ms = s;
    }
    if let Some(v) = a.train_subsample {
        plan.train_subsample = v;
    }
    if let Some(v) = a.tuning_subsample {
        plan.tuning_subsample = v;
    }
    if let Some(v) = a.folds {
        plan.cv_folds = v;
    }
    if let Some(v) = a.mkal_p {
        plan.mkal_p = v;
    }
    if let Some(v) = a.mkal_epochs {
        plan.mkal_epochs = v;
    }
    plan.allow_mkal_realistic = a.allow_mkal_realistic;
    plan.validate()?;
    Ok(plan)
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let plan = experiment_plan(&a)?;
    let exec = RayonExecutor::new(jobs(a.jobs)?)?;
    let (_, recs) = load_dataset(&a.data)?;
    let records = run_experiment_with(&plan, &recs, &exec)?;
    save_records(&a.out, &records)?;
    print!("{}", render(&summarize(&records)));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(a: &[&str]) -> Vec<OsString> {
        a.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_path_forms() {
        assert_eq!(config_path(&argv(&["htl", "synth"])), None);
        assert_eq!(config_path(&argv(&["htl", "--config", "a.json", "synth"])), Some("a.json".into()));
        assert_eq!(config_path(&argv(&["htl", "synth", "--config=b.json"])), Some("b.json".into()));
        assert_eq!(config_path(&argv(&["htl", "synth", "--", "--config", "c"])), None);
    }

    #[test]
    fn plan_flags_are_applied_and_checked() {
        let cli = Cli::try_parse_from(argv(&[
            "htl", "experiment", "--data", "d", "--setting", "original", "--pairing", "aa", "--methods", "notransfer,mkal",
            "--seed", "1", "--out", "o", "--sizes", "120,240", "--fixed-C", "0.01", "--fixed-gamma", "0.01",
        ]))
        .unwrap();
        let Command::Experiment(a) = cli.command else { panic!() };
        let plan = experiment_plan(&a).unwrap();
        assert_eq!(plan.sizes, SizeAxis::Samples(vec![120, 240]));
        assert_eq!(plan.fixed_hp, Some(GridPoint { c: 0.01, gamma: 0.01 }));

        let cli = Cli::try_parse_from(argv(&[
            "htl", "experiment", "--data", "d", "--setting", "realistic", "--pairing", "ii", "--methods", "mkal",
            "--seed", "1", "--out", "o",
        ]))
        .unwrap();
        let Command::Experiment(a) = cli.command else { panic!() };
        assert!(experiment_plan(&a).is_err());
    }
}
