//! noiselab CLI: thin subcommand wrappers over the library.
//!
//! Every subcommand validates its inputs, writes JSON/CSV outputs, and exits
//! nonzero with a single-line machine-parsable `error[kind]: message` on
//! failure. All randomness derives from explicit seeds (flag, config file,
//! or the NOISELAB_SEED environment variable), so repeating a command with
//! identical inputs reproduces its outputs byte for byte.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use noiselab::data::{
    generate_synthetic, load_idx_pair, Dataset, Split, SyntheticSpec,
};
use noiselab::error::{Error, Result};
use noiselab::estimator::{
    build_training_rows, estimate_noise_rate, featurize_losses, fit_estimator, EstimatorModel,
    DEFAULT_RIDGE,
};
use noiselab::metrics::compute_metrics;
use noiselab::model::{forward, ModelParams};
use noiselab::noise::{inject_noise, CorruptionRecord, NoiseKind, NoiseSpec};
use noiselab::pipeline::{
    ablate_forget_rates, default_seed, run_baseline_with_params, run_pipeline_with_params,
    write_ablation_csv, write_curves_csv, RunConfig,
};

#[derive(Parser)]
#[command(name = "noiselab", version, about = "Noise-robust classification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Validation,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Validation => Split::Validation,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Symmetric,
    Asymmetric,
}

impl From<KindArg> for NoiseKind {
    fn from(k: KindArg) -> NoiseKind {
        match k {
            KindArg::Symmetric => NoiseKind::Symmetric,
            KindArg::Asymmetric => NoiseKind::Asymmetric,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic Gaussian-cluster dataset and save it as JSON.
    MakeSynth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        classes: usize,
        #[arg(long, default_value_t = 2)]
        feature_dim: usize,
        #[arg(long, default_value_t = 0.1)]
        spread: f64,
        /// Defaults to NOISELAB_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = SplitArg::Train)]
        split: SplitArg,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert an IDX image/label file pair into a dataset JSON file.
    ImportIdx {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        classes: usize,
        #[arg(long, value_enum, default_value_t = SplitArg::Train)]
        split: SplitArg,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corrupt a train split's labels and write a flip ledger alongside.
    InjectNoise {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = KindArg::Symmetric)]
        kind: KindArg,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        record_out: Option<PathBuf>,
    },
    /// Fit the noise-rate estimator on auxiliary datasets with known rates.
    TrainEstimator {
        /// Auxiliary dataset JSON paths (repeat the flag).
        #[arg(long, required = true)]
        aux: Vec<PathBuf>,
        /// Comma-separated noise rates, e.g. 0,0.1,0.2,0.3,0.4.
        #[arg(long, default_value = "0,0.1,0.2,0.3,0.4")]
        rates: String,
        /// Comma-separated noise kinds.
        #[arg(long, default_value = "symmetric")]
        kinds: String,
        /// Run-config JSON controlling the per-cell training.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_RIDGE)]
        ridge: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict a noise rate from a per-sample loss CSV.
    Estimate {
        #[arg(long)]
        model: PathBuf,
        /// CSV with one loss per line (an optional `loss` header is skipped).
        #[arg(long)]
        losses: PathBuf,
        #[arg(long)]
        classes: usize,
    },
    /// Run the three-phase pipeline (or the plain baseline) end to end.
    Run {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Estimator JSON; falls back to the config's estimator_path.
        #[arg(long)]
        estimator: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Train the no-selection baseline instead of the pipeline.
        #[arg(long)]
        baseline: bool,
        /// Fixed forget rate overriding the estimate.
        #[arg(long)]
        forget_rate: Option<f64>,
        /// Flip ledger for selection precision/recall reporting.
        #[arg(long)]
        corruption_record: Option<PathBuf>,
        /// Curves CSV path; defaults to the report path with .curves.csv.
        #[arg(long)]
        curves_out: Option<PathBuf>,
        /// Where to save the trained model parameters.
        #[arg(long)]
        params_out: Option<PathBuf>,
    },
    /// Evaluate saved model parameters on a dataset.
    Eval {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Softmax temperature for the evaluation forward pass.
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep fixed forget rates {0, 0.1, 0.2, 0.3, 0.4} plus the estimated
    /// rate and write one accuracy row per configuration.
    AblateForgetRate {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        estimator: Option<PathBuf>,
        #[arg(long)]
        corruption_record: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg: String = e.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
            eprintln!("error[{}]: {}", e.kind(), msg);
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load_json(p),
        None => Ok(RunConfig::default()),
    }
}

fn load_estimator(flag: &Option<PathBuf>, cfg: &RunConfig) -> Result<EstimatorModel> {
    let path = flag
        .as_ref()
        .or(cfg.estimator_path.as_ref())
        .ok_or_else(|| Error::Usage("no estimator given: pass --estimator or set estimator_path in the config".into()))?;
    EstimatorModel::load_json(path)
}

fn load_record(path: &Option<PathBuf>) -> Result<Option<CorruptionRecord>> {
    path.as_ref().map(|p| CorruptionRecord::load_json(p)).transpose()
}

fn parse_rates(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Argument(format!("cannot parse rate '{s}'")))
        })
        .collect()
}

fn parse_kinds(text: &str) -> Result<Vec<NoiseKind>> {
    text.split(',')
        .map(|s| match s.trim() {
            "symmetric" => Ok(NoiseKind::Symmetric),
            "asymmetric" => Ok(NoiseKind::Asymmetric),
            other => Err(Error::Argument(format!(
                "unknown noise kind '{other}' (expected symmetric or asymmetric)"
            ))),
        })
        .collect()
}

fn read_loss_csv(path: &PathBuf) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.clone(), source: e })?;
    let mut losses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => losses.push(v),
            Err(_) if i == 0 => continue, // header row
            Err(_) => {
                return Err(Error::Format(format!(
                    "loss file line {}: '{field}' is not a number",
                    i + 1
                )))
            }
        }
    }
    Ok(losses)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::MakeSynth { n, classes, feature_dim, spread, seed, split, name, out } => {
            let spec = SyntheticSpec {
                n,
                c: classes,
                feature_dim,
                cluster_spread: spread,
                seed: seed.unwrap_or_else(default_seed),
            };
            let mut d = generate_synthetic(&spec)?.with_split(split.into());
            if let Some(name) = name {
                d = d.with_name(name);
            }
            d.save_json(&out)?;
            println!("wrote {} samples to {}", d.n(), out.display());
            Ok(())
        }
        Command::ImportIdx { images, labels, classes, split, name, out } => {
            let mut d = load_idx_pair(&images, &labels, classes)?.with_split(split.into());
            if let Some(name) = name {
                d = d.with_name(name);
            }
            d.save_json(&out)?;
            println!(
                "wrote {} samples ({} features each) to {}",
                d.n(),
                d.feature_dim,
                out.display()
            );
            Ok(())
        }
        Command::InjectNoise { data, kind, rate, seed, out, record_out } => {
            let d = Dataset::load_json(&data)?;
            let spec = NoiseSpec {
                kind: kind.into(),
                rate,
                seed: seed.unwrap_or_else(default_seed),
            };
            let (noisy, record) = inject_noise(&d, &spec)?;
            noisy.save_json(&out)?;
            if let Some(record_path) = &record_out {
                record.save_json(record_path)?;
            }
            println!(
                "flipped {} of {} labels (realized rate {})",
                record.flipped_count(),
                noisy.n(),
                record.realized_rate
            );
            Ok(())
        }
        Command::TrainEstimator { aux, rates, kinds, config, ridge, out } => {
            let cfg = load_config(&config)?;
            let datasets: Vec<Dataset> =
                aux.iter().map(|p| Dataset::load_json(p)).collect::<Result<_>>()?;
            let rates = parse_rates(&rates)?;
            let kinds = parse_kinds(&kinds)?;
            let rows = build_training_rows(&datasets, &rates, &kinds, &cfg)?;
            let (model, residuals) = fit_estimator(&rows, ridge)?;
            model.save_json(&out)?;
            let rmse =
                (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
            println!("fitted on {} rows, training residual RMSE {rmse}", rows.len());
            println!("wrote estimator to {}", out.display());
            Ok(())
        }
        Command::Estimate { model, losses, classes } => {
            let model = EstimatorModel::load_json(&model)?;
            let losses = read_loss_csv(&losses)?;
            let feats = featurize_losses(&losses, classes)?;
            let est = estimate_noise_rate(&model, &feats)?;
            println!("eta_hat_raw={}", est.raw);
            println!("eta_hat={}", est.clamped);
            Ok(())
        }
        Command::Run {
            train,
            val,
            test,
            config,
            estimator,
            out,
            baseline,
            forget_rate,
            corruption_record,
            curves_out,
            params_out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(k) = forget_rate {
                cfg.forget_rate_override = Some(k);
            }
            let train = Dataset::load_json(&train)?;
            let val = Dataset::load_json(&val)?;
            let test = Dataset::load_json(&test)?;
            let record = load_record(&corruption_record)?;

            let (report, params) = if baseline {
                run_baseline_with_params(&train, &val, &test, &cfg)?
            } else {
                let est = load_estimator(&estimator, &cfg)?;
                run_pipeline_with_params(&train, &val, &test, &cfg, &est, record.as_ref())?
            };

            report.save_json(&out)?;
            let curves_path =
                curves_out.unwrap_or_else(|| out.with_extension("curves.csv"));
            write_curves_csv(&curves_path, &report.curves)?;
            if let Some(params_path) = &params_out {
                params.save_json(params_path)?;
            }
            println!("mode={}", report.mode);
            if let Some(eta) = report.eta_hat {
                println!("eta_hat={eta}");
            }
            if let Some(k) = report.forget_rate {
                println!("forget_rate={k}");
            }
            println!("test_accuracy={}", report.metrics.accuracy);
            println!("test_macro_f1={}", report.metrics.macro_f1);
            println!("wrote report to {}", out.display());
            Ok(())
        }
        Command::Eval { params, data, tau, out } => {
            let params = ModelParams::load_json(&params)?;
            let data = Dataset::load_json(&data)?;
            let probs: Vec<Vec<f64>> = data
                .samples
                .iter()
                .map(|s| forward(&params, &s.features, tau).map(|(p, _)| p))
                .collect::<Result<_>>()?;
            let labels: Vec<usize> = data.samples.iter().map(|s| s.observed_label).collect();
            let metrics = compute_metrics(&probs, &labels)?;
            metrics.save_json(&out)?;
            println!("accuracy={}", metrics.accuracy);
            println!("macro_f1={}", metrics.macro_f1);
            println!("mean_auc={}", metrics.mean_auc);
            println!("wrote metrics to {}", out.display());
            Ok(())
        }
        Command::AblateForgetRate {
            train,
            val,
            test,
            config,
            estimator,
            corruption_record,
            out,
        } => {
            let cfg = load_config(&config)?;
            let est = load_estimator(&estimator, &cfg)?;
            let train = Dataset::load_json(&train)?;
            let val = Dataset::load_json(&val)?;
            let test = Dataset::load_json(&test)?;
            let record = load_record(&corruption_record)?;
            let rows = ablate_forget_rates(&train, &val, &test, &cfg, &est, record.as_ref())?;
            write_ablation_csv(&out, &rows)?;
            for row in &rows {
                println!(
                    "{} forget_rate={} accuracy={} macro_f1={}",
                    row.config, row.forget_rate, row.accuracy, row.macro_f1
                );
            }
            println!("wrote grid to {}", out.display());
            Ok(())
        }
    }
}
