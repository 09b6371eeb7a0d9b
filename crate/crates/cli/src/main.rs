mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{ConfigFile, UsageError};
use ela_forensics::classifier::{self, read_checkpoint, write_checkpoint, AdamConfig, ModelParams, TrainConfig};
use ela_forensics::dataset::synth::{write_toy_corpus, ToyCorpusSpec};
use ela_forensics::dataset::{
    parse_size, scan_corpus, split_manifest, CorpusLayout, DatasetManifest, Label, ManifestSettings, ScanReport, Split,
    SplitRatios,
};
use ela_forensics::ela::{compute_ela, enhance_ela, load_image, save_ela_png, QualityLevel};
use ela_forensics::io::write_text_atomic;
use ela_forensics::metrics::{evaluate, roc_curve, PredictionSet};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "ela-forensics", version, about = "Error level analysis and a CNN tamper detector")]
struct Cli {
    /// Key-value file with defaults for the numeric flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Run every parallel stage on a single thread.
    #[arg(long, global = true)]
    deterministic: bool,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct QualityArg {
    /// JPEG recompression quality (1-100).
    #[arg(long, value_parser = clap::value_parser!(i64).range(1..=100))]
    quality: Option<i64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the enhanced ELA map of one image as PNG plus a text sidecar.
    Ela {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        quality: QualityArg,
    },
    /// List the decodable images of an Au/ + Tp/ corpus.
    Scan {
        root: PathBuf,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan a corpus and assign stratified train/val/test splits.
    Split {
        root: PathBuf,
        /// Manifest destination [default: ROOT/manifest.csv].
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse_ratios)]
        ratios: Option<SplitRatios>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        quality: QualityArg,
        /// Network input size, WxH.
        #[arg(long, value_parser = parse_size_arg)]
        size: Option<(u32, u32)>,
        /// Feed raw ELA differences instead of the stretched map.
        #[arg(long)]
        no_enhance: bool,
    },
    /// Train the classifier on the train split and validate on the val split.
    Train {
        manifest: PathBuf,
        /// Output directory for model.ckpt and history.csv.
        #[arg(long)]
        out: PathBuf,
        /// Directory the manifest paths are relative to [default: the manifest's directory].
        #[arg(long)]
        root: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// [default: the manifest seed]
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score one split of a manifest with a trained checkpoint.
    Predict {
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "val")]
        split: Split,
        #[arg(long)]
        root: Option<PathBuf>,
    },
    /// Print the metric report of a predictions CSV.
    Evaluate {
        predictions: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Also write the text report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the report as metric,value CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write the ROC curve of a predictions CSV.
    Roc {
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus of authentic images and rectangle splices.
    Synth {
        root: PathBuf,
        #[arg(long)]
        authentic: Option<usize>,
        #[arg(long)]
        tampered: Option<usize>,
        /// Image size, WxH.
        #[arg(long, value_parser = parse_size_arg)]
        size: Option<(u32, u32)>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_ratios(s: &str) -> std::result::Result<SplitRatios, String> {
    s.parse().map_err(|e: ela_forensics::Error| e.to_string())
}

fn parse_size_arg(s: &str) -> std::result::Result<(u32, u32), String> {
    parse_size(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(ela_forensics::Error::DivergedLoss { .. }) = cause.downcast_ref() {
            return EXIT_DIVERGED;
        }
    }
    EXIT_DATA
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let deterministic = cfg.switch("deterministic", cli.deterministic, false)?;
    if deterministic {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global()
            .context("configuring the thread pool")?;
    }

    match cli.command {
        Command::Ela { input, out, quality } => {
            let quality = resolve_quality(&cfg, quality)?;
            let img = load_image(&input).with_context(|| format!("reading {}", input.display()))?;
            let ela = compute_ela(&img, quality)?;
            save_ela_png(&enhance_ela(&ela), &ela, &input, &out)?;
            println!(
                "ela: {} -> {} ({}x{}, quality {quality}, max error {})",
                input.display(),
                out.display(),
                ela.width(),
                ela.height(),
                ela.max_error()
            );
        }
        Command::Scan { root, out } => {
            let report = scan_corpus(&root, &CorpusLayout::default())?;
            let records = report.relative_to(&root);
            let csv = ScanReport::records_csv(&records)?;
            let (au, tp) = class_counts(&records);
            match out {
                Some(path) => {
                    write_text_atomic(&path, &csv)?;
                    println!(
                        "scan: {au} authentic, {tp} tampered, {} skipped -> {}",
                        report.skipped.len(),
                        path.display()
                    );
                }
                None => print!("{csv}"),
            }
        }
        Command::Split {
            root,
            out,
            ratios,
            seed,
            quality,
            size,
            no_enhance,
        } => {
            let defaults = ManifestSettings::default();
            let settings = ManifestSettings {
                quality: resolve_quality(&cfg, quality)?,
                target_size: resolve_size(&cfg, size, defaults.target_size)?,
                enhance: !no_enhance && cfg.resolve("enhance", None, defaults.enhance)?,
            };
            let ratios = match ratios {
                Some(r) => r,
                None => cfg
                    .resolve::<String>("ratios", None, String::new())
                    .and_then(|s| if s.is_empty() { Ok(SplitRatios::default()) } else { parse_ratios(&s).map_err(UsageError) })?,
            };
            let seed = cfg.resolve("seed", seed, 42)?;
            let report = scan_corpus(&root, &CorpusLayout::default())?;
            let manifest = split_manifest(&report.relative_to(&root), ratios, seed, settings)?;
            let out = out.unwrap_or_else(|| root.join("manifest.csv"));
            manifest.save(&out)?;
            let counts = manifest.counts();
            let n = |s| Label::ALL.iter().map(|&l| counts.get(&(s, l)).copied().unwrap_or(0)).sum::<usize>();
            println!(
                "split: {} train, {} val, {} test (seed {seed}) -> {}",
                n(Split::Train),
                n(Split::Val),
                n(Split::Test),
                out.display()
            );
        }
        Command::Train {
            manifest,
            out,
            root,
            epochs,
            batch,
            lr,
            seed,
        } => {
            let (m, base) = load_manifest(&manifest, root)?;
            let defaults = TrainConfig::default();
            let config = TrainConfig {
                epochs: cfg.resolve("epochs", epochs, defaults.epochs)?,
                batch_size: positive(cfg.resolve("batch", batch, defaults.batch_size)?, "batch")?,
                adam: AdamConfig {
                    learning_rate: cfg.resolve("lr", lr, defaults.adam.learning_rate)?,
                    ..defaults.adam
                },
                seed: cfg.resolve("seed", seed, m.seed)?,
                deterministic,
                ..defaults
            };
            if !(config.adam.learning_rate.is_finite() && config.adam.learning_rate > 0.0) {
                return Err(UsageError(format!("learning rate {} must be positive", config.adam.learning_rate)).into());
            }
            let (params, history) = classifier::train(&m, &base, &config)?;
            write_checkpoint(&params, &out.join("model.ckpt"))?;
            history.save(&out.join("history.csv"))?;
            match history.last() {
                Some(r) => println!(
                    "train: {} epochs, val_loss {:.4}, val_acc {:.4} -> {}",
                    r.epoch,
                    r.val_loss,
                    r.val_accuracy,
                    out.display()
                ),
                None => println!("train: 0 epochs, initial weights (seed {}) -> {}", config.seed, out.display()),
            }
        }
        Command::Predict {
            manifest,
            model,
            out,
            split,
            root,
        } => {
            let (m, base) = load_manifest(&manifest, root)?;
            let params: ModelParams<f32> =
                read_checkpoint(&model).with_context(|| format!("reading {}", model.display()))?;
            let preds = classifier::predict(&params, &m, &base, split)?;
            preds.save(&out)?;
            println!("predict: {} {split} rows -> {}", preds.len(), out.display());
        }
        Command::Evaluate {
            predictions,
            threshold,
            beta,
            out,
            csv,
        } => {
            let threshold = cfg.resolve("threshold", threshold, 0.5)?;
            let beta = cfg.resolve("beta", beta, 1.0)?;
            if !(0.0..=1.0).contains(&threshold) {
                return Err(UsageError(format!("threshold {threshold} is outside [0, 1]")).into());
            }
            if !(beta.is_finite() && beta > 0.0) {
                return Err(UsageError(format!("beta {beta} must be positive")).into());
            }
            let preds = load_predictions(&predictions)?;
            let report = evaluate(&preds, threshold, beta)?;
            let text = report.to_text();
            if let Some(path) = &out {
                write_text_atomic(path, &text)?;
            }
            if let Some(path) = &csv {
                write_text_atomic(path, &report.to_csv())?;
            }
            print!("{text}");
        }
        Command::Roc { predictions, out } => {
            let preds = load_predictions(&predictions)?;
            let curve = roc_curve(&preds)?;
            curve.save(&out)?;
            println!(
                "roc: {} points, auc {:.4} -> {}",
                curve.points.len(),
                ela_forensics::metrics::auc(&curve),
                out.display()
            );
        }
        Command::Synth {
            root,
            authentic,
            tampered,
            size,
            seed,
        } => {
            let defaults = ToyCorpusSpec::default();
            let spec = ToyCorpusSpec {
                authentic: authentic.unwrap_or(defaults.authentic),
                tampered: tampered.unwrap_or(defaults.tampered),
                size: resolve_size(&cfg, size, defaults.size)?,
                seed: cfg.resolve("seed", seed, defaults.seed)?,
                ..defaults
            };
            let records = write_toy_corpus(&root, &spec)?;
            let (au, tp) = class_counts(&records);
            println!(
                "synth: {au} authentic, {tp} tampered (seed {}) -> {}",
                spec.seed,
                root.display()
            );
        }
    }
    Ok(())
}

fn resolve_quality(cfg: &ConfigFile, flag: QualityArg) -> Result<QualityLevel> {
    let q = cfg.resolve("quality", flag.quality, QualityLevel::DEFAULT.value() as i64)?;
    QualityLevel::new(q).map_err(|e| UsageError(e.to_string()).into())
}

fn resolve_size(cfg: &ConfigFile, flag: Option<(u32, u32)>, default: (u32, u32)) -> Result<(u32, u32)> {
    if let Some(size) = flag {
        return Ok(size);
    }
    let raw: String = cfg.resolve("size", None, String::new())?;
    if raw.is_empty() {
        Ok(default)
    } else {
        parse_size(&raw).map_err(|e| UsageError(format!("config key size: {e}")).into())
    }
}

fn positive(value: usize, name: &str) -> Result<usize> {
    if value == 0 {
        Err(UsageError(format!("{name} must be at least 1")).into())
    } else {
        Ok(value)
    }
}

/// Loads a manifest and picks the directory its paths are relative to.
fn load_manifest(path: &Path, root: Option<PathBuf>) -> Result<(DatasetManifest, PathBuf)> {
    let manifest = DatasetManifest::load(path).with_context(|| format!("reading {}", path.display()))?;
    let base = root.unwrap_or_else(|| match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    });
    Ok((manifest, base))
}

fn load_predictions(path: &Path) -> Result<PredictionSet> {
    PredictionSet::load(path).with_context(|| format!("reading {}", path.display()))
}

fn class_counts(records: &[(PathBuf, Label)]) -> (usize, usize) {
    let tp = records.iter().filter(|r| r.1 == Label::Tampered).count();
    (records.len() - tp, tp)
}
