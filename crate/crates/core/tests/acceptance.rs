//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! for each, and exits non-zero if any failed.
//!
//! Run with `cargo test -p ela-forensics --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ela_forensics::classifier::{
    backward, bce_loss, forward, head_param_count, ForwardCache, train, Architecture, ModelParams, Tensor4, TrainConfig,
};
use ela_forensics::dataset::synth::{natural_image, synth_splice, write_toy_corpus, Rect, ToyCorpusSpec};
use ela_forensics::dataset::{split_manifest, Label, ManifestSettings, SplitRatios};
use ela_forensics::ela::{compute_ela, QualityLevel};
use ela_forensics::metrics::{auc, f_measure, roc_curve, PredictionSet};
use ela_forensics::rng::SplitMix64;

// Pinned tolerances and budgets.
const F_TABLE_TOLERANCE_PP: f64 = 0.05;
const AUC_TOLERANCE: f64 = 1e-12;
const RANDOM_SETS: usize = 1000;
const MAX_SET_SIZE: u64 = 200;
const AUC_BUDGET: Duration = Duration::from_secs(30);
const GRAD_STEP: f64 = 1e-5;
const GRAD_REL_TOLERANCE: f64 = 1e-4;
/// Denominator floor of the relative error so parameters whose true gradient
/// is (numerically) zero are compared on an absolute scale.
const GRAD_REL_FLOOR: f64 = 1e-6;
/// When the ±step stencil crosses a ReLU or max-pool switch, the step is
/// divided by 10 until both ends share one activation pattern, down to this.
const GRAD_MIN_STEP: f64 = 1e-9;
const GRAD_SEEDS: u64 = 20;
const GRAD_BUDGET: Duration = Duration::from_secs(120);
const SPLICES: usize = 50;
const SPLICE_RATIO: f64 = 2.0;
const SPLICES_REQUIRED: usize = 48;
const SPLICE_BUDGET: Duration = Duration::from_secs(120);
const TARGET_VAL_ACCURACY: f64 = 0.90;
const MAX_EPOCHS: usize = 15;
const TRAIN_BUDGET: Duration = Duration::from_secs(600);

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Reported F-measures recomputed from their precision/recall pairs.
fn reported_f_table() -> Outcome {
    let rows = [
        ("VGG-19", 0.9825, 0.7934, 87.79),
        ("Inception-V3", 0.9411, 0.8262, 88.00),
        ("ResNet-152-V2", 0.9038, 0.8826, 89.31),
        ("XceptionNet", 0.9461, 0.8661, 90.44),
        ("EfficientNet-V2L", 0.8520, 0.9460, 89.65),
    ];
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for (name, p, r, reported) in rows {
        let f = 100.0 * f_measure(p, r, 1.0);
        worst = worst.max((f - reported).abs());
        detail.push(format!("{name} {f:.3}"));
    }
    check(
        worst <= F_TABLE_TOLERANCE_PP,
        format!("{}; max deviation {worst:.4} pp", detail.join(", ")),
    )
}

fn head_arithmetic() -> Outcome {
    // (model, feature channels, stated total, stated base)
    let rows: [(&str, u64, u64, u64); 5] = [
        ("VGG-19", 512, 20_551_746, 20_024_384),
        ("Inception-V3", 2048, 23_903_010, 21_802_784),
        ("ResNet-152-V2", 2048, 60_431_874, 58_331_648),
        ("XceptionNet", 2048, 22_961_706, 20_861_480),
        ("EfficientNet-V2L", 1280, 119_060_642, 117_746_848),
    ];
    let mismatches: Vec<String> = rows
        .iter()
        .filter(|(_, c, total, base)| head_param_count(*c) != total - base)
        .map(|(name, c, total, base)| format!("{name}: {} vs {}", head_param_count(*c), total - base))
        .collect();
    check(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!(
                "527362 / 2100226 / 1313794 match all five totals ({} / {} / {})",
                head_param_count(512),
                head_param_count(2048),
                head_param_count(1280)
            )
        } else {
            mismatches.join("; ")
        },
    )
}

/// Random labelled scores on a 1/1000 grid with duplicated scores injected.
fn random_set(rng: &mut SplitMix64) -> Vec<(Label, f64)> {
    let n = 2 + rng.below(MAX_SET_SIZE - 1) as usize;
    let mut rows: Vec<(Label, f64)> = Vec::with_capacity(n);
    for i in 0..n {
        let label = if rng.below(2) == 1 { Label::Tampered } else { Label::Authentic };
        let score = if i > 0 && rng.below(10) < 3 {
            rows[rng.below(i as u64) as usize].1
        } else {
            rng.below(1001) as f64 / 1000.0
        };
        rows.push((label, score));
    }
    // Guarantee both classes.
    rows[0].0 = Label::Tampered;
    rows[n - 1].0 = Label::Authentic;
    rows
}

fn mann_whitney(rows: &[(Label, f64)]) -> f64 {
    let pos: Vec<f64> = rows.iter().filter(|r| r.0 == Label::Tampered).map(|r| r.1).collect();
    let neg: Vec<f64> = rows.iter().filter(|r| r.0 == Label::Authentic).map(|r| r.1).collect();
    let mut wins = 0.0;
    for &p in &pos {
        for &q in &neg {
            wins += if p > q {
                1.0
            } else if p == q {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn auc_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(3);
    let mut worst = 0.0f64;
    for _ in 0..RANDOM_SETS {
        let rows = random_set(&mut rng);
        let curve = roc_curve(&PredictionSet::from_scores(&rows).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        worst = worst.max((auc(&curve) - mann_whitney(&rows)).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst <= AUC_TOLERANCE && elapsed < AUC_BUDGET,
        format!("{RANDOM_SETS} sets, max |AUC - U/(n+ n-)| = {worst:.2e}, {elapsed:.2?}"),
    )
}

fn loss_and_cache(params: &ModelParams<f64>, batch: &Tensor4<f64>, labels: &[[f64; 2]]) -> (f64, ForwardCache<f64>) {
    let (probs, cache) = forward(params, batch).unwrap();
    (bce_loss(&probs, labels).unwrap(), cache)
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let (mut worst, mut worst_fixed_step) = (0.0f64, 0.0f64);
    let (mut checked, mut straddled, mut unresolved) = (0usize, 0usize, 0usize);
    for seed in 0..GRAD_SEEDS {
        let mut rng = SplitMix64::new(1000 + seed);
        let h = rng.range_inclusive(6, 10) as usize;
        let w = rng.range_inclusive(6, 10) as usize;
        let arch = Architecture {
            input_height: h,
            input_width: w,
            conv_channels: vec![rng.range_inclusive(2, 4) as usize, rng.range_inclusive(2, 4) as usize],
            hidden: ela_forensics::classifier::HIDDEN_UNITS,
        };
        let mut params = ModelParams::<f64>::init(arch, rng.next_u64()).map_err(|e| e.to_string())?;
        // Non-zero biases so every bias gradient path is exercised.
        for t in params.tensors.iter_mut().filter(|t| t.name.ends_with(".bias")) {
            t.data.iter_mut().for_each(|v| *v = rng.uniform(-0.1, 0.1));
        }
        let batch_size = 4;
        let data = (0..batch_size * h * w * 3).map(|_| rng.next_f64()).collect();
        let batch = Tensor4::new([batch_size, h, w, 3], data).map_err(|e| e.to_string())?;
        let labels: Vec<[f64; 2]> = (0..batch_size)
            .map(|i| if i % 2 == 0 { [1.0, 0.0] } else { [0.0, 1.0] })
            .collect();

        let (probs, cache) = forward(&params, &batch).map_err(|e| e.to_string())?;
        let analytic = backward(&params, &cache, &probs, &labels).map_err(|e| e.to_string())?;
        for t in 0..params.tensors.len() {
            for k in 0..params.tensors[t].data.len() {
                let a = analytic.tensors[t].data[k];
                let rel_error = |numeric: f64| (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_REL_FLOOR);
                let mut step = GRAD_STEP;
                let (numeric, smooth) = central_difference(&mut params, t, k, step, &batch, &labels);
                let first = rel_error(numeric);
                worst_fixed_step = worst_fixed_step.max(first);
                let rel = if smooth {
                    first
                } else {
                    straddled += 1;
                    loop {
                        step /= 10.0;
                        let (numeric, smooth) = central_difference(&mut params, t, k, step, &batch, &labels);
                        if smooth {
                            break rel_error(numeric);
                        }
                        if step / 10.0 < GRAD_MIN_STEP {
                            unresolved += 1;
                            break first;
                        }
                    }
                };
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst < GRAD_REL_TOLERANCE && elapsed < GRAD_BUDGET,
        format!(
            "{GRAD_SEEDS} seeds, {checked} parameters, max relative error {worst:.2e}; \
             {straddled} stencils at h={GRAD_STEP:e} crossed a ReLU/max-pool switch and were re-taken \
             at a smaller step ({unresolved} unresolved), h={GRAD_STEP:e} everywhere gives {worst_fixed_step:.2e}; {elapsed:.2?}"
        ),
    )
}

/// Central difference of the loss in parameter `(t, k)`, and whether both
/// ends of the stencil share one activation pattern.
fn central_difference(
    params: &mut ModelParams<f64>,
    t: usize,
    k: usize,
    step: f64,
    batch: &Tensor4<f64>,
    labels: &[[f64; 2]],
) -> (f64, bool) {
    let original = params.tensors[t].data[k];
    params.tensors[t].data[k] = original + step;
    let (plus, plus_cache) = loss_and_cache(params, batch, labels);
    params.tensors[t].data[k] = original - step;
    let (minus, minus_cache) = loss_and_cache(params, batch, labels);
    params.tensors[t].data[k] = original;
    ((plus - minus) / (2.0 * step), plus_cache.same_activation_pattern(&minus_cache))
}

fn splice_salience() -> Outcome {
    let start = Instant::now();
    let spec = ToyCorpusSpec::default();
    let base_q = QualityLevel::new(95).unwrap();
    let (side, size) = (spec.rect_side, 128u32);
    let mut rng = SplitMix64::new(2024);
    let mut passing = 0;
    let mut lowest = f64::INFINITY;
    for _ in 0..SPLICES {
        let img = natural_image(size, size, rng.next_u64()).map_err(|e| e.to_string())?;
        let rw = rng.range_inclusive(side.0 as i64, side.1 as i64) as u32;
        let rh = rng.range_inclusive(side.0 as i64, side.1 as i64) as u32;
        let rect = Rect::new(
            rng.below((size - rw + 1) as u64) as u32,
            rng.below((size - rh + 1) as u64) as u32,
            rw,
            rh,
        );
        let donor_q = QualityLevel::new(rng.range_inclusive(55, 75)).unwrap();
        let spliced = synth_splice(&img, rect, donor_q, base_q, rng.next_u64()).map_err(|e| e.to_string())?;
        let ela = compute_ela(&spliced, base_q).map_err(|e| e.to_string())?;

        let (mut inside, mut outside) = ((0u64, 0u64), (0u64, 0u64));
        for y in 0..size {
            for x in 0..size {
                let i = 3 * (y * size + x) as usize;
                let sum: u64 = ela.data()[i..i + 3].iter().map(|&v| v as u64).sum();
                let acc = if rect.contains(x, y) { &mut inside } else { &mut outside };
                acc.0 += sum;
                acc.1 += 3;
            }
        }
        let ratio = (inside.0 as f64 / inside.1 as f64) / (outside.0 as f64 / outside.1 as f64);
        lowest = lowest.min(ratio);
        if ratio >= SPLICE_RATIO {
            passing += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        passing >= SPLICES_REQUIRED && elapsed < SPLICE_BUDGET,
        format!("{passing}/{SPLICES} splices with inside/outside >= {SPLICE_RATIO}, lowest ratio {lowest:.2}, {elapsed:.2?}"),
    )
}

fn desk_scale_training() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let records = write_toy_corpus(dir.path(), &ToyCorpusSpec::default()).map_err(|e| e.to_string())?;
    let manifest = split_manifest(&records, SplitRatios::default(), 42, ManifestSettings::default())
        .map_err(|e| e.to_string())?;
    let config = TrainConfig {
        epochs: MAX_EPOCHS,
        seed: 42,
        deterministic: true,
        ..TrainConfig::default()
    };

    let start = Instant::now();
    let (_, history) = train(&manifest, dir.path(), &config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (_, rerun) = train(&manifest, dir.path(), &config).map_err(|e| e.to_string())?;
    let identical = history.to_csv() == rerun.to_csv();

    let reached = history.records.iter().find(|r| r.val_accuracy >= TARGET_VAL_ACCURACY);
    let best = history.records.iter().map(|r| r.val_accuracy).fold(0.0, f64::max);
    let last = history.last().map(|r| r.val_accuracy).unwrap_or(0.0);
    check(
        reached.is_some() && elapsed < TRAIN_BUDGET && identical,
        format!(
            "val_acc >= {TARGET_VAL_ACCURACY} first at epoch {}, best {best:.3}, final {last:.3}, {elapsed:.1?} per run, rerun history {}",
            reached.map_or("never".to_string(), |r| r.epoch.to_string()),
            if identical { "byte-identical" } else { "DIFFERS" }
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);
type ScoreTransform = (&'static str, fn(f64) -> f64);

fn roc_structure() -> Outcome {
    let transforms: [ScoreTransform; 3] = [
        ("cube", |p| p * p * p),
        ("sqrt", f64::sqrt),
        ("exp", |p| ((4.0 * p).exp() - 1.0) / (4.0f64.exp() - 1.0)),
    ];
    let mut rng = SplitMix64::new(7);
    for set in 0..RANDOM_SETS {
        let rows = random_set(&mut rng);
        let curve = roc_curve(&PredictionSet::from_scores(&rows).unwrap()).map_err(|e| e.to_string())?;
        let pts = &curve.points;
        if pts.first() != Some(&(0.0, 0.0)) || pts.last() != Some(&(1.0, 1.0)) {
            return Err(format!("set {set}: endpoints {:?} .. {:?}", pts.first(), pts.last()));
        }
        if !pts.iter().all(|&(x, y)| (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            return Err(format!("set {set}: coordinate outside [0, 1]"));
        }
        if !pts.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1) {
            return Err(format!("set {set}: coordinates not monotone"));
        }
        for (name, f) in &transforms {
            let mapped: Vec<(Label, f64)> = rows.iter().map(|&(l, p)| (l, f(p).clamp(0.0, 1.0))).collect();
            let other = roc_curve(&PredictionSet::from_scores(&mapped).unwrap()).map_err(|e| e.to_string())?;
            if other.points != curve.points || (auc(&other) - auc(&curve)).abs() > AUC_TOLERANCE {
                return Err(format!("set {set}: ROC changed under {name} transform"));
            }
        }
    }
    Ok(format!(
        "{RANDOM_SETS} sets: endpoints, monotone coordinates, invariant under {} transforms",
        transforms.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("reported F-measure table", reported_f_table),
        ("head parameter arithmetic", head_arithmetic),
        ("AUC equals Mann-Whitney statistic", auc_oracle),
        ("gradient check vs central differences", gradient_check),
        ("ELA splice salience", splice_salience),
        ("desk-scale end-to-end training", desk_scale_training),
        ("ROC structural properties", roc_structure),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} [{name}]: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} [{name}]: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
