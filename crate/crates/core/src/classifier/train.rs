use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::model::forward_sample;
use super::{
    adam_step, backward, bce_loss, forward, predicted_class, AdamConfig, AdamState, Architecture, ModelParams, Tensor4,
    HIDDEN_UNITS,
};
use crate::dataset::{preprocess, DatasetManifest, ExampleTensor, Split};
use crate::io::write_text_atomic;
use crate::metrics::{PredictionRow, PredictionSet};
use crate::rng::{shuffle, SplitMix64};
use crate::{Error, Result};

/// Mixed into the seed for the per-epoch shuffle stream so it does not
/// replay the initialization stream.
const SHUFFLE_STREAM: u64 = 0x5348_5546_464C_4521;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Seeds both weight initialization and the per-epoch shuffles.
    pub seed: u64,
    /// Run on a single thread.
    pub deterministic: bool,
    pub conv_channels: Vec<usize>,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 42,
            deterministic: false,
            conv_channels: vec![16, 32, 64],
            hidden: HIDDEN_UNITS,
        }
    }
}

impl TrainConfig {
    pub fn architecture(&self, input_height: usize, input_width: usize) -> Architecture {
        Architecture {
            input_height,
            input_width,
            conv_channels: self.conv_channels.clone(),
            hidden: self.hidden,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    /// `epoch,train_loss,train_acc,val_loss,val_acc`, six decimals, epochs
    /// numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{:.6}",
                r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
            );
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text_atomic(path, &self.to_csv())
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

fn preprocess_split(manifest: &DatasetManifest, base_dir: &Path, split: Split) -> Result<Vec<ExampleTensor>> {
    let records: Vec<_> = manifest.split(split).collect();
    records
        .par_iter()
        .map(|r| preprocess(r, base_dir, &manifest.settings))
        .collect()
}

fn run<T: Send>(deterministic: bool, job: impl FnOnce() -> T + Send) -> Result<T> {
    if deterministic {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        Ok(pool.install(job))
    } else {
        Ok(job())
    }
}

/// Preprocesses the train and val splits of `manifest` (image paths relative
/// to `base_dir`) and trains a freshly initialized network on them.
pub fn train(manifest: &DatasetManifest, base_dir: &Path, config: &TrainConfig) -> Result<(ModelParams<f32>, TrainHistory)> {
    run(config.deterministic, || {
        let train_set = preprocess_split(manifest, base_dir, Split::Train)?;
        let val_set = preprocess_split(manifest, base_dir, Split::Val)?;
        train_on_examples(&train_set, &val_set, config)
    })?
}

/// Minibatch Adam training on already preprocessed examples.
///
/// Every epoch shuffles the training order, takes `batch_size` steps (the last
/// batch may be short), and records the sample-weighted mean loss and accuracy
/// seen during the epoch alongside a full pass over `val`.
pub fn train_on_examples(
    train: &[ExampleTensor],
    val: &[ExampleTensor],
    config: &TrainConfig,
) -> Result<(ModelParams<f32>, TrainHistory)> {
    let first = train
        .first()
        .ok_or_else(|| Error::InvalidArgument("training split is empty".into()))?;
    if val.is_empty() {
        return Err(Error::InvalidArgument("validation split is empty".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let arch = config.architecture(first.height, first.width);
    let mut params = ModelParams::<f32>::init(arch, config.seed)?;
    let mut history = TrainHistory::default();
    if config.epochs == 0 {
        return Ok((params, history));
    }

    run(config.deterministic, || {
        let data = Tensor4::<f32>::from_examples(train)?;
        let labels: Vec<[f32; 2]> = train.iter().map(|e| e.one_hot().map(|v| v as f32)).collect();
        let mut state = AdamState::new(&params, config.adam);
        let mut rng = SplitMix64::new(config.seed ^ SHUFFLE_STREAM);
        let mut order: Vec<usize> = (0..train.len()).collect();

        for epoch in 1..=config.epochs {
            shuffle(&mut order, &mut rng);
            let (mut loss_sum, mut correct) = (0.0f64, 0usize);
            for (b, chunk) in order.chunks(config.batch_size).enumerate() {
                let batch = data.permute_batch(chunk);
                let batch_labels: Vec<[f32; 2]> = chunk.iter().map(|&i| labels[i]).collect();
                let (probs, cache) = forward(&params, &batch)?;
                let loss = bce_loss(&probs, &batch_labels)?;
                if !loss.is_finite() {
                    return Err(Error::DivergedLoss { epoch, batch: b + 1 });
                }
                loss_sum += loss * chunk.len() as f64;
                correct += count_correct(&probs, &batch_labels);
                let grads = backward(&params, &cache, &probs, &batch_labels)?;
                adam_step(&mut params, &grads, &mut state)?;
                if !params.is_finite() {
                    return Err(Error::DivergedLoss { epoch, batch: b + 1 });
                }
            }
            let (val_loss, val_accuracy) = evaluate_examples(&params, val)?;
            if !val_loss.is_finite() {
                return Err(Error::DivergedLoss { epoch, batch: 0 });
            }
            let record = EpochRecord {
                epoch,
                train_loss: loss_sum / train.len() as f64,
                train_accuracy: correct as f64 / train.len() as f64,
                val_loss,
                val_accuracy,
            };
            log::info!(
                "epoch {epoch}: train_loss={:.4} train_acc={:.4} val_loss={:.4} val_acc={:.4}",
                record.train_loss,
                record.train_accuracy,
                record.val_loss,
                record.val_accuracy
            );
            history.records.push(record);
        }
        Ok((params, history))
    })?
}

fn count_correct(probs: &[[f32; 2]], labels: &[[f32; 2]]) -> usize {
    probs
        .iter()
        .zip(labels)
        .filter(|(p, y)| predicted_class(p) == usize::from(y[1] > y[0]))
        .count()
}

/// Class probabilities for each example, in order.
pub fn predict_examples(params: &ModelParams<f32>, examples: &[ExampleTensor]) -> Result<Vec<[f32; 2]>> {
    let arch = &params.arch;
    if let Some(bad) = examples
        .iter()
        .find(|e| (e.height, e.width) != (arch.input_height, arch.input_width))
    {
        return Err(Error::ShapeMismatch(format!(
            "example is {}x{}, network expects {}x{}",
            bad.height, bad.width, arch.input_height, arch.input_width
        )));
    }
    Ok(examples
        .par_iter()
        .map(|e| {
            let (p, _) = forward_sample(params, &e.data);
            [p[0], p[1]]
        })
        .collect())
}

/// Mean loss and argmax accuracy over `examples`.
pub fn evaluate_examples(params: &ModelParams<f32>, examples: &[ExampleTensor]) -> Result<(f64, f64)> {
    let probs = predict_examples(params, examples)?;
    let labels: Vec<[f32; 2]> = examples.iter().map(|e| e.one_hot().map(|v| v as f32)).collect();
    let loss = bce_loss(&probs, &labels)?;
    Ok((loss, count_correct(&probs, &labels) as f64 / examples.len() as f64))
}

/// Runs the network over every record of `split`.
pub fn predict(params: &ModelParams<f32>, manifest: &DatasetManifest, base_dir: &Path, split: Split) -> Result<PredictionSet> {
    let records: Vec<_> = manifest.split(split).collect();
    let examples = preprocess_split(manifest, base_dir, split)?;
    let probs = predict_examples(params, &examples)?;
    PredictionSet::new(
        records
            .iter()
            .zip(probs)
            .map(|(r, p)| PredictionRow {
                path: r.path.to_string_lossy().into_owned(),
                label: r.label,
                p_authentic: p[0] as f64,
                p_tampered: p[1] as f64,
            })
            .collect(),
    )
}
