//! Mini-batch AdamW training of the softmax stager.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adamw::AdamW;
use super::features::EpochFeatures;
use super::model::{loss_and_grad, SoftmaxModel, TrainingMeta};
use super::StagerError;
use crate::hypno::{argmax_index, Hypnogram, N_STAGES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub peak_lr: f64,
    pub lr_division_factor: f64,
    pub lr_step_epochs: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    /// Share of recordings (by id order, taken from the end) held out for
    /// model selection when no validation set is given.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            peak_lr: 0.01,
            lr_division_factor: 2.0,
            lr_step_epochs: 20,
            max_epochs: 100,
            batch_size: 256,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), StagerError> {
        let positive = [self.peak_lr, self.lr_division_factor, self.eps];
        if positive.iter().any(|v| !(*v > 0.0))
            || self.lr_step_epochs == 0
            || self.batch_size == 0
            || self.weight_decay < 0.0
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(0.0..1.0).contains(&self.validation_fraction)
        {
            return Err(StagerError::InvalidConfig(format!("{self:?}")));
        }
        Ok(())
    }

    /// Step schedule: the peak rate divided once per `lr_step_epochs`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.peak_lr / self.lr_division_factor.powi((epoch / self.lr_step_epochs) as i32)
    }
}

/// Per-channel features of one recording with its reference labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecording {
    pub recording_id: String,
    pub channels: Vec<EpochFeatures>,
    pub labels: Hypnogram,
}

struct Samples {
    dim: usize,
    x: Vec<f64>,
    y: Vec<usize>,
}

impl Samples {
    fn new(dim: usize) -> Self {
        Samples { dim, x: Vec::new(), y: Vec::new() }
    }

    fn len(&self) -> usize {
        self.y.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    fn push(&mut self, x: &[f64], y: usize) {
        self.x.extend_from_slice(x);
        self.y.push(y);
    }

    fn extend_from(&mut self, rec: &LabeledRecording) -> Result<(), StagerError> {
        for ch in &rec.channels {
            if ch.dim != self.dim {
                return Err(StagerError::DimensionMismatch { expected: self.dim, actual: ch.dim });
            }
            ch.grid.ensure_matches(rec.labels.grid())?;
            for (row, stage) in ch.rows().zip(rec.labels.stages()) {
                if let Some(y) = stage.index() {
                    self.push(row, y);
                }
            }
        }
        Ok(())
    }

    fn standardized(&self, mean: &[f64], scale: &[f64]) -> Samples {
        let mut out = Samples::new(self.dim);
        out.y = self.y.clone();
        out.x = self.x.chunks_exact(self.dim).flat_map(|r| r.iter().zip(mean).zip(scale).map(|((v, m), s)| (v - m) / s)).collect();
        out
    }
}

fn accuracy(weights: &[f64], samples: &Samples) -> f64 {
    if samples.len() == 0 {
        return 0.0;
    }
    let correct = (0..samples.len())
        .filter(|&i| {
            let z = super::model::logits(weights, samples.dim, samples.row(i));
            argmax_index(&z) == samples.y[i]
        })
        .count();
    correct as f64 / samples.len() as f64
}

fn split_validation<'a>(
    recordings: &'a [LabeledRecording],
    fraction: f64,
) -> (Vec<&'a LabeledRecording>, Vec<&'a LabeledRecording>) {
    let mut sorted: Vec<&LabeledRecording> = recordings.iter().collect();
    sorted.sort_by(|a, b| a.recording_id.cmp(&b.recording_id));
    if sorted.len() < 2 {
        return (sorted, Vec::new());
    }
    let n_val = ((sorted.len() as f64 * fraction).round() as usize).clamp(1, sorted.len() - 1);
    let val = sorted.split_off(sorted.len() - n_val);
    (sorted, val)
}

/// Trains from zero weights and returns the snapshot with the best
/// validation accuracy (the initial weights included).
pub fn train(
    recordings: &[LabeledRecording],
    validation: Option<&[LabeledRecording]>,
    cfg: &TrainConfig,
) -> Result<SoftmaxModel, StagerError> {
    cfg.validate()?;
    let dim = recordings
        .iter()
        .flat_map(|r| r.channels.first())
        .map(|c| c.dim)
        .next()
        .ok_or(StagerError::DegenerateLabels)?;

    let (train_recs, val_recs): (Vec<&LabeledRecording>, Vec<&LabeledRecording>) = match validation {
        Some(v) => (recordings.iter().collect(), v.iter().collect()),
        None => split_validation(recordings, cfg.validation_fraction),
    };
    let mut raw_train = Samples::new(dim);
    for r in &train_recs {
        raw_train.extend_from(r)?;
    }
    let mut raw_val = Samples::new(dim);
    for r in &val_recs {
        raw_val.extend_from(r)?;
    }
    if raw_val.len() == 0 && raw_train.len() >= 5 {
        // Single recording: hold out its last 20% of samples.
        let cut = raw_train.len() - ((raw_train.len() as f64 * cfg.validation_fraction).round() as usize).max(1);
        raw_val.x = raw_train.x.split_off(cut * dim);
        raw_val.y = raw_train.y.split_off(cut);
    }
    let mut seen = [false; N_STAGES];
    for &y in &raw_train.y {
        seen[y] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(StagerError::DegenerateLabels);
    }

    let mut model = SoftmaxModel::zeros(dim);
    let n = raw_train.len() as f64;
    for j in 0..dim {
        let mean = (0..raw_train.len()).map(|i| raw_train.row(i)[j]).sum::<f64>() / n;
        let var = (0..raw_train.len()).map(|i| (raw_train.row(i)[j] - mean).powi(2)).sum::<f64>() / n;
        model.feature_mean[j] = mean;
        model.feature_scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let train_set = raw_train.standardized(&model.feature_mean, &model.feature_scale);
    let val_set = raw_val.standardized(&model.feature_mean, &model.feature_scale);
    let score = |w: &[f64]| if val_set.len() > 0 { accuracy(w, &val_set) } else { accuracy(w, &train_set) };

    let mut weights = model.weights.clone();
    let mut opt = AdamW::new(weights.len(), cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut meta = TrainingMeta {
        seed: cfg.seed,
        config: Some(cfg.clone()),
        best_val_accuracy: score(&weights),
        ..TrainingMeta::default()
    };
    let mut best = weights.clone();

    for epoch in 0..cfg.max_epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| train_set.row(i)).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| train_set.y[i]).collect();
            let (loss, grad) = loss_and_grad(&weights, dim, &xs, &ys);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(StagerError::NonFiniteLoss { epoch });
            }
            epoch_loss += loss * batch.len() as f64;
            opt.step(&mut weights, &grad, lr);
        }
        meta.loss_curve.push(epoch_loss / train_set.len() as f64);
        let acc = score(&weights);
        meta.val_accuracy_curve.push(acc);
        if acc > meta.best_val_accuracy {
            meta.best_val_accuracy = acc;
            meta.best_epoch = epoch + 1;
            best.clone_from(&weights);
        }
        log::debug!("epoch {epoch}: lr {lr:.5} loss {:.5} val acc {acc:.4}", meta.loss_curve[epoch]);
    }
    model.weights = best;
    model.meta = meta;
    Ok(model)
}

/// Fraction of scored epochs in `recordings` (all channels) the model gets right.
pub fn evaluate_accuracy(model: &SoftmaxModel, recordings: &[LabeledRecording]) -> Result<f64, StagerError> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for rec in recordings {
        for ch in &rec.channels {
            for (row, stage) in ch.rows().zip(rec.labels.stages()) {
                if let Some(y) = stage.index() {
                    total += 1;
                    correct += usize::from(argmax_index(&model.predict(row)?) == y);
                }
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}
