//! Multinomial logistic (softmax) classifier over epoch features.

use serde::{Deserialize, Serialize};

use super::features::EpochFeatures;
use super::train::TrainConfig;
use super::StagerError;
use crate::hypno::{Hypnodensity, N_STAGES};

/// Probability floor inside the cross-entropy logarithm.
pub const CE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub config: Option<TrainConfig>,
    /// Mean training loss per training epoch.
    pub loss_curve: Vec<f64>,
    /// Validation accuracy after each training epoch.
    pub val_accuracy_curve: Vec<f64>,
    /// Training epoch of the returned snapshot; 0 means the initial weights.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

/// Weights are `N_STAGES` rows of `n_features + 1` (bias last). Inputs are
/// standardized with `feature_mean` / `feature_scale` before the linear map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    pub n_features: usize,
    pub weights: Vec<f64>,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub meta: TrainingMeta,
}

impl SoftmaxModel {
    pub fn zeros(n_features: usize) -> Self {
        SoftmaxModel {
            n_features,
            weights: vec![0.0; N_STAGES * (n_features + 1)],
            feature_mean: vec![0.0; n_features],
            feature_scale: vec![1.0; n_features],
            meta: TrainingMeta::default(),
        }
    }

    pub fn stride(&self) -> usize {
        self.n_features + 1
    }

    pub fn standardize(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n_features {
            out[i] = (x[i] - self.feature_mean[i]) / self.feature_scale[i];
        }
    }

    /// Class probabilities for one raw feature vector.
    pub fn predict(&self, x: &[f64]) -> Result<[f64; N_STAGES], StagerError> {
        if x.len() != self.n_features {
            return Err(StagerError::DimensionMismatch { expected: self.n_features, actual: x.len() });
        }
        let mut z = vec![0.0; self.n_features];
        self.standardize(x, &mut z);
        Ok(softmax(&logits(&self.weights, self.n_features, &z)))
    }
}

pub fn logits(weights: &[f64], n_features: usize, x: &[f64]) -> [f64; N_STAGES] {
    let stride = n_features + 1;
    let mut out = [0.0; N_STAGES];
    for (k, o) in out.iter_mut().enumerate() {
        let w = &weights[k * stride..(k + 1) * stride];
        *o = w[..n_features].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[n_features];
    }
    out
}

pub fn softmax(z: &[f64; N_STAGES]) -> [f64; N_STAGES] {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut e = z.map(|v| (v - max).exp());
    let sum: f64 = e.iter().sum();
    for v in &mut e {
        *v /= sum;
    }
    e
}

/// Mean cross-entropy over a batch and its gradient with respect to the
/// weights. `xs` are already standardized.
pub fn loss_and_grad(weights: &[f64], n_features: usize, xs: &[&[f64]], labels: &[usize]) -> (f64, Vec<f64>) {
    let stride = n_features + 1;
    let mut grad = vec![0.0; weights.len()];
    let mut loss = 0.0;
    let scale = 1.0 / xs.len() as f64;
    for (x, &y) in xs.iter().zip(labels) {
        let p = softmax(&logits(weights, n_features, x));
        if p[y] < CE_FLOOR {
            // The floor is flat, so this sample contributes no gradient.
            loss -= CE_FLOOR.ln();
            continue;
        }
        loss -= p[y].ln();
        for k in 0..N_STAGES {
            let d = (p[k] - f64::from(u8::from(k == y))) * scale;
            let row = &mut grad[k * stride..(k + 1) * stride];
            for (g, xi) in row[..n_features].iter_mut().zip(x.iter()) {
                *g += d * xi;
            }
            row[n_features] += d;
        }
    }
    (loss * scale, grad)
}

/// Applies the model to every epoch of one channel.
pub fn apply(model: &SoftmaxModel, features: &EpochFeatures) -> Result<Hypnodensity, StagerError> {
    if features.dim != model.n_features {
        return Err(StagerError::DimensionMismatch { expected: model.n_features, actual: features.dim });
    }
    let rows = features.rows().map(|x| model.predict(x)).collect::<Result<Vec<_>, _>>()?;
    Ok(Hypnodensity::new(features.grid.clone(), rows)?)
}
