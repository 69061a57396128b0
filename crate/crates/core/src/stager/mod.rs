//! Feature-based automatic stager producing hypnodensities.

mod adamw;
mod features;
mod model;
mod train;

pub use adamw::AdamW;
pub use features::{
    epoch_features, extract_features, spectral_entropy, EpochFeatures, Welch, BANDS, FEATURE_NAMES, N_FEATURES,
    POWER_FLOOR,
};
pub use model::{apply, logits, loss_and_grad, softmax, SoftmaxModel, TrainingMeta, CE_FLOOR};
pub use train::{evaluate_accuracy, train, LabeledRecording, TrainConfig};

use thiserror::Error;

use crate::dsp::{preprocess, DspError, PreprocConfig};
use crate::edf::ChannelSignal;
use crate::hypno::{ensemble_average, HypnoError, Hypnodensity};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StagerError {
    #[error("feature dimension mismatch: model expects {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("training labels cover fewer than two stages")]
    DegenerateLabels,
    #[error("loss became non-finite in training epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("no channel could be staged")]
    NoEligibleChannels,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Hypno(#[from] HypnoError),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Preprocesses every channel and extracts its features.
pub fn channel_features(
    channels: &[ChannelSignal],
    cfg: &PreprocConfig,
    recording_id: &str,
) -> Result<Vec<EpochFeatures>, StagerError> {
    channels.iter().map(|c| Ok(extract_features(&preprocess(c, cfg, recording_id)?))).collect()
}

/// Stages each channel and averages the per-channel hypnodensities. Channels
/// that cannot be preprocessed are skipped with a warning.
pub fn stage_recording(
    model: &SoftmaxModel,
    channels: &[ChannelSignal],
    cfg: &PreprocConfig,
    recording_id: &str,
) -> Result<Hypnodensity, StagerError> {
    let mut per_channel = Vec::new();
    for c in channels {
        match preprocess(c, cfg, recording_id) {
            Ok(e) => per_channel.push(apply(model, &extract_features(&e))?),
            Err(err) => log::warn!("skipping channel {:?}: {err}", c.label),
        }
    }
    if per_channel.is_empty() {
        return Err(StagerError::NoEligibleChannels);
    }
    let n = per_channel.iter().map(Hypnodensity::len).min().unwrap_or(0);
    let trimmed = per_channel
        .iter()
        .map(|h| Hypnodensity::new(crate::hypno::EpochGrid::new(recording_id, n)?, h.rows()[..n].to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ensemble_average(&trimmed)?)
}
