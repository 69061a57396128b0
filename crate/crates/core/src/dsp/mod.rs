//! Signal preprocessing: band-pass, resampling, IQR normalization and
//! 30-second epoching, applied in that order.

mod filter;
mod resample;

pub use filter::{butterworth_bandpass, Biquad, SosFilter};
pub use resample::{rational_ratio, resample_poly};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edf::ChannelSignal;
use crate::hypno::{EpochGrid, HypnoError, EPOCH_SECONDS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("sampling rate {fs} Hz too low for a {high_hz} Hz band edge")]
    NyquistViolation { fs: f64, high_hz: f64 },
    #[error("invalid preprocessing config: {0}")]
    InvalidConfig(String),
    #[error("signal {label:?} has zero interquartile range")]
    DegenerateSignal { label: String },
    #[error("signal {label:?} too short: {len} samples, need {needed}")]
    TooShort { label: String, len: usize, needed: usize },
    #[error("signal {label:?} sampled at {fs} Hz, expected {expected} Hz")]
    WrongRate { label: String, fs: f64, expected: f64 },
    #[error(transparent)]
    Grid(#[from] HypnoError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocConfig {
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub target_fs: f64,
    pub epoch_s: f64,
    /// Order of the analog low-pass prototype; the band-pass has this many
    /// second-order sections.
    pub filter_order: usize,
}

impl Default for PreprocConfig {
    fn default() -> Self {
        PreprocConfig { band_low_hz: 0.3, band_high_hz: 35.0, target_fs: 64.0, epoch_s: EPOCH_SECONDS, filter_order: 4 }
    }
}

impl PreprocConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        if !(0.0 < self.band_low_hz && self.band_low_hz < self.band_high_hz && self.target_fs > 0.0) {
            return Err(DspError::InvalidConfig(format!(
                "need 0 < {} < {} and a positive target rate",
                self.band_low_hz, self.band_high_hz
            )));
        }
        if self.epoch_s != EPOCH_SECONDS {
            return Err(DspError::InvalidConfig(format!("epoch length must be {EPOCH_SECONDS} s")));
        }
        if self.filter_order == 0 {
            return Err(DspError::InvalidConfig("filter order must be positive".into()));
        }
        Ok(())
    }

    pub fn samples_per_epoch(&self) -> usize {
        (self.target_fs * self.epoch_s).round() as usize
    }
}

/// Normalized samples cut into consecutive epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochedChannel {
    pub label: String,
    pub grid: EpochGrid,
    pub samples_per_epoch: usize,
    data: Vec<f64>,
}

impl EpochedChannel {
    pub fn new(label: impl Into<String>, grid: EpochGrid, samples_per_epoch: usize, data: Vec<f64>) -> Result<Self, DspError> {
        if data.len() != grid.epoch_count() * samples_per_epoch {
            return Err(HypnoError::LengthMismatch { expected: grid.epoch_count() * samples_per_epoch, actual: data.len() }.into());
        }
        Ok(EpochedChannel { label: label.into(), grid, samples_per_epoch, data })
    }

    pub fn epoch_count(&self) -> usize {
        self.grid.epoch_count()
    }

    pub fn epoch(&self, i: usize) -> &[f64] {
        &self.data[i * self.samples_per_epoch..(i + 1) * self.samples_per_epoch]
    }

    pub fn epochs(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.samples_per_epoch)
    }
}

/// Zero-phase Butterworth band-pass.
pub fn bandpass(x: &ChannelSignal, cfg: &PreprocConfig) -> Result<ChannelSignal, DspError> {
    if !(x.fs > 2.0 * cfg.band_high_hz) {
        return Err(DspError::NyquistViolation { fs: x.fs, high_hz: cfg.band_high_hz });
    }
    if !(cfg.band_low_hz > 0.0 && cfg.band_low_hz < cfg.band_high_hz) || cfg.filter_order == 0 {
        return Err(DspError::InvalidConfig(format!("band {}..{} Hz", cfg.band_low_hz, cfg.band_high_hz)));
    }
    let filter = butterworth_bandpass(cfg.filter_order, cfg.band_low_hz, cfg.band_high_hz, x.fs);
    Ok(ChannelSignal::new(x.label.clone(), x.fs, filter.filtfilt(&x.samples)))
}

/// Band-limited rational resampling to `target_fs`. Identity when the rate
/// already matches.
pub fn resample(x: &ChannelSignal, target_fs: f64) -> ChannelSignal {
    if x.fs == target_fs {
        return x.clone();
    }
    let (up, down) = rational_ratio(target_fs / x.fs);
    let samples = resample_poly(&x.samples, up as usize, down as usize);
    ChannelSignal::new(x.label.clone(), x.fs * up as f64 / down as f64, samples)
}

/// Quantile by linear interpolation between order statistics of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and interquartile range.
pub fn median_iqr(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    (quantile_sorted(&sorted, 0.5), q3 - q1)
}

/// `(x - median) / IQR` over the whole channel.
pub fn iqr_normalize(x: &ChannelSignal) -> Result<ChannelSignal, DspError> {
    if x.samples.len() < 4 {
        return Err(DspError::TooShort { label: x.label.clone(), len: x.samples.len(), needed: 4 });
    }
    let (median, iqr) = median_iqr(&x.samples);
    if !(iqr > 0.0) {
        return Err(DspError::DegenerateSignal { label: x.label.clone() });
    }
    let samples = x.samples.iter().map(|v| (v - median) / iqr).collect();
    Ok(ChannelSignal::new(x.label.clone(), x.fs, samples))
}

/// Non-overlapping epochs; a trailing partial epoch is dropped.
pub fn epochize(x: &ChannelSignal, cfg: &PreprocConfig, recording_id: &str) -> Result<EpochedChannel, DspError> {
    if (x.fs - cfg.target_fs).abs() > 1e-9 {
        return Err(DspError::WrongRate { label: x.label.clone(), fs: x.fs, expected: cfg.target_fs });
    }
    let per = cfg.samples_per_epoch();
    let count = x.samples.len() / per;
    if count == 0 {
        return Err(DspError::TooShort { label: x.label.clone(), len: x.samples.len(), needed: per });
    }
    let grid = EpochGrid::new(recording_id, count)?;
    EpochedChannel::new(x.label.clone(), grid, per, x.samples[..count * per].to_vec())
}

/// Full chain: band-pass, resample, normalize, epoch.
pub fn preprocess(x: &ChannelSignal, cfg: &PreprocConfig, recording_id: &str) -> Result<EpochedChannel, DspError> {
    cfg.validate()?;
    let filtered = bandpass(x, cfg)?;
    let resampled = resample(&filtered, cfg.target_fs);
    let normalized = iqr_normalize(&resampled)?;
    epochize(&normalized, cfg, recording_id)
}
