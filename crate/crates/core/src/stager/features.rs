//! Per-epoch spectral features from a Welch periodogram.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dsp::{median_iqr, EpochedChannel};
use crate::hypno::{EpochGrid, HypnoError, EPOCH_SECONDS};

/// Floor added before taking logarithms of powers.
pub const POWER_FLOOR: f64 = 1e-12;

/// Frequency bands (Hz, half-open) whose log power is a feature.
pub const BANDS: [(f64, f64); 5] = [(0.3, 4.0), (4.0, 8.0), (8.0, 12.0), (12.0, 16.0), (16.0, 30.0)];

pub const N_FEATURES: usize = 8;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "log_power_0.3_4",
    "log_power_4_8",
    "log_power_8_12",
    "log_power_12_16",
    "log_power_16_30",
    "log_power_total",
    "spectral_entropy",
    "amplitude_iqr",
];

/// Welch segment length in seconds.
const SEGMENT_S: f64 = 4.0;

/// Feature matrix of one channel: `epoch_count × dim`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochFeatures {
    pub channel: String,
    pub grid: EpochGrid,
    pub dim: usize,
    values: Vec<f64>,
}

impl EpochFeatures {
    pub fn new(channel: impl Into<String>, grid: EpochGrid, dim: usize, values: Vec<f64>) -> Result<Self, HypnoError> {
        if values.len() != grid.epoch_count() * dim {
            return Err(HypnoError::LengthMismatch { expected: grid.epoch_count() * dim, actual: values.len() });
        }
        Ok(EpochFeatures { channel: channel.into(), grid, dim, values })
    }

    pub fn epoch_count(&self) -> usize {
        self.grid.epoch_count()
    }

    pub fn row(&self, epoch: usize) -> &[f64] {
        &self.values[epoch * self.dim..(epoch + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }
}

/// One-sided Welch power spectral density.
pub struct Welch {
    fs: f64,
    nperseg: usize,
    step: usize,
    window: Vec<f64>,
    window_power: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl Welch {
    /// Hann-windowed segments of `SEGMENT_S` seconds with 50% overlap,
    /// shortened to the epoch length when needed.
    pub fn new(fs: f64, epoch_len: usize) -> Self {
        let nperseg = ((SEGMENT_S * fs).round() as usize).clamp(2, epoch_len.max(2));
        let window: Vec<f64> = (0..nperseg).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / nperseg as f64).cos()).collect();
        let window_power = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(nperseg);
        Welch { fs, nperseg, step: (nperseg / 2).max(1), window, window_power, fft }
    }

    pub fn resolution(&self) -> f64 {
        self.fs / self.nperseg as f64
    }

    /// PSD for bins `0..=nperseg/2`.
    pub fn psd(&self, x: &[f64]) -> Vec<f64> {
        let nbins = self.nperseg / 2 + 1;
        let mut acc = vec![0.0; nbins];
        let mut segments = 0usize;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nperseg];
        let mut start = 0;
        while start + self.nperseg <= x.len() {
            let seg = &x[start..start + self.nperseg];
            let mean = seg.iter().sum::<f64>() / self.nperseg as f64;
            for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex64::new((v - mean) * w, 0.0);
            }
            self.fft.process(&mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b.norm_sqr();
            }
            segments += 1;
            start += self.step;
        }
        if segments == 0 {
            return acc;
        }
        let scale = 1.0 / (self.fs * self.window_power * segments as f64);
        for (k, a) in acc.iter_mut().enumerate() {
            *a *= scale;
            let nyquist = self.nperseg % 2 == 0 && k == nbins - 1;
            if k != 0 && !nyquist {
                *a *= 2.0;
            }
        }
        acc
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.resolution()
    }
}

/// Eight features of one epoch: five band log powers, log total power,
/// normalized spectral entropy and the amplitude IQR.
pub fn epoch_features(welch: &Welch, epoch: &[f64]) -> [f64; N_FEATURES] {
    let psd = welch.psd(epoch);
    let df = welch.resolution();
    let mut out = [0.0; N_FEATURES];
    for (slot, &(lo, hi)) in out.iter_mut().zip(BANDS.iter()) {
        let power: f64 = psd
            .iter()
            .enumerate()
            .filter(|&(k, _)| {
                let f = welch.frequency(k);
                f >= lo && f < hi
            })
            .map(|(_, p)| p * df)
            .sum();
        *slot = (power + POWER_FLOOR).ln();
    }
    let spectrum = &psd[1..];
    let total: f64 = spectrum.iter().sum::<f64>() * df;
    out[5] = (total + POWER_FLOOR).ln();
    out[6] = spectral_entropy(spectrum);
    out[7] = if epoch.len() >= 2 { median_iqr(epoch).1 } else { 0.0 };
    out
}

/// Shannon entropy of the normalized spectrum divided by its maximum.
pub fn spectral_entropy(spectrum: &[f64]) -> f64 {
    let total: f64 = spectrum.iter().sum();
    if !(total > 0.0) || spectrum.len() < 2 {
        return 0.0;
    }
    let h: f64 = spectrum.iter().filter(|&&p| p > 0.0).map(|&p| p / total).map(|p| -p * p.ln()).sum();
    h / (spectrum.len() as f64).ln()
}

pub fn extract_features(e: &EpochedChannel) -> EpochFeatures {
    let fs = e.samples_per_epoch as f64 / EPOCH_SECONDS;
    let welch = Welch::new(fs, e.samples_per_epoch);
    let values = e.epochs().flat_map(|epoch| epoch_features(&welch, epoch)).collect();
    EpochFeatures::new(e.label.clone(), e.grid.clone(), N_FEATURES, values).expect("one row per epoch")
}
