//! Seeded synthetic cohorts: true hypnograms, scorer panels, calibrated model
//! hypnodensities and optional band-limited signals.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edf::ChannelSignal;
use crate::hypno::{EpochGrid, HypnoError, Hypnodensity, Hypnogram, ScorerPanel, Stage, EPOCH_SECONDS, N_STAGES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Hypno(#[from] HypnoError),
}

pub type Matrix = [[f64; N_STAGES]; N_STAGES];

pub const DEFAULT_TRANSITIONS: Matrix = [
    [0.90, 0.07, 0.02, 0.00, 0.01],
    [0.05, 0.80, 0.12, 0.00, 0.03],
    [0.02, 0.03, 0.90, 0.04, 0.01],
    [0.01, 0.00, 0.07, 0.92, 0.00],
    [0.02, 0.04, 0.02, 0.00, 0.92],
];

pub const DEFAULT_SCORER_CONFUSION: Matrix = [
    [0.90, 0.07, 0.02, 0.00, 0.01],
    [0.15, 0.60, 0.18, 0.00, 0.07],
    [0.01, 0.06, 0.88, 0.04, 0.01],
    [0.00, 0.00, 0.10, 0.90, 0.00],
    [0.02, 0.06, 0.02, 0.00, 0.90],
];

/// Upper bound on the per-epoch scaling of scorer error mass.
const MAX_DIFFICULTY: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalConfig {
    pub fs: f64,
    pub channels: Vec<String>,
    /// Standard deviation of broadband background noise, relative to unit band amplitudes.
    pub background_std: f64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig { fs: 128.0, channels: vec!["EEG C4-M1".into(), "EEG F4-M1".into()], background_std: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_recordings: usize,
    pub epochs_per_recording: usize,
    /// Row-stochastic stage transition matrix in canonical stage order.
    pub transitions: Matrix,
    pub n_scorers: usize,
    /// Row-stochastic matrix: row = true stage, column = scored stage.
    pub scorer_confusion: Matrix,
    /// Probability a scorer flags an epoch as uncertain when its vote is wrong.
    pub flag_prob_disagree: f64,
    /// Probability a scorer flags an epoch as uncertain when its vote is right.
    pub flag_prob_agree: f64,
    /// Scale scorer error mass and flag probabilities by how hard the model
    /// found the epoch.
    pub difficulty_coupling: bool,
    /// Spread of model confidence; small values concentrate it at its mean.
    pub temperature: f64,
    /// Expected share of epochs where the model argmax differs from truth.
    pub error_rate: f64,
    pub signals: Option<SignalConfig>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_recordings: 50,
            epochs_per_recording: 900,
            transitions: DEFAULT_TRANSITIONS,
            n_scorers: 10,
            scorer_confusion: DEFAULT_SCORER_CONFUSION,
            flag_prob_disagree: 0.12,
            flag_prob_agree: 0.002,
            difficulty_coupling: true,
            temperature: 1.0,
            error_rate: 0.18,
            signals: None,
        }
    }
}

fn check_stochastic(name: &str, m: &Matrix) -> Result<(), SynthError> {
    for (i, row) in m.iter().enumerate() {
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(SynthError::InvalidConfig(format!("{name} row {i} is not a probability vector")));
        }
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        check_stochastic("transitions", &self.transitions)?;
        check_stochastic("scorer_confusion", &self.scorer_confusion)?;
        let bad = |msg: &str| Err(SynthError::InvalidConfig(msg.to_string()));
        if self.n_recordings == 0 || self.epochs_per_recording == 0 {
            return bad("need at least one recording and one epoch");
        }
        if self.n_scorers == 0 {
            return bad("need at least one scorer");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if !(0.0..=0.5).contains(&self.error_rate) {
            return bad("error_rate must lie in [0, 0.5]");
        }
        if !(0.0..=1.0).contains(&self.flag_prob_agree) || !(0.0..=1.0).contains(&self.flag_prob_disagree) {
            return bad("flag probabilities must lie in [0, 1]");
        }
        if let Some(s) = &self.signals {
            if !(s.fs >= 64.0) || s.channels.is_empty() || !(s.background_std >= 0.0) {
                return bad("signals need fs >= 64 Hz, a channel and non-negative noise");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthRecording {
    pub recording_id: String,
    pub truth: Hypnogram,
    pub panel: ScorerPanel,
    pub model: Hypnodensity,
    pub signals: Vec<ChannelSignal>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub recordings: Vec<SynthRecording>,
}

/// Model confidence source: `c = 0.5 + 0.5·b` with `b ~ Beta` whose mean
/// gives `E[c] = 1 - error_rate` and whose concentration is `2 / temperature`.
struct Confidence {
    mean_b: f64,
    beta: Option<Beta<f64>>,
}

impl Confidence {
    fn new(cfg: &SynthConfig) -> Self {
        let mean_b = (0.5 - cfg.error_rate) / 0.5;
        let kappa = 2.0 / cfg.temperature;
        let (a, b) = (mean_b * kappa, (1.0 - mean_b) * kappa);
        let beta = if a > 1e-9 && b > 1e-9 && kappa < 1e9 { Beta::new(a.max(1e-3), b.max(1e-3)).ok() } else { None };
        Confidence { mean_b, beta }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match &self.beta {
            Some(d) => d.sample(rng),
            None => self.mean_b,
        }
    }
}

fn recording_id(i: usize) -> String {
    format!("rec_{i:03}")
}

fn draw_row(rng: &mut ChaCha8Rng, row: &[f64; N_STAGES]) -> usize {
    WeightedIndex::new(row).expect("validated stochastic row").sample(rng)
}

fn other_stage(rng: &mut ChaCha8Rng, weights: &[f64; N_STAGES], exclude: usize) -> usize {
    let mut w = *weights;
    w[exclude] = 0.0;
    if w.iter().sum::<f64>() <= 0.0 {
        w = [1.0; N_STAGES];
        w[exclude] = 0.0;
    }
    draw_row(rng, &w)
}

fn generate_recording(cfg: &SynthConfig, index: usize) -> Result<SynthRecording, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let id = recording_id(index);
    let grid = EpochGrid::new(&id, cfg.epochs_per_recording)?;
    let n = cfg.epochs_per_recording;
    let confidence = Confidence::new(cfg);

    let mut truth = Vec::with_capacity(n);
    let mut state = 0usize;
    for e in 0..n {
        if e > 0 {
            state = draw_row(&mut rng, &cfg.transitions[state]);
        }
        truth.push(state);
    }

    let mut rows = Vec::with_capacity(n);
    let mut difficulty = Vec::with_capacity(n);
    for &t in &truth {
        let b = confidence.sample(&mut rng);
        let c = 0.5 + 0.5 * b;
        let correct = rng.random::<f64>() < c;
        let predicted = if correct { t } else { other_stage(&mut rng, &cfg.scorer_confusion[t], t) };
        let alt = if correct { other_stage(&mut rng, &cfg.scorer_confusion[t], t) } else { t };
        let lambda = rng.random_range(0.3..0.9);
        let mut row = [(1.0 - c) * (1.0 - lambda) / 3.0; N_STAGES];
        row[predicted] = c;
        row[alt] = (1.0 - c) * lambda;
        rows.push(row);
        let d = if confidence.mean_b < 1.0 { (1.0 - b) / (1.0 - confidence.mean_b) } else { 1.0 };
        difficulty.push(if cfg.difficulty_coupling { d } else { 1.0 });
    }

    let mut scorers = Vec::with_capacity(cfg.n_scorers);
    let mut votes = vec![Vec::with_capacity(n); cfg.n_scorers];
    let mut flags = vec![Vec::with_capacity(n); cfg.n_scorers];
    for (e, &t) in truth.iter().enumerate() {
        let base = cfg.scorer_confusion[t];
        let off: f64 = 1.0 - base[t];
        let scale = if off > 0.0 { difficulty[e].min(MAX_DIFFICULTY).min(1.0 / off) } else { 1.0 };
        let mut row = base.map(|p| p * scale);
        row[t] = 1.0 - off * scale;
        for s in 0..cfg.n_scorers {
            let v = draw_row(&mut rng, &row);
            let base_flag = if v == t { cfg.flag_prob_agree } else { cfg.flag_prob_disagree };
            let p_flag = (base_flag * difficulty[e]).min(1.0);
            votes[s].push(Stage::SCOREABLE[v]);
            flags[s].push(rng.random::<f64>() < p_flag);
        }
    }
    for (s, (v, f)) in votes.into_iter().zip(flags).enumerate() {
        scorers.push((format!("scorer_{:02}", s + 1), Hypnogram::new(grid.clone(), v, f)?));
    }

    let truth_stages: Vec<Stage> = truth.iter().map(|&t| Stage::SCOREABLE[t]).collect();
    let signals = match &cfg.signals {
        Some(sc) => generate_signals(&truth_stages, sc, &mut rng),
        None => Vec::new(),
    };
    Ok(SynthRecording {
        recording_id: id,
        truth: Hypnogram::certain(grid.clone(), truth_stages)?,
        panel: ScorerPanel::new(scorers)?,
        model: Hypnodensity::new(grid, rows)?,
        signals,
    })
}

/// Generates the whole cohort. Each recording draws from its own stream of
/// the seeded generator, so output does not depend on thread scheduling.
pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset, SynthError> {
    cfg.validate()?;
    let recordings = (0..cfg.n_recordings)
        .into_par_iter()
        .map(|i| generate_recording(cfg, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SynthDataset { config: cfg.clone(), recordings })
}

/// Standard deviations of the delta, theta, alpha, sigma and beta components
/// for each stage.
pub const STAGE_BAND_AMPLITUDES: [[f64; 5]; N_STAGES] = [
    [0.4, 0.4, 1.5, 0.3, 1.0],
    [0.6, 1.4, 0.3, 0.2, 0.4],
    [1.0, 0.6, 0.2, 1.4, 0.2],
    [3.0, 0.5, 0.15, 0.15, 0.1],
    [0.5, 1.0, 0.4, 0.2, 0.9],
];

const SIGNAL_BANDS: [(f64, f64); 5] = [(0.5, 4.0), (4.0, 8.0), (8.0, 12.0), (12.0, 16.0), (16.0, 30.0)];

/// Band-limited Gaussian noise for one epoch, rescaled to unit variance.
fn band_noise(
    rng: &mut ChaCha8Rng,
    fft: &dyn rustfft::Fft<f64>,
    n: usize,
    fs: f64,
    (lo, hi): (f64, f64),
) -> Vec<f64> {
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..n.div_ceil(2) {
        let f = k as f64 * fs / n as f64;
        if f >= lo && f < hi {
            let z = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            spec[k] = z;
            spec[n - k] = z.conj();
        }
    }
    fft.process(&mut spec);
    let x: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let std = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    x.into_iter().map(|v| if std > 0.0 { v / std } else { 0.0 }).collect()
}

/// One signal per configured channel; each epoch mixes band-limited noise
/// with stage-specific band amplitudes. Values are in microvolts.
pub fn generate_signals(stages: &[Stage], cfg: &SignalConfig, rng: &mut ChaCha8Rng) -> Vec<ChannelSignal> {
    let n = (cfg.fs * EPOCH_SECONDS).round() as usize;
    let fft = FftPlanner::new().plan_fft_inverse(n);
    const MICROVOLTS: f64 = 20.0;
    cfg.channels
        .iter()
        .map(|label| {
            let mut samples = Vec::with_capacity(n * stages.len());
            for stage in stages {
                let amps = STAGE_BAND_AMPLITUDES[stage.index().unwrap_or(0)];
                let gain = (0.15 * rng.sample::<f64, _>(StandardNormal)).exp();
                let mut epoch: Vec<f64> =
                    (0..n).map(|_| cfg.background_std * rng.sample::<f64, _>(StandardNormal)).collect();
                for (&band, &a) in SIGNAL_BANDS.iter().zip(&amps) {
                    for (v, b) in epoch.iter_mut().zip(band_noise(rng, fft.as_ref(), n, cfg.fs, band)) {
                        *v += a * b;
                    }
                }
                samples.extend(epoch.into_iter().map(|v| v * gain * MICROVOLTS));
            }
            ChannelSignal::new(label.clone(), cfg.fs, samples)
        })
        .collect()
}
