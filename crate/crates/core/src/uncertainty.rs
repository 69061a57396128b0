//! Per-epoch uncertainty metrics over hypnodensities and gray-area selection.
//!
//! Five metrics are supported. Four grow with uncertainty; the ratio of
//! confidence shrinks towards 1 as the two leading stages converge, so every
//! comparison goes through [`UncertaintyMetric::uncertainty_key`].

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypno::{EpochGrid, HypnoError, Hypnodensity, N_STAGES};

/// Denominator floor for the ratio of confidence.
pub const RATIO_EPSILON: f64 = 1e-12;
/// Upper cap for the ratio of confidence.
pub const RATIO_CAP: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UncertaintyError {
    #[error("no uncertainty series given")]
    EmptyInput,
    #[error("fraction {0} outside [0, 1]")]
    InvalidFraction(f64),
    #[error("series mix metrics {0} and {1}")]
    MixedMetrics(UncertaintyMetric, UncertaintyMetric),
    #[error("unknown metric token {0:?} (expected ul, um, ur, uu or ue)")]
    UnknownMetric(String),
    #[error(transparent)]
    Grid(#[from] HypnoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMetric {
    #[serde(alias = "ul")]
    LeastConfidence,
    #[serde(alias = "um")]
    MarginOfConfidence,
    #[serde(alias = "ur")]
    RatioOfConfidence,
    #[serde(alias = "uu")]
    Unlikeability,
    #[serde(alias = "ue")]
    Entropy,
}

impl UncertaintyMetric {
    pub const ALL: [UncertaintyMetric; 5] = [
        UncertaintyMetric::LeastConfidence,
        UncertaintyMetric::MarginOfConfidence,
        UncertaintyMetric::RatioOfConfidence,
        UncertaintyMetric::Unlikeability,
        UncertaintyMetric::Entropy,
    ];

    /// `true` when a larger value means a more uncertain epoch.
    pub fn larger_is_uncertain(self) -> bool {
        self != UncertaintyMetric::RatioOfConfidence
    }

    /// Maps a metric value to a key where larger always means more uncertain.
    pub fn uncertainty_key(self, value: f64) -> f64 {
        if self.larger_is_uncertain() {
            value
        } else {
            -value
        }
    }

    /// `true` iff `value` is strictly more uncertain than `threshold`.
    pub fn exceeds(self, value: f64, threshold: f64) -> bool {
        self.uncertainty_key(value) > self.uncertainty_key(threshold)
    }

    /// Closed range of attainable values for five stages.
    pub fn range(self) -> (f64, f64) {
        match self {
            UncertaintyMetric::RatioOfConfidence => (1.0, RATIO_CAP),
            UncertaintyMetric::Unlikeability => (0.0, 1.0 - 1.0 / N_STAGES as f64),
            _ => (0.0, 1.0),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            UncertaintyMetric::LeastConfidence => "ul",
            UncertaintyMetric::MarginOfConfidence => "um",
            UncertaintyMetric::RatioOfConfidence => "ur",
            UncertaintyMetric::Unlikeability => "uu",
            UncertaintyMetric::Entropy => "ue",
        }
    }

    /// Display label used in plots and reports.
    pub fn label(self) -> &'static str {
        match self {
            UncertaintyMetric::LeastConfidence => "U_L",
            UncertaintyMetric::MarginOfConfidence => "U_M",
            UncertaintyMetric::RatioOfConfidence => "U_R",
            UncertaintyMetric::Unlikeability => "U_U",
            UncertaintyMetric::Entropy => "U_E",
        }
    }

    /// Evaluates the metric on one probability row.
    pub fn evaluate(self, row: &[f64; N_STAGES]) -> f64 {
        let n = N_STAGES as f64;
        let (first, second) = top_two(row);
        match self {
            UncertaintyMetric::LeastConfidence => ((1.0 - first) * n / (n - 1.0)).clamp(0.0, 1.0),
            UncertaintyMetric::MarginOfConfidence => (1.0 - (first - second)).clamp(0.0, 1.0),
            UncertaintyMetric::RatioOfConfidence => {
                if second <= RATIO_EPSILON {
                    RATIO_CAP
                } else {
                    (first / second).clamp(1.0, RATIO_CAP)
                }
            }
            UncertaintyMetric::Unlikeability => {
                let sq: f64 = row.iter().map(|p| p * p).sum();
                (1.0 - sq).clamp(0.0, 1.0 - 1.0 / n)
            }
            UncertaintyMetric::Entropy => {
                // 0 * log2(0) is taken as 0.
                let h: f64 = row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum();
                (h / n.log2()).clamp(0.0, 1.0)
            }
        }
    }
}

impl fmt::Display for UncertaintyMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for UncertaintyMetric {
    type Err = UncertaintyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UncertaintyMetric::ALL
            .into_iter()
            .find(|m| m.token().eq_ignore_ascii_case(s))
            .ok_or_else(|| UncertaintyError::UnknownMetric(s.to_string()))
    }
}

/// Largest value and the largest value among the remaining stages.
fn top_two(row: &[f64; N_STAGES]) -> (f64, f64) {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &p in row {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    (first, second)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySeries {
    grid: EpochGrid,
    metric: UncertaintyMetric,
    values: Vec<f64>,
}

impl UncertaintySeries {
    pub fn grid(&self) -> &EpochGrid {
        &self.grid
    }

    pub fn metric(&self) -> UncertaintyMetric {
        self.metric
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn compute_uncertainty(h: &Hypnodensity, metric: UncertaintyMetric) -> UncertaintySeries {
    UncertaintySeries {
        grid: h.grid().clone(),
        metric,
        values: h.rows().iter().map(|row| metric.evaluate(row)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    RankPct,
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrayProvenance {
    pub metric: UncertaintyMetric,
    pub mode: SelectionMode,
    pub parameter: f64,
}

/// Epochs flagged as gray areas together with the rule that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraySelection {
    grid: EpochGrid,
    mask: Vec<bool>,
    provenance: GrayProvenance,
}

impl GraySelection {
    pub fn new(grid: EpochGrid, mask: Vec<bool>, provenance: GrayProvenance) -> Result<Self, HypnoError> {
        if mask.len() != grid.epoch_count() {
            return Err(HypnoError::LengthMismatch { expected: grid.epoch_count(), actual: mask.len() });
        }
        Ok(GraySelection { grid, mask, provenance })
    }

    pub fn grid(&self) -> &EpochGrid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn provenance(&self) -> GrayProvenance {
        self.provenance
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// How rank-based selection counts epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankPooling {
    /// One ranking over every epoch of every recording.
    #[default]
    Dataset,
    /// Each recording contributes its own share of epochs.
    PerRecording,
}

/// Epoch positions `(series index, epoch index)` sorted most-uncertain first.
/// Ties fall back to `(recording_id, epoch_index)` ascending.
#[derive(Debug, Clone)]
pub struct RankedEpochs {
    order: Vec<(usize, usize)>,
}

impl RankedEpochs {
    pub fn new(series: &[UncertaintySeries]) -> Result<Self, UncertaintyError> {
        let metric = check_series(series)?;
        let mut order: Vec<(usize, usize)> = series
            .iter()
            .enumerate()
            .flat_map(|(r, s)| (0..s.values.len()).map(move |e| (r, e)))
            .collect();
        order.sort_by(|&(ra, ea), &(rb, eb)| {
            let ka = metric.uncertainty_key(series[ra].values[ea]);
            let kb = metric.uncertainty_key(series[rb].values[eb]);
            kb.total_cmp(&ka)
                .then_with(|| series[ra].grid.recording_id().cmp(series[rb].grid.recording_id()))
                .then_with(|| ra.cmp(&rb))
                .then_with(|| ea.cmp(&eb))
        });
        Ok(RankedEpochs { order })
    }

    pub fn order(&self) -> &[(usize, usize)] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Per-series masks for the `count` most uncertain epochs.
    pub fn top_masks(&self, series: &[UncertaintySeries], count: usize) -> Vec<Vec<bool>> {
        let mut masks: Vec<Vec<bool>> = series.iter().map(|s| vec![false; s.values.len()]).collect();
        for &(r, e) in self.order.iter().take(count) {
            masks[r][e] = true;
        }
        masks
    }
}

fn check_series(series: &[UncertaintySeries]) -> Result<UncertaintyMetric, UncertaintyError> {
    let metric = series.first().ok_or(UncertaintyError::EmptyInput)?.metric;
    if let Some(other) = series.iter().find(|s| s.metric != metric) {
        return Err(UncertaintyError::MixedMetrics(metric, other.metric));
    }
    Ok(metric)
}

/// Number of epochs a rank fraction selects out of `total`.
pub fn rank_count(pct: f64, total: usize) -> usize {
    ((pct * total as f64).round() as usize).min(total)
}

/// Marks the `round(pct × epochs)` most uncertain epochs, pooled according
/// to `pooling`.
pub fn select_gray_rank(
    series: &[UncertaintySeries],
    pct: f64,
    pooling: RankPooling,
) -> Result<Vec<GraySelection>, UncertaintyError> {
    if !(0.0..=1.0).contains(&pct) {
        return Err(UncertaintyError::InvalidFraction(pct));
    }
    let metric = check_series(series)?;
    let provenance = GrayProvenance { metric, mode: SelectionMode::RankPct, parameter: pct };
    let masks = match pooling {
        RankPooling::Dataset => {
            let ranked = RankedEpochs::new(series)?;
            ranked.top_masks(series, rank_count(pct, ranked.len()))
        }
        RankPooling::PerRecording => series
            .iter()
            .map(|s| {
                let one = std::slice::from_ref(s);
                let ranked = RankedEpochs::new(one)?;
                Ok(ranked.top_masks(one, rank_count(pct, s.values.len())).remove(0))
            })
            .collect::<Result<_, UncertaintyError>>()?,
    };
    series
        .iter()
        .zip(masks)
        .map(|(s, mask)| Ok(GraySelection::new(s.grid.clone(), mask, provenance)?))
        .collect()
}

/// Marks epochs strictly more uncertain than `threshold`.
pub fn select_gray_threshold(series: &UncertaintySeries, threshold: f64) -> GraySelection {
    let metric = series.metric;
    let mask = series.values.iter().map(|&v| metric.exceeds(v, threshold)).collect();
    GraySelection {
        grid: series.grid.clone(),
        mask,
        provenance: GrayProvenance { metric, mode: SelectionMode::Threshold, parameter: threshold },
    }
}

/// Most-uncertain-first ordering of epoch indices within one series, stable
/// by epoch index under ties.
pub fn uncertainty_order(series: &UncertaintySeries, epochs: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let metric = series.metric;
    let mut idx: Vec<usize> = epochs.into_iter().collect();
    idx.sort_by(|&a, &b| {
        let ka = metric.uncertainty_key(series.values[a]);
        let kb = metric.uncertainty_key(series.values[b]);
        match kb.total_cmp(&ka) {
            Ordering::Equal => a.cmp(&b),
            o => o,
        }
    });
    idx
}
