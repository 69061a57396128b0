//! Agreement metrics and the two gray-area validation experiments.
//!
//! The exclusion curve drops the most uncertain epochs of a model
//! hypnodensity and re-scores what is left; the capture curve measures how
//! much model/reference disagreement falls inside the gray set. The gray
//! agreement report compares threshold gray areas of a scorer panel against
//! those of a model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::known_uncertainty_split;
use crate::hypno::{
    argmax_hypnogram, panel_to_hypnodensity, HypnoError, Hypnodensity, Hypnogram, ScorerPanel, Stage, N_STAGES,
};
use crate::uncertainty::{
    compute_uncertainty, rank_count, select_gray_threshold, RankedEpochs, UncertaintyError, UncertaintyMetric,
    UncertaintySeries,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("every epoch was excluded at {pct}")]
    AllExcluded { pct: f64 },
    #[error("got {0} hypnodensities but {1} references")]
    CohortSize(usize, usize),
    #[error("fraction {0} outside [0, 1]")]
    InvalidFraction(f64),
    #[error(transparent)]
    Grid(#[from] HypnoError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
}

/// 5×5 stage confusion; rows are reference stages, columns predictions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; N_STAGES]; N_STAGES],
    pub excluded: u64,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; N_STAGES]; N_STAGES]) -> Self {
        ConfusionMatrix { counts, excluded: 0 }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..N_STAGES).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|row| row[j]).sum()
    }

    pub fn record(&mut self, reference: Stage, predicted: Stage) {
        if let (Some(r), Some(p)) = (reference.index(), predicted.index()) {
            self.counts[r][p] += 1;
        }
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().flatten().zip(other.counts.iter().flatten()) {
            *a += b;
        }
        self.excluded += other.excluded;
    }
}

/// Counts epochs where both stages are scoreable and `exclude` is false.
pub fn confusion(
    reference: &Hypnogram,
    predicted: &Hypnogram,
    exclude: Option<&[bool]>,
) -> Result<ConfusionMatrix, EvalError> {
    reference.grid().ensure_matches(predicted.grid())?;
    if let Some(mask) = exclude {
        if mask.len() != reference.len() {
            return Err(HypnoError::LengthMismatch { expected: reference.len(), actual: mask.len() }.into());
        }
    }
    let mut cm = ConfusionMatrix::default();
    for (e, (&r, &p)) in reference.stages().iter().zip(predicted.stages()).enumerate() {
        if exclude.is_some_and(|m| m[e]) {
            cm.excluded += 1;
        } else {
            cm.record(r, p);
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub stage: Stage,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// False when no epoch was predicted as this stage (precision reported as 0).
    pub precision_defined: bool,
    /// False when the reference never contains this stage (recall reported as 0).
    pub recall_defined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub accuracy: f64,
    pub cohen_kappa: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub n_epochs: u64,
}

impl AgreementReport {
    pub fn class(&self, stage: Stage) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.stage == stage)
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, false)
    } else {
        (num as f64 / den as f64, true)
    }
}

pub fn agreement(cm: &ConfusionMatrix) -> Result<AgreementReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let trace = cm.trace();
    // Integer form of (p_o - p_e) / (1 - p_e) keeps hand-checkable cases exact.
    let chance: u128 = (0..N_STAGES).map(|i| cm.row_sum(i) as u128 * cm.col_sum(i) as u128).sum();
    let n2 = total as u128 * total as u128;
    let cohen_kappa = if n2 == chance {
        if trace == total {
            1.0
        } else {
            0.0
        }
    } else {
        (total as f64 * trace as f64 - chance as f64) / (n2 as f64 - chance as f64)
    };

    let per_class: Vec<ClassMetrics> = Stage::SCOREABLE
        .iter()
        .enumerate()
        .map(|(i, &stage)| {
            let tp = cm.counts[i][i];
            let support = cm.row_sum(i);
            let (precision, precision_defined) = ratio(tp, cm.col_sum(i));
            let (recall, recall_defined) = ratio(tp, support);
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            ClassMetrics { stage, precision, recall, f1, support, precision_defined, recall_defined }
        })
        .collect();

    let supported: Vec<&ClassMetrics> = per_class.iter().filter(|c| c.support > 0).collect();
    let mean = |f: fn(&ClassMetrics) -> f64| supported.iter().map(|c| f(c)).sum::<f64>() / supported.len() as f64;
    let weighted_f1 = per_class.iter().map(|c| c.f1 * c.support as f64).sum::<f64>() / total as f64;

    Ok(AgreementReport {
        accuracy: trace as f64 / total as f64,
        cohen_kappa,
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        weighted_f1,
        per_class,
        n_epochs: total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionPoint {
    pub pct_excluded: f64,
    pub excluded_epochs: u64,
    pub retained_epochs: u64,
    pub report: AgreementReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionCurve {
    pub metric: UncertaintyMetric,
    pub points: Vec<ExclusionPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapturePoint {
    pub pct: f64,
    pub captured_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureCurve {
    pub metric: UncertaintyMetric,
    pub disagreements: u64,
    pub points: Vec<CapturePoint>,
}

/// The default percentage grid: 1% steps from 1% to 95%.
pub fn default_pct_grid() -> Vec<f64> {
    (1..=95).map(|p| p as f64 / 100.0).collect()
}

/// Epochs that take part in a pooled analysis: reference scoreable and not
/// excluded. Ranking is restricted to this pool.
struct Pool {
    ranked: Vec<(usize, usize)>,
}

impl Pool {
    fn build(
        hyps: &[Hypnodensity],
        refs: &[Hypnogram],
        metric: UncertaintyMetric,
        exclude: Option<&[Vec<bool>]>,
    ) -> Result<Self, EvalError> {
        if hyps.len() != refs.len() {
            return Err(EvalError::CohortSize(hyps.len(), refs.len()));
        }
        if let Some(ex) = exclude {
            if ex.len() != refs.len() {
                return Err(EvalError::CohortSize(ex.len(), refs.len()));
            }
        }
        for (r, (h, reference)) in hyps.iter().zip(refs).enumerate() {
            h.grid().ensure_matches(reference.grid())?;
            if let Some(ex) = exclude {
                if ex[r].len() != reference.len() {
                    return Err(HypnoError::LengthMismatch { expected: reference.len(), actual: ex[r].len() }.into());
                }
            }
        }
        let series: Vec<UncertaintySeries> = hyps.iter().map(|h| compute_uncertainty(h, metric)).collect();
        let ranked = RankedEpochs::new(&series)?
            .order()
            .iter()
            .copied()
            .filter(|&(r, e)| refs[r].stages()[e].is_scored() && !exclude.is_some_and(|ex| ex[r][e]))
            .collect();
        Ok(Pool { ranked })
    }
}

fn check_grid(pct_grid: &[f64]) -> Result<(), EvalError> {
    match pct_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(&p) => Err(EvalError::InvalidFraction(p)),
        None => Ok(()),
    }
}

/// Pooled agreement after dropping the `pct` most uncertain epochs, for each
/// point of `pct_grid`. Predictions are the argmax of each hypnodensity.
pub fn exclusion_curve(
    hyps: &[Hypnodensity],
    refs: &[Hypnogram],
    metric: UncertaintyMetric,
    pct_grid: &[f64],
    exclude: Option<&[Vec<bool>]>,
) -> Result<ExclusionCurve, EvalError> {
    check_grid(pct_grid)?;
    let pool = Pool::build(hyps, refs, metric, exclude)?;
    let predicted: Vec<Hypnogram> = hyps.iter().map(argmax_hypnogram).collect();
    let total = pool.ranked.len();

    let mut points = Vec::with_capacity(pct_grid.len());
    for &pct in pct_grid {
        let count = rank_count(pct, total);
        let mut cm = ConfusionMatrix::default();
        for &(r, e) in &pool.ranked[count..] {
            cm.record(refs[r].stages()[e], predicted[r].stages()[e]);
        }
        cm.excluded = (count + refs.iter().map(|h| h.len()).sum::<usize>() - total) as u64;
        if cm.total() == 0 {
            return Err(EvalError::AllExcluded { pct });
        }
        points.push(ExclusionPoint {
            pct_excluded: pct,
            excluded_epochs: count as u64,
            retained_epochs: cm.total(),
            report: agreement(&cm)?,
        });
    }
    Ok(ExclusionCurve { metric, points })
}

/// Share of reference/prediction disagreements inside the gray set at each
/// point of `pct_grid`.
pub fn capture_curve(
    hyps: &[Hypnodensity],
    refs: &[Hypnogram],
    predicted: &[Hypnogram],
    metric: UncertaintyMetric,
    pct_grid: &[f64],
    exclude: Option<&[Vec<bool>]>,
) -> Result<CaptureCurve, EvalError> {
    check_grid(pct_grid)?;
    if predicted.len() != refs.len() {
        return Err(EvalError::CohortSize(predicted.len(), refs.len()));
    }
    for (p, r) in predicted.iter().zip(refs) {
        p.grid().ensure_matches(r.grid())?;
    }
    let pool = Pool::build(hyps, refs, metric, exclude)?;
    let total = pool.ranked.len();
    let disagree: Vec<bool> = pool
        .ranked
        .iter()
        .map(|&(r, e)| {
            let p = predicted[r].stages()[e];
            p.is_scored() && p != refs[r].stages()[e]
        })
        .collect();
    let disagreements = disagree.iter().filter(|&&d| d).count();
    if disagreements == 0 {
        log::warn!("no disagreements between reference and prediction; capture curve set to 1.0");
    }
    // Prefix sums over the ranking give the captured count for any cut.
    let mut prefix = Vec::with_capacity(total + 1);
    prefix.push(0usize);
    for &d in &disagree {
        prefix.push(prefix.last().unwrap() + usize::from(d));
    }
    let points = pct_grid
        .iter()
        .map(|&pct| {
            let captured_fraction = if disagreements == 0 {
                1.0
            } else {
                prefix[rank_count(pct, total)] as f64 / disagreements as f64
            };
            CapturePoint { pct, captured_fraction }
        })
        .collect();
    Ok(CaptureCurve { metric, disagreements: disagreements as u64, points })
}

/// Gray/non-gray agreement inside one split. Rows are the panel side
/// (gray, non-gray), columns the model side (gray, non-gray).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAgreement {
    pub matrix: [[u64; 2]; 2],
    pub epochs: u64,
    /// Share of panel-gray epochs that are also model-gray.
    pub capture: Option<f64>,
    pub capture_note: Option<String>,
}

impl SplitAgreement {
    fn new() -> Self {
        SplitAgreement { matrix: [[0; 2]; 2], epochs: 0, capture: None, capture_note: None }
    }

    fn record(&mut self, manual: bool, model: bool) {
        self.matrix[usize::from(!manual)][usize::from(!model)] += 1;
        self.epochs += 1;
    }

    fn finish(mut self) -> Self {
        let manual_gray = self.matrix[0][0] + self.matrix[0][1];
        if manual_gray == 0 {
            self.capture = None;
            self.capture_note = Some("no panel gray epochs in this split".to_string());
        } else {
            self.capture = Some(self.matrix[0][0] as f64 / manual_gray as f64);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingGray {
    pub recording_id: String,
    pub epochs: u64,
    pub manual_gray_pct: f64,
    pub model_gray_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrayAgreementReport {
    pub metric: UncertaintyMetric,
    pub threshold: f64,
    pub known: SplitAgreement,
    pub unknown: SplitAgreement,
    pub recordings: Vec<RecordingGray>,
    pub median_manual_gray_pct: f64,
    pub median_model_gray_pct: f64,
}

/// Median of a non-empty slice; even lengths average the middle pair.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Threshold gray areas from a panel's vote fractions against those from a
/// model, split by whether any scorer flagged the epoch.
pub fn gray_agreement(
    panel: &ScorerPanel,
    model: &Hypnodensity,
    threshold: f64,
) -> Result<GrayAgreementReport, EvalError> {
    gray_agreement_cohort(&[(panel, model)], threshold)
}

pub fn gray_agreement_cohort(
    items: &[(&ScorerPanel, &Hypnodensity)],
    threshold: f64,
) -> Result<GrayAgreementReport, EvalError> {
    if items.is_empty() {
        return Err(EvalError::CohortSize(0, 0));
    }
    let metric = UncertaintyMetric::Unlikeability;
    let mut known = SplitAgreement::new();
    let mut unknown = SplitAgreement::new();
    let mut recordings = Vec::with_capacity(items.len());
    for (panel, model) in items {
        panel.grid().ensure_matches(model.grid())?;
        let votes = panel_to_hypnodensity(panel)?;
        let manual = select_gray_threshold(&compute_uncertainty(&votes, metric), threshold);
        let auto = select_gray_threshold(&compute_uncertainty(model, metric), threshold);
        let split = known_uncertainty_split(panel);
        for e in 0..panel.grid().epoch_count() {
            let (m, a) = (manual.mask()[e], auto.mask()[e]);
            if split.known[e] {
                known.record(m, a);
            } else if split.unknown[e] {
                unknown.record(m, a);
            }
        }
        let n = panel.grid().epoch_count();
        recordings.push(RecordingGray {
            recording_id: panel.grid().recording_id().to_string(),
            epochs: n as u64,
            manual_gray_pct: 100.0 * manual.count() as f64 / n as f64,
            model_gray_pct: 100.0 * auto.count() as f64 / n as f64,
        });
    }
    let manual_pcts: Vec<f64> = recordings.iter().map(|r| r.manual_gray_pct).collect();
    let model_pcts: Vec<f64> = recordings.iter().map(|r| r.model_gray_pct).collect();
    Ok(GrayAgreementReport {
        metric,
        threshold,
        known: known.finish(),
        unknown: unknown.finish(),
        median_manual_gray_pct: median(&manual_pcts),
        median_model_gray_pct: median(&model_pcts),
        recordings,
    })
}
