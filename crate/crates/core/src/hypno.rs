//! Sleep-stage domain types and epoch-grid arithmetic.
//!
//! Every other module consumes these values. They are immutable after
//! construction: constructors validate the invariants and the accessors only
//! hand out shared views.

use std::collections::HashSet;
use std::fmt;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of scoreable sleep stages.
pub const N_STAGES: usize = 5;

/// Length of one scoring epoch in seconds.
pub const EPOCH_SECONDS: f64 = 30.0;

/// Row-sum tolerance for probability vectors.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypnoError {
    #[error("epoch grid must contain at least one epoch")]
    EmptyGrid,
    #[error("epoch {epoch}: probability {value} outside [0, 1]")]
    ProbabilityRange { epoch: usize, value: f64 },
    #[error("epoch {epoch}: probabilities sum to {sum}, expected 1")]
    SimplexViolation { epoch: usize, sum: f64 },
    #[error("expected {expected} epochs, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("epoch {epoch} is flagged uncertain but unscored")]
    UncertainUnscored { epoch: usize },
    #[error("epoch grids differ: {0}")]
    GridMismatch(String),
    #[error("epoch {epoch} has no scored votes")]
    EmptyEpoch { epoch: usize },
    #[error("scorer panel is empty")]
    EmptyPanel,
    #[error("duplicate scorer id {0:?}")]
    DuplicateScorer(String),
    #[error("nothing to average")]
    EmptyEnsemble,
}

/// A sleep stage label. The declaration order is the canonical order and
/// also the tiebreak priority (Wake highest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Wake,
    N1,
    N2,
    N3,
    Rem,
    Unscored,
}

impl Stage {
    /// The five scoreable stages in canonical order.
    pub const SCOREABLE: [Stage; N_STAGES] = [Stage::Wake, Stage::N1, Stage::N2, Stage::N3, Stage::Rem];

    /// Column index in a hypnodensity row, `None` for [`Stage::Unscored`].
    pub fn index(self) -> Option<usize> {
        match self {
            Stage::Wake => Some(0),
            Stage::N1 => Some(1),
            Stage::N2 => Some(2),
            Stage::N3 => Some(3),
            Stage::Rem => Some(4),
            Stage::Unscored => None,
        }
    }

    pub fn from_index(i: usize) -> Option<Stage> {
        Stage::SCOREABLE.get(i).copied()
    }

    pub fn is_scored(self) -> bool {
        self != Stage::Unscored
    }

    /// Short token used in hypnogram files.
    pub fn token(self) -> &'static str {
        match self {
            Stage::Wake => "W",
            Stage::N1 => "N1",
            Stage::N2 => "N2",
            Stage::N3 => "N3",
            Stage::Rem => "R",
            Stage::Unscored => "U",
        }
    }

    pub fn from_token(token: &str) -> Option<Stage> {
        match token {
            "W" => Some(Stage::Wake),
            "N1" => Some(Stage::N1),
            "N2" => Some(Stage::N2),
            "N3" => Some(Stage::N3),
            "R" => Some(Stage::Rem),
            "U" => Some(Stage::Unscored),
            _ => None,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// The 30-second epoch grid of one recording.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochGrid {
    recording_id: String,
    epoch_count: usize,
    start_time: Option<NaiveDateTime>,
}

impl EpochGrid {
    pub fn new(recording_id: impl Into<String>, epoch_count: usize) -> Result<Self, HypnoError> {
        if epoch_count == 0 {
            return Err(HypnoError::EmptyGrid);
        }
        Ok(EpochGrid { recording_id: recording_id.into(), epoch_count, start_time: None })
    }

    pub fn with_start_time(mut self, start: NaiveDateTime) -> Self {
        self.start_time = Some(start);
        self
    }

    pub fn recording_id(&self) -> &str {
        &self.recording_id
    }

    pub fn epoch_count(&self) -> usize {
        self.epoch_count
    }

    pub fn epoch_duration_s(&self) -> f64 {
        EPOCH_SECONDS
    }

    pub fn start_time(&self) -> Option<NaiveDateTime> {
        self.start_time
    }

    /// Two grids describe the same epochs when recording and length agree.
    /// Start time is metadata and is not compared.
    pub fn ensure_matches(&self, other: &EpochGrid) -> Result<(), HypnoError> {
        if self.recording_id != other.recording_id || self.epoch_count != other.epoch_count {
            return Err(HypnoError::GridMismatch(format!(
                "{}[{}] vs {}[{}]",
                self.recording_id, self.epoch_count, other.recording_id, other.epoch_count
            )));
        }
        Ok(())
    }
}

/// Per-epoch probability distribution over the five stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypnodensity {
    grid: EpochGrid,
    probs: Vec<[f64; N_STAGES]>,
}

impl Hypnodensity {
    pub fn new(grid: EpochGrid, probs: Vec<[f64; N_STAGES]>) -> Result<Self, HypnoError> {
        if probs.len() != grid.epoch_count() {
            return Err(HypnoError::LengthMismatch { expected: grid.epoch_count(), actual: probs.len() });
        }
        for (epoch, row) in probs.iter().enumerate() {
            validate_row(epoch, row)?;
        }
        Ok(Hypnodensity { grid, probs })
    }

    pub fn grid(&self) -> &EpochGrid {
        &self.grid
    }

    pub fn rows(&self) -> &[[f64; N_STAGES]] {
        &self.probs
    }

    pub fn row(&self, epoch: usize) -> &[f64; N_STAGES] {
        &self.probs[epoch]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Checks one probability row against the simplex invariant.
pub fn validate_row(epoch: usize, row: &[f64; N_STAGES]) -> Result<(), HypnoError> {
    for &value in row {
        if !(0.0..=1.0).contains(&value) {
            return Err(HypnoError::ProbabilityRange { epoch, value });
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(HypnoError::SimplexViolation { epoch, sum });
    }
    Ok(())
}

/// Per-epoch stage sequence with optional uncertainty flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypnogram {
    grid: EpochGrid,
    stages: Vec<Stage>,
    uncertain: Vec<bool>,
}

impl Hypnogram {
    pub fn new(grid: EpochGrid, stages: Vec<Stage>, uncertain: Vec<bool>) -> Result<Self, HypnoError> {
        let n = grid.epoch_count();
        if stages.len() != n {
            return Err(HypnoError::LengthMismatch { expected: n, actual: stages.len() });
        }
        if uncertain.len() != n {
            return Err(HypnoError::LengthMismatch { expected: n, actual: uncertain.len() });
        }
        if let Some(epoch) = stages.iter().zip(&uncertain).position(|(s, &u)| u && !s.is_scored()) {
            return Err(HypnoError::UncertainUnscored { epoch });
        }
        Ok(Hypnogram { grid, stages, uncertain })
    }

    /// A hypnogram with every uncertain flag cleared.
    pub fn certain(grid: EpochGrid, stages: Vec<Stage>) -> Result<Self, HypnoError> {
        let n = stages.len();
        Self::new(grid, stages, vec![false; n])
    }

    pub fn grid(&self) -> &EpochGrid {
        &self.grid
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn uncertain(&self) -> &[bool] {
        &self.uncertain
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

/// Aligned hypnograms from several scorers of one recording.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerPanel {
    grid: EpochGrid,
    scorers: Vec<(String, Hypnogram)>,
}

impl ScorerPanel {
    pub fn new(scorers: Vec<(String, Hypnogram)>) -> Result<Self, HypnoError> {
        let grid = scorers.first().ok_or(HypnoError::EmptyPanel)?.1.grid().clone();
        let mut seen = HashSet::new();
        for (id, hyp) in &scorers {
            if !seen.insert(id.as_str()) {
                return Err(HypnoError::DuplicateScorer(id.clone()));
            }
            grid.ensure_matches(hyp.grid())?;
        }
        Ok(ScorerPanel { grid, scorers })
    }

    pub fn grid(&self) -> &EpochGrid {
        &self.grid
    }

    pub fn scorers(&self) -> &[(String, Hypnogram)] {
        &self.scorers
    }

    pub fn scorer_count(&self) -> usize {
        self.scorers.len()
    }

    /// Vote counts per stage at one epoch, ignoring unscored votes.
    pub fn votes(&self, epoch: usize) -> [usize; N_STAGES] {
        let mut counts = [0usize; N_STAGES];
        for (_, hyp) in &self.scorers {
            if let Some(i) = hyp.stages()[epoch].index() {
                counts[i] += 1;
            }
        }
        counts
    }
}

/// Index of the canonical-order-first maximum of a row.
pub fn argmax_index(row: &[f64; N_STAGES]) -> usize {
    let mut best = 0;
    for i in 1..N_STAGES {
        if row[i] > row[best] {
            best = i;
        }
    }
    best
}

/// Most probable stage per epoch; ties go to the earlier canonical stage.
pub fn argmax_hypnogram(h: &Hypnodensity) -> Hypnogram {
    let stages = h.rows().iter().map(|row| Stage::SCOREABLE[argmax_index(row)]).collect();
    Hypnogram::certain(h.grid().clone(), stages).expect("grid length already validated")
}

/// Vote-fraction hypnodensity of a scorer panel. Unscored votes are left out
/// of the denominator.
pub fn panel_to_hypnodensity(panel: &ScorerPanel) -> Result<Hypnodensity, HypnoError> {
    let n = panel.grid().epoch_count();
    let mut probs = Vec::with_capacity(n);
    for epoch in 0..n {
        let votes = panel.votes(epoch);
        let total: usize = votes.iter().sum();
        if total == 0 {
            return Err(HypnoError::EmptyEpoch { epoch });
        }
        let mut row = [0.0; N_STAGES];
        for (p, &v) in row.iter_mut().zip(&votes) {
            *p = v as f64 / total as f64;
        }
        probs.push(row);
    }
    Hypnodensity::new(panel.grid().clone(), probs)
}

/// Element-wise mean of hypnodensities sharing one grid.
pub fn ensemble_average(hs: &[Hypnodensity]) -> Result<Hypnodensity, HypnoError> {
    let first = hs.first().ok_or(HypnoError::EmptyEnsemble)?;
    if hs.len() == 1 {
        return Ok(first.clone());
    }
    for h in &hs[1..] {
        first.grid().ensure_matches(h.grid())?;
    }
    let scale = 1.0 / hs.len() as f64;
    let probs = (0..first.len())
        .map(|epoch| {
            let mut row = [0.0; N_STAGES];
            for h in hs {
                for (acc, p) in row.iter_mut().zip(h.row(epoch)) {
                    *acc += p;
                }
            }
            row.map(|v| v * scale)
        })
        .collect();
    Hypnodensity::new(first.grid().clone(), probs)
}
