//! Majority scoring across a scorer panel and uncertain-flag bookkeeping.

use serde::{Deserialize, Serialize};

use crate::hypno::{HypnoError, Hypnogram, ScorerPanel, Stage, N_STAGES};

/// Result of majority scoring one panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Consensus {
    pub hypnogram: Hypnogram,
    pub tie_mask: Vec<bool>,
    pub tie_fraction: f64,
}

/// Modal stage from vote counts. Ties are broken among the tied modal stages
/// only, in canonical priority order. Returns `None` when there are no votes.
pub fn modal_stage(votes: &[usize; N_STAGES]) -> Option<(Stage, bool)> {
    let max = *votes.iter().max()?;
    if max == 0 {
        return None;
    }
    let mut tied = votes.iter().enumerate().filter(|(_, &v)| v == max).map(|(i, _)| i);
    let first = tied.next()?;
    Some((Stage::SCOREABLE[first], tied.next().is_some()))
}

/// Majority hypnogram of a panel. The uncertain flag of an epoch is set when
/// any scorer flagged it.
pub fn majority_score(panel: &ScorerPanel) -> Result<Consensus, HypnoError> {
    let n = panel.grid().epoch_count();
    let known = known_uncertainty_split(panel).known;
    let mut stages = Vec::with_capacity(n);
    let mut tie_mask = Vec::with_capacity(n);
    for epoch in 0..n {
        let (stage, tied) = modal_stage(&panel.votes(epoch)).ok_or(HypnoError::EmptyEpoch { epoch })?;
        stages.push(stage);
        tie_mask.push(tied);
    }
    let ties = tie_mask.iter().filter(|&&t| t).count();
    Ok(Consensus {
        hypnogram: Hypnogram::new(panel.grid().clone(), stages, known)?,
        tie_mask,
        tie_fraction: ties as f64 / n as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UncertaintySplit {
    /// Epochs flagged uncertain by at least one scorer.
    pub known: Vec<bool>,
    /// Scored epochs no scorer flagged.
    pub unknown: Vec<bool>,
}

pub fn known_uncertainty_split(panel: &ScorerPanel) -> UncertaintySplit {
    let n = panel.grid().epoch_count();
    let mut known = vec![false; n];
    let mut scored = vec![false; n];
    for (_, hyp) in panel.scorers() {
        for e in 0..n {
            known[e] |= hyp.uncertain()[e];
            scored[e] |= hyp.stages()[e].is_scored();
        }
    }
    let unknown = known.iter().zip(&scored).map(|(&k, &s)| s && !k).collect();
    UncertaintySplit { known, unknown }
}

/// Which flagged epochs to drop from an analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "k")]
pub enum ExclusionPolicy {
    /// Drop an epoch if any scorer flagged it.
    #[default]
    AnyScorer,
    /// Drop an epoch if at least `k` scorers flagged it.
    AtLeast(usize),
}

pub fn exclusion_mask(panel: &ScorerPanel, policy: ExclusionPolicy) -> Vec<bool> {
    let n = panel.grid().epoch_count();
    let mut flags = vec![0usize; n];
    for (_, hyp) in panel.scorers() {
        for (count, &u) in flags.iter_mut().zip(hyp.uncertain()) {
            *count += usize::from(u);
        }
    }
    let k = match policy {
        ExclusionPolicy::AnyScorer => 1,
        ExclusionPolicy::AtLeast(k) => k.max(1),
    };
    flags.into_iter().map(|c| c >= k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypno::EpochGrid;

    fn panel(columns: &[Vec<Stage>], flags: &[Vec<bool>]) -> ScorerPanel {
        let n = columns[0].len();
        let grid = EpochGrid::new("r", n).unwrap();
        ScorerPanel::new(
            columns
                .iter()
                .zip(flags)
                .enumerate()
                .map(|(i, (s, f))| (format!("s{i}"), Hypnogram::new(grid.clone(), s.clone(), f.clone()).unwrap()))
                .collect(),
        )
        .unwrap()
    }

    fn vote_panel(votes: &[(Stage, usize)]) -> ScorerPanel {
        let cols: Vec<Vec<Stage>> =
            votes.iter().flat_map(|&(s, k)| std::iter::repeat_n(vec![s], k)).collect();
        let flags = vec![vec![false]; cols.len()];
        panel(&cols, &flags)
    }

    #[test]
    fn tiebreak_follows_priority() {
        let c = majority_score(&vote_panel(&[(Stage::N2, 5), (Stage::N1, 5)])).unwrap();
        assert_eq!((c.hypnogram.stages()[0], c.tie_mask[0]), (Stage::N1, true));
        let c = majority_score(&vote_panel(&[(Stage::N3, 5), (Stage::Rem, 5)])).unwrap();
        assert_eq!((c.hypnogram.stages()[0], c.tie_mask[0]), (Stage::N3, true));
        let c = majority_score(&vote_panel(&[(Stage::Wake, 3), (Stage::N1, 3), (Stage::N2, 4)])).unwrap();
        assert_eq!((c.hypnogram.stages()[0], c.tie_mask[0]), (Stage::N2, false));
    }

    #[test]
    fn tiebreak_only_among_modal_stages() {
        let c = majority_score(&vote_panel(&[(Stage::N2, 4), (Stage::N3, 4), (Stage::Wake, 2)])).unwrap();
        assert_eq!(c.hypnogram.stages()[0], Stage::N2);
    }

    #[test]
    fn single_scorer_has_no_ties() {
        let p = panel(&[vec![Stage::N1, Stage::N2, Stage::Rem]], &[vec![false, true, false]]);
        let c = majority_score(&p).unwrap();
        assert_eq!(c.tie_fraction, 0.0);
        assert_eq!(c.hypnogram.uncertain(), &[false, true, false]);
    }

    #[test]
    fn empty_epoch_errors() {
        let p = panel(&[vec![Stage::N1, Stage::Unscored]], &[vec![false, false]]);
        assert_eq!(majority_score(&p).unwrap_err(), HypnoError::EmptyEpoch { epoch: 1 });
    }

    #[test]
    fn known_split() {
        let stages = vec![Stage::N2; 10];
        let none = vec![false; 10];
        let mut one = none.clone();
        one[7] = true;
        let p = panel(&[stages.clone(), stages.clone()], &[none.clone(), none.clone()]);
        assert!(known_uncertainty_split(&p).known.iter().all(|&k| !k));

        let p = panel(&[stages.clone(), stages.clone()], &[none.clone(), one.clone()]);
        let split = known_uncertainty_split(&p);
        assert_eq!(split.known.iter().position(|&k| k), Some(7));
        assert_eq!(split.known.iter().filter(|&&k| k).count(), 1);
        assert!(split.known.iter().zip(&split.unknown).all(|(k, u)| k ^ u));

        let all = vec![true; 10];
        let p = panel(&[stages.clone(), stages], &[all.clone(), all]);
        assert!(known_uncertainty_split(&p).unknown.iter().all(|&u| !u));
    }

    #[test]
    fn exclusion_policies() {
        let stages = vec![Stage::N2; 10];
        let mut a = vec![false; 10];
        let mut b = vec![false; 10];
        a[3] = true;
        b[3] = true;
        b[5] = true;
        let p = panel(&[stages.clone(), stages.clone()], &[a, b]);
        let any = exclusion_mask(&p, ExclusionPolicy::AnyScorer);
        assert_eq!(any.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect::<Vec<_>>(), vec![3, 5]);
        let two = exclusion_mask(&p, ExclusionPolicy::AtLeast(2));
        assert_eq!(two.iter().filter(|&&m| m).count(), 1);
        assert!(two[3]);

        let clean = panel(&[stages], &[vec![false; 10]]);
        assert!(exclusion_mask(&clean, ExclusionPolicy::default()).iter().all(|&m| !m));
    }
}
