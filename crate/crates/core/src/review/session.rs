//! Review session state as a pure fold over its event log.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ReviewError;
use crate::eval::{agreement, confusion, AgreementReport};
use crate::hypno::{argmax_hypnogram, Hypnodensity, Hypnogram, Stage};
use crate::uncertainty::{
    compute_uncertainty, select_gray_rank, select_gray_threshold, uncertainty_order, GrayProvenance, RankPooling,
    SelectionMode, UncertaintyMetric,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrayParams {
    pub metric: UncertaintyMetric,
    pub mode: SelectionMode,
    /// Fraction in [0, 1] for rank mode, metric threshold otherwise.
    pub value: f64,
}

impl GrayParams {
    pub fn validate(&self) -> Result<(), ReviewError> {
        let (lo, hi) = self.metric.range();
        let ok = match self.mode {
            SelectionMode::RankPct => (0.0..=1.0).contains(&self.value),
            SelectionMode::Threshold => self.value.is_finite() && self.value >= lo && self.value <= hi,
        };
        if ok {
            Ok(())
        } else {
            Err(ReviewError::InvalidGrayParams(format!("{:?} value {} out of range", self.mode, self.value)))
        }
    }

    pub fn provenance(&self) -> GrayProvenance {
        GrayProvenance { metric: self.metric, mode: self.mode, parameter: self.value }
    }
}

/// Gray epochs of one recording, most uncertain first.
pub fn build_queue(model: &Hypnodensity, params: &GrayParams) -> Result<Vec<usize>, ReviewError> {
    params.validate()?;
    let series = compute_uncertainty(model, params.metric);
    let selection = match params.mode {
        SelectionMode::RankPct => select_gray_rank(std::slice::from_ref(&series), params.value, RankPooling::Dataset)
            .map_err(|e| ReviewError::InvalidGrayParams(e.to_string()))?
            .remove(0),
        SelectionMode::Threshold => select_gray_threshold(&series, params.value),
    };
    let gray = selection.mask().iter().enumerate().filter(|(_, &g)| g).map(|(e, _)| e);
    Ok(uncertainty_order(&series, gray))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Created {
        session_id: String,
        recording_id: String,
        reviewer: String,
        params: GrayParams,
        queue: Vec<usize>,
        at: DateTime<Utc>,
    },
    Decided {
        epoch: usize,
        stage: Stage,
        note: String,
        at: DateTime<Utc>,
    },
    Completed {
        at: DateTime<Utc>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Open,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub stage: Stage,
    pub note: String,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewSession {
    pub session_id: String,
    pub recording_id: String,
    pub reviewer: String,
    pub params: GrayParams,
    pub queue: Vec<usize>,
    pub decisions: BTreeMap<usize, Decision>,
    pub status: SessionStatus,
    pub events: usize,
}

impl ReviewSession {
    /// Starts a state from its creation event.
    pub fn from_created(event: &Event) -> Result<Self, ReviewError> {
        match event {
            Event::Created { session_id, recording_id, reviewer, params, queue, .. } => Ok(ReviewSession {
                session_id: session_id.clone(),
                recording_id: recording_id.clone(),
                reviewer: reviewer.clone(),
                params: *params,
                queue: queue.clone(),
                decisions: BTreeMap::new(),
                status: SessionStatus::Open,
                events: 1,
            }),
            _ => Err(ReviewError::CorruptLog("log must start with a creation event".into())),
        }
    }

    /// Checks an event against the current state without applying it.
    pub fn check(&self, event: &Event) -> Result<(), ReviewError> {
        match event {
            Event::Created { .. } => Err(ReviewError::CorruptLog("duplicate creation event".into())),
            _ if self.status == SessionStatus::Complete => Err(ReviewError::SessionClosed),
            Event::Decided { epoch, stage, .. } => {
                if !stage.is_scored() {
                    return Err(ReviewError::InvalidStage(stage.token().to_string()));
                }
                if !self.queue.contains(epoch) {
                    return Err(ReviewError::EpochNotGray { epoch: *epoch });
                }
                Ok(())
            }
            Event::Completed { .. } => Ok(()),
        }
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), ReviewError> {
        self.check(event)?;
        match event {
            Event::Decided { epoch, stage, note, at } => {
                self.decisions.insert(*epoch, Decision { stage: *stage, note: note.clone(), at: *at });
            }
            Event::Completed { .. } => self.status = SessionStatus::Complete,
            Event::Created { .. } => unreachable!("rejected by check"),
        }
        self.events += 1;
        Ok(())
    }

    pub fn replay(events: &[Event]) -> Result<Self, ReviewError> {
        let (first, rest) = events.split_first().ok_or_else(|| ReviewError::CorruptLog("empty log".into()))?;
        let mut state = Self::from_created(first)?;
        for e in rest {
            state.apply(e)?;
        }
        Ok(state)
    }

    /// Model argmax with the reviewer's decisions overlaid.
    pub fn corrected(&self, model: &Hypnodensity) -> Hypnogram {
        let base = argmax_hypnogram(model);
        let mut stages = base.stages().to_vec();
        for (&e, d) in &self.decisions {
            stages[e] = d.stage;
        }
        Hypnogram::certain(base.grid().clone(), stages).expect("same grid as the model")
    }

    /// Corrected hypnogram with undecided gray epochs flagged uncertain.
    pub fn export_hypnogram(&self, model: &Hypnodensity) -> Hypnogram {
        let corrected = self.corrected(model);
        let mut flags = vec![false; corrected.len()];
        for &e in &self.queue {
            flags[e] = !self.decisions.contains_key(&e);
        }
        Hypnogram::new(corrected.grid().clone(), corrected.stages().to_vec(), flags).expect("scored stages")
    }

    pub fn decided(&self) -> usize {
        self.decisions.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub session_id: String,
    pub decided: usize,
    pub queue_length: usize,
    /// Model argmax against the reference; absent without a reference.
    pub before: Option<AgreementReport>,
    /// Corrected hypnogram against the reference.
    pub after: Option<AgreementReport>,
}

pub fn metrics(
    session: &ReviewSession,
    model: &Hypnodensity,
    reference: Option<&Hypnogram>,
) -> Result<MetricsSnapshot, ReviewError> {
    let (before, after) = match reference {
        Some(r) => {
            let b = agreement(&confusion(r, &argmax_hypnogram(model), None)?)?;
            let a = agreement(&confusion(r, &session.corrected(model), None)?)?;
            (Some(b), Some(a))
        }
        None => (None, None),
    };
    Ok(MetricsSnapshot {
        session_id: session.session_id.clone(),
        decided: session.decided(),
        queue_length: session.queue.len(),
        before,
        after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypno::EpochGrid;

    fn model(n: usize) -> Hypnodensity {
        let rows = (0..n)
            .map(|e| {
                let c = 0.5 + 0.5 * (e as f64 / n as f64);
                let mut r = [(1.0 - c) / 4.0; 5];
                r[e % 5] = c;
                r
            })
            .collect();
        Hypnodensity::new(EpochGrid::new("r", n).unwrap(), rows).unwrap()
    }

    fn created(queue: Vec<usize>) -> Event {
        Event::Created {
            session_id: "s".into(),
            recording_id: "r".into(),
            reviewer: "tech".into(),
            params: GrayParams { metric: UncertaintyMetric::Unlikeability, mode: SelectionMode::RankPct, value: 0.1 },
            queue,
            at: DateTime::UNIX_EPOCH,
        }
    }

    fn decide(epoch: usize, stage: Stage) -> Event {
        Event::Decided { epoch, stage, note: String::new(), at: DateTime::UNIX_EPOCH }
    }

    #[test]
    fn rank_queue_is_sized_and_ordered() {
        let m = model(1000);
        let params = GrayParams { metric: UncertaintyMetric::Unlikeability, mode: SelectionMode::RankPct, value: 0.1 };
        let q = build_queue(&m, &params).unwrap();
        assert_eq!(q.len(), 100);
        // Confidence grows with the epoch index, so the queue runs 0, 1, 2, ...
        assert_eq!(&q[..3], &[0, 1, 2]);
    }

    #[test]
    fn threshold_above_all_values_gives_empty_queue() {
        let m = model(50);
        let params = GrayParams { metric: UncertaintyMetric::Unlikeability, mode: SelectionMode::Threshold, value: 0.7 };
        assert!(build_queue(&m, &params).unwrap().is_empty());
        let bad = GrayParams { value: 1.5, ..params };
        assert!(matches!(build_queue(&m, &bad), Err(ReviewError::InvalidGrayParams(_))));
    }

    #[test]
    fn decisions_last_write_wins_and_replay_matches() {
        let events = vec![created(vec![3, 7]), decide(3, Stage::N1), decide(7, Stage::Rem), decide(3, Stage::N2)];
        let s = ReviewSession::replay(&events).unwrap();
        assert_eq!(s.decisions[&3].stage, Stage::N2);
        assert_eq!(s.decided(), 2);
        let mut live = ReviewSession::from_created(&events[0]).unwrap();
        for e in &events[1..] {
            live.apply(e).unwrap();
        }
        assert_eq!(live, s);
    }

    #[test]
    fn non_gray_and_closed_sessions_reject() {
        let mut s = ReviewSession::replay(&[created(vec![3])]).unwrap();
        assert!(matches!(s.apply(&decide(4, Stage::N1)), Err(ReviewError::EpochNotGray { epoch: 4 })));
        s.apply(&Event::Completed { at: DateTime::UNIX_EPOCH }).unwrap();
        assert!(matches!(s.apply(&decide(3, Stage::N1)), Err(ReviewError::SessionClosed)));
    }

    #[test]
    fn export_without_decisions_flags_gray_epochs() {
        let m = model(10);
        let s = ReviewSession::replay(&[created(vec![2, 5])]).unwrap();
        let h = s.export_hypnogram(&m);
        assert_eq!(h.stages(), argmax_hypnogram(&m).stages());
        let flagged: Vec<usize> = h.uncertain().iter().enumerate().filter(|(_, &u)| u).map(|(e, _)| e).collect();
        assert_eq!(flagged, vec![2, 5]);
    }

    #[test]
    fn correcting_one_of_hundred_adds_one_percent() {
        let m = model(100);
        let mut truth = argmax_hypnogram(&m).stages().to_vec();
        truth[0] = Stage::N3;
        let reference = Hypnogram::certain(m.grid().clone(), truth).unwrap();
        let mut s = ReviewSession::replay(&[created(vec![0, 1])]).unwrap();
        s.apply(&decide(1, argmax_hypnogram(&m).stages()[1])).unwrap();
        let unchanged = metrics(&s, &m, Some(&reference)).unwrap();
        assert_eq!(unchanged.before, unchanged.after);
        s.apply(&decide(0, Stage::N3)).unwrap();
        let snap = metrics(&s, &m, Some(&reference)).unwrap();
        let (b, a) = (snap.before.unwrap().accuracy, snap.after.unwrap().accuracy);
        assert!((a - b - 0.01).abs() < 1e-12, "{b} -> {a}");
    }
}
