use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::Utc;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use super::session::{build_queue, metrics, Event, GrayParams, MetricsSnapshot, ReviewSession};
use super::ReviewError;
use crate::dsp::EpochedChannel;
use crate::hypno::{Hypnodensity, Hypnogram, Stage};
use crate::reportio::{read_hypnodensity_csv, read_hypnogram_csv, read_text, write_hypnogram_csv};

/// Everything the service knows about one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingData {
    pub recording_id: String,
    pub model: Hypnodensity,
    pub reference: Option<Hypnogram>,
    pub channels: Vec<EpochedChannel>,
}

/// Reads `<dir>/model.csv`, the optional `reference.csv` (or `truth.csv`)
/// and any `channels/*.epochs.json`. The directory name is the recording id.
pub fn load_recording(dir: &Path) -> Result<RecordingData, ReviewError> {
    let id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| ReviewError::UnknownRecording(dir.display().to_string()))?
        .to_string();
    let model = read_hypnodensity_csv(&read_text(&dir.join("model.csv"))?, &id)?;
    let reference = ["reference.csv", "truth.csv"]
        .iter()
        .map(|f| dir.join(f))
        .find(|p| p.is_file())
        .map(|p| read_hypnogram_csv(&read_text(&p)?, &id))
        .transpose()?;
    if let Some(r) = &reference {
        model.grid().ensure_matches(r.grid())?;
    }
    let mut channels = Vec::new();
    let channel_dir = dir.join("channels");
    if channel_dir.is_dir() {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&channel_dir)
            .map_err(|e| ReviewError::Io(format!("{}: {e}", channel_dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".epochs.json"))
            .collect();
        paths.sort();
        for p in paths {
            let ch: EpochedChannel = serde_json::from_str(&read_text(&p)?)
                .map_err(|e| ReviewError::Io(format!("{}: {e}", p.display())))?;
            if ch.epoch_count() == model.len() {
                channels.push(ch);
            } else {
                log::warn!("{}: {} epochs, model has {}; skipped", p.display(), ch.epoch_count(), model.len());
            }
        }
    }
    Ok(RecordingData { recording_id: id, model, reference, channels })
}

/// Every subdirectory of `root` that holds a `model.csv`, in name order.
pub fn load_dataset(root: &Path) -> Result<Vec<RecordingData>, ReviewError> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| ReviewError::Io(format!("{}: {e}", root.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("model.csv").is_file())
        .collect();
    dirs.sort();
    dirs.iter().map(|d| load_recording(d)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionExport {
    pub session_id: String,
    pub hypnogram_csv: String,
    /// The session's event log, one JSON event per line.
    pub audit_log: String,
}

struct SessionSlot {
    /// Held for the whole of a mutation; owns the log.
    writer: Mutex<SlotLog>,
    snapshot: RwLock<Arc<ReviewSession>>,
}

struct SlotLog {
    events: Vec<Event>,
    file: Option<File>,
}

impl SlotLog {
    fn append(&mut self, event: Event) -> Result<(), ReviewError> {
        if let Some(f) = &mut self.file {
            let mut line = serde_json::to_string(&event).expect("events serialize");
            line.push('\n');
            f.write_all(line.as_bytes()).and_then(|_| f.sync_data()).map_err(|e| ReviewError::Io(e.to_string()))?;
        }
        self.events.push(event);
        Ok(())
    }
}

pub struct ReviewStore {
    recordings: BTreeMap<String, Arc<RecordingData>>,
    session_dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
}

fn audit_log(events: &[Event]) -> String {
    events.iter().map(|e| serde_json::to_string(e).expect("events serialize") + "\n").collect()
}

pub fn parse_audit_log(text: &str) -> Result<Vec<Event>, ReviewError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| ReviewError::CorruptLog(e.to_string())))
        .collect()
}

impl ReviewStore {
    /// In-memory store when `session_dir` is `None`; otherwise existing logs
    /// in that directory are replayed and new events are appended to it.
    pub fn new(recordings: Vec<RecordingData>, session_dir: Option<PathBuf>) -> Result<Self, ReviewError> {
        let recordings = recordings.into_iter().map(|r| (r.recording_id.clone(), Arc::new(r))).collect();
        let store = ReviewStore { recordings, session_dir, sessions: RwLock::new(HashMap::new()) };
        if let Some(dir) = &store.session_dir {
            std::fs::create_dir_all(dir).map_err(|e| ReviewError::Io(format!("{}: {e}", dir.display())))?;
            let mut logs: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| ReviewError::Io(e.to_string()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            logs.sort();
            for p in logs {
                let events = parse_audit_log(&read_text(&p)?)?;
                let state = ReviewSession::replay(&events)?;
                let file = OpenOptions::new().append(true).open(&p).map_err(|e| ReviewError::Io(e.to_string()))?;
                store.insert_slot(state, SlotLog { events, file: Some(file) });
            }
        }
        Ok(store)
    }

    /// Loads every recording under `data_dir` and keeps sessions in
    /// `<data_dir>/.sessions`.
    pub fn open(data_dir: &Path) -> Result<Self, ReviewError> {
        Self::new(load_dataset(data_dir)?, Some(data_dir.join(".sessions")))
    }

    fn insert_slot(&self, state: ReviewSession, log: SlotLog) {
        let id = state.session_id.clone();
        let slot = SessionSlot { writer: Mutex::new(log), snapshot: RwLock::new(Arc::new(state)) };
        self.sessions.write().insert(id, Arc::new(slot));
    }

    pub fn recordings(&self) -> impl Iterator<Item = &Arc<RecordingData>> {
        self.recordings.values()
    }

    pub fn recording(&self, id: &str) -> Result<&Arc<RecordingData>, ReviewError> {
        self.recordings.get(id).ok_or_else(|| ReviewError::UnknownRecording(id.to_string()))
    }

    fn slot(&self, session_id: &str) -> Result<Arc<SessionSlot>, ReviewError> {
        self.sessions.read().get(session_id).cloned().ok_or_else(|| ReviewError::UnknownSession(session_id.to_string()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn create_session(
        &self,
        recording_id: &str,
        params: GrayParams,
        reviewer: &str,
    ) -> Result<Arc<ReviewSession>, ReviewError> {
        let rec = self.recording(recording_id)?;
        let queue = build_queue(&rec.model, &params)?;
        let session_id = uuid::Uuid::new_v4().to_string();
        let event = Event::Created {
            session_id: session_id.clone(),
            recording_id: recording_id.to_string(),
            reviewer: reviewer.to_string(),
            params,
            queue,
            at: Utc::now(),
        };
        let state = ReviewSession::from_created(&event)?;
        let file = match &self.session_dir {
            Some(dir) => {
                let path = dir.join(format!("{session_id}.jsonl"));
                Some(OpenOptions::new().create_new(true).append(true).open(&path).map_err(|e| ReviewError::Io(e.to_string()))?)
            }
            None => None,
        };
        let mut log = SlotLog { events: Vec::new(), file };
        log.append(event)?;
        let snapshot = Arc::new(state);
        self.insert_slot((*snapshot).clone(), log);
        Ok(snapshot)
    }

    /// Validates, persists and applies one event under the session's writer lock.
    fn mutate(&self, session_id: &str, event: Event) -> Result<Arc<ReviewSession>, ReviewError> {
        let slot = self.slot(session_id)?;
        let mut log = slot.writer.lock();
        let mut next = (**slot.snapshot.read()).clone();
        next.apply(&event)?;
        log.append(event)?;
        let next = Arc::new(next);
        *slot.snapshot.write() = Arc::clone(&next);
        Ok(next)
    }

    pub fn submit_decision(
        &self,
        session_id: &str,
        epoch: usize,
        stage: Stage,
        note: &str,
    ) -> Result<MetricsSnapshot, ReviewError> {
        let state = self.mutate(session_id, Event::Decided { epoch, stage, note: note.to_string(), at: Utc::now() })?;
        self.metrics_for(&state)
    }

    pub fn complete(&self, session_id: &str) -> Result<Arc<ReviewSession>, ReviewError> {
        self.mutate(session_id, Event::Completed { at: Utc::now() })
    }

    pub fn session(&self, session_id: &str) -> Result<Arc<ReviewSession>, ReviewError> {
        Ok(Arc::clone(&self.slot(session_id)?.snapshot.read()))
    }

    fn metrics_for(&self, state: &ReviewSession) -> Result<MetricsSnapshot, ReviewError> {
        let rec = self.recording(&state.recording_id)?;
        metrics(state, &rec.model, rec.reference.as_ref())
    }

    pub fn metrics(&self, session_id: &str) -> Result<MetricsSnapshot, ReviewError> {
        self.metrics_for(&*self.session(session_id)?)
    }

    pub fn events(&self, session_id: &str) -> Result<Vec<Event>, ReviewError> {
        Ok(self.slot(session_id)?.writer.lock().events.clone())
    }

    pub fn export(&self, session_id: &str) -> Result<SessionExport, ReviewError> {
        let slot = self.slot(session_id)?;
        let log = slot.writer.lock();
        let state = Arc::clone(&slot.snapshot.read());
        let rec = self.recording(&state.recording_id)?;
        Ok(SessionExport {
            session_id: session_id.to_string(),
            hypnogram_csv: write_hypnogram_csv(&state.export_hypnogram(&rec.model)),
            audit_log: audit_log(&log.events),
        })
    }
}
