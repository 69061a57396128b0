//! Human-in-the-loop review of gray epochs.

mod http;
mod session;
mod store;

pub use http::{router, serve, API_SCHEMA};
pub use session::{build_queue, metrics, Decision, Event, GrayParams, MetricsSnapshot, ReviewSession, SessionStatus};
pub use store::{load_dataset, load_recording, parse_audit_log, RecordingData, ReviewStore, SessionExport};

use thiserror::Error;

use crate::eval::EvalError;
use crate::hypno::HypnoError;
use crate::reportio::ReportioError;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("unknown recording {0:?}")]
    UnknownRecording(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("epoch {epoch} does not exist")]
    UnknownEpoch { epoch: usize },
    #[error("invalid gray parameters: {0}")]
    InvalidGrayParams(String),
    #[error("invalid stage {0:?}; expected one of W, N1, N2, N3, R")]
    InvalidStage(String),
    #[error("epoch {epoch} is not in the gray queue")]
    EpochNotGray { epoch: usize },
    #[error("session is complete")]
    SessionClosed,
    #[error("corrupt session log: {0}")]
    CorruptLog(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Data(#[from] ReportioError),
    #[error(transparent)]
    Hypno(#[from] HypnoError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl ReviewError {
    /// Stable machine-readable error name used in response bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            ReviewError::UnknownRecording(_) => "unknown_recording",
            ReviewError::UnknownSession(_) => "unknown_session",
            ReviewError::UnknownEpoch { .. } => "unknown_epoch",
            ReviewError::InvalidGrayParams(_) => "invalid_gray_params",
            ReviewError::InvalidStage(_) => "invalid_stage",
            ReviewError::EpochNotGray { .. } => "epoch_not_gray",
            ReviewError::SessionClosed => "session_closed",
            ReviewError::CorruptLog(_) => "corrupt_log",
            ReviewError::Io(_) => "io",
            ReviewError::Data(_) => "data",
            ReviewError::Hypno(_) => "data",
            ReviewError::Eval(_) => "metrics",
        }
    }
}
