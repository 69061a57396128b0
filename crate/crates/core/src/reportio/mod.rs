//! On-disk formats: CSV tables, panel manifests, JSON report documents and
//! SVG figures.

mod manifest;
mod report;
mod svg;
mod tables;

pub use manifest::{read_panel, write_panel, PanelManifest};
pub use report::{
    read_model, read_report, write_model, write_report, ConsensusSummary, CurveBundle, ReportBody, MODEL_SCHEMA,
    REPORT_SCHEMA,
};
pub use svg::{capture_curves_svg, emit_curve_svg, emit_hypnodensity_svg, exclusion_curves_svg, CurveSeries};
pub use tables::{
    read_hypnodensity_csv, read_hypnogram_csv, read_mask_csv, write_hypnodensity_csv, write_hypnogram_csv,
    write_mask_csv, write_uncertainty_csv, HYPNODENSITY_HEADER, HYPNOGRAM_HEADER, MASK_HEADER,
};

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::hypno::HypnoError;

#[derive(Debug, Error)]
pub enum ReportioError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("epoch {epoch}: probabilities are not a valid distribution")]
    SimplexViolation { epoch: usize },
    #[error("epoch indices not contiguous: expected {expected}, found {found}")]
    NonContiguousEpochs { expected: usize, found: String },
    #[error("line {line}: unknown stage token {token:?}")]
    UnknownStageToken { line: usize, token: String },
    #[error("document schema {found:?} is not supported (expected {expected:?})")]
    Version { found: String, expected: String },
    #[error("a curve needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Hypno(#[from] HypnoError),
}

impl ReportioError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ReportioError::Io { path: path.to_path_buf(), source }
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ReportioError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| ReportioError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| ReportioError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| ReportioError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| ReportioError::io(path, e))?;
    tmp.persist(path).map_err(|e| ReportioError::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, ReportioError> {
    std::fs::read_to_string(path).map_err(|e| ReportioError::io(path, e))
}
