use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tables::{read_hypnogram_csv, write_hypnogram_csv};
use super::{read_text, write_atomic, ReportioError};
use crate::hypno::ScorerPanel;

/// TOML file naming a recording and mapping scorer ids to hypnogram CSVs.
/// Relative paths resolve against the manifest's directory.
///
/// ```toml
/// recording_id = "rec_000"
///
/// [scorers]
/// scorer_01 = "scorer_01.csv"
/// scorer_02 = "scorer_02.csv"
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelManifest {
    pub recording_id: String,
    pub scorers: BTreeMap<String, String>,
}

pub fn read_panel(manifest_path: &Path) -> Result<ScorerPanel, ReportioError> {
    let text = read_text(manifest_path)?;
    let manifest: PanelManifest =
        toml::from_str(&text).map_err(|e| ReportioError::Schema(format!("{}: {e}", manifest_path.display())))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let scorers = manifest
        .scorers
        .iter()
        .map(|(id, rel)| {
            let path = base.join(rel);
            Ok((id.clone(), read_hypnogram_csv(&read_text(&path)?, &manifest.recording_id)?))
        })
        .collect::<Result<Vec<_>, ReportioError>>()?;
    Ok(ScorerPanel::new(scorers)?)
}

/// Writes `<dir>/panel.toml` plus one `<scorer id>.csv` per scorer.
pub fn write_panel(dir: &Path, panel: &ScorerPanel) -> Result<(), ReportioError> {
    let mut scorers = BTreeMap::new();
    for (id, hyp) in panel.scorers() {
        let file = format!("{id}.csv");
        write_atomic(&dir.join(&file), write_hypnogram_csv(hyp).as_bytes())?;
        scorers.insert(id.clone(), file);
    }
    let manifest = PanelManifest { recording_id: panel.grid().recording_id().to_string(), scorers };
    let text = toml::to_string(&manifest).map_err(|e| ReportioError::Schema(e.to_string()))?;
    write_atomic(&dir.join("panel.toml"), text.as_bytes())
}
