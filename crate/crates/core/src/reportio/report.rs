use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ReportioError;
use crate::eval::{AgreementReport, CaptureCurve, ExclusionCurve, GrayAgreementReport};
use crate::stager::SoftmaxModel;

/// Schema tag embedded in every report document. Readers accept only this
/// exact value.
pub const REPORT_SCHEMA: &str = "somnogray.report/1";
pub const MODEL_SCHEMA: &str = "somnogray.model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBundle {
    pub exclusion: Vec<ExclusionCurve>,
    pub capture: Vec<CaptureCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusSummary {
    pub recording_id: String,
    pub epochs: usize,
    pub scorers: usize,
    pub tie_epochs: usize,
    pub tie_fraction: f64,
    /// Epochs flagged uncertain by at least one scorer.
    pub known_uncertain_epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportBody {
    Agreement(AgreementReport),
    Curves(CurveBundle),
    GrayAgreement(GrayAgreementReport),
    Consensus(ConsensusSummary),
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    schema: String,
    #[serde(flatten)]
    body: T,
}

fn check_schema(value: &Value, expected: &str) -> Result<(), ReportioError> {
    let found = value.get("schema").and_then(Value::as_str).unwrap_or("");
    if found != expected {
        return Err(ReportioError::Version { found: found.to_string(), expected: expected.to_string() });
    }
    Ok(())
}

/// Pretty-printed JSON with the schema tag first.
pub fn write_report(body: &ReportBody) -> String {
    let doc = Envelope { schema: REPORT_SCHEMA.to_string(), body };
    let mut text = serde_json::to_string_pretty(&doc).expect("report types serialize");
    text.push('\n');
    text
}

pub fn read_report(text: &str) -> Result<ReportBody, ReportioError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ReportioError::Schema(e.to_string()))?;
    check_schema(&value, REPORT_SCHEMA)?;
    let doc: Envelope<ReportBody> = serde_json::from_value(value).map_err(|e| ReportioError::Schema(e.to_string()))?;
    Ok(doc.body)
}

#[derive(Serialize, Deserialize)]
struct ModelDoc<M> {
    schema: String,
    model: M,
}

pub fn write_model(model: &SoftmaxModel) -> String {
    let mut text = serde_json::to_string_pretty(&ModelDoc { schema: MODEL_SCHEMA.to_string(), model })
        .expect("model serializes");
    text.push('\n');
    text
}

pub fn read_model(text: &str) -> Result<SoftmaxModel, ReportioError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ReportioError::Schema(e.to_string()))?;
    check_schema(&value, MODEL_SCHEMA)?;
    let doc: ModelDoc<SoftmaxModel> =
        serde_json::from_value(value).map_err(|e| ReportioError::Schema(e.to_string()))?;
    let m = doc.model;
    let d = m.n_features;
    if m.weights.len() != 5 * (d + 1) || m.feature_mean.len() != d || m.feature_scale.len() != d {
        return Err(ReportioError::Schema("model array sizes do not match n_features".into()));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{agreement, ConfusionMatrix};

    fn kappa_report() -> ReportBody {
        let mut counts = [[0u64; 5]; 5];
        counts[0] = [8, 2, 0, 0, 0];
        counts[1] = [1, 9, 0, 0, 0];
        ReportBody::Agreement(agreement(&ConfusionMatrix::from_counts(counts)).unwrap())
    }

    #[test]
    fn report_is_deterministic_and_round_trips() {
        let body = kappa_report();
        let text = write_report(&body);
        assert_eq!(text, write_report(&body));
        assert!(text.contains("\"cohen_kappa\": 0.7"));
        assert!(text.starts_with("{\n  \"schema\": \"somnogray.report/1\""));
        assert_eq!(read_report(&text).unwrap(), body);
    }

    #[test]
    fn other_schema_versions_are_rejected() {
        let text = write_report(&kappa_report()).replace("somnogray.report/1", "somnogray.report/2");
        assert!(matches!(read_report(&text), Err(ReportioError::Version { .. })));
    }

    #[test]
    fn model_round_trip() {
        let mut m = SoftmaxModel::zeros(3);
        m.weights[4] = 0.125;
        assert_eq!(read_model(&write_model(&m)).unwrap(), m);
        let bad = write_model(&m).replace("\"n_features\": 3", "\"n_features\": 4");
        assert!(read_model(&bad).is_err());
    }
}
