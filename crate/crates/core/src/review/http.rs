//! HTTP routes over a [`ReviewStore`].
//!
//! ```text
//! GET  /recordings                              list recordings
//! GET  /recordings/{id}/hypnodensity            model probabilities
//! GET  /recordings/{id}/epochs/{i}/signal       preprocessed samples (?context=n)
//! POST /sessions                                create a session
//! GET  /sessions/{id}                           session state
//! GET  /sessions/{id}/queue                     gray epochs, most uncertain first
//! POST /sessions/{id}/decisions                 record a stage decision
//! POST /sessions/{id}/complete                  close the session
//! GET  /sessions/{id}/metrics                   agreement before and after review
//! GET  /sessions/{id}/export                    corrected hypnogram and audit log
//! ```

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::session::GrayParams;
use super::store::ReviewStore;
use super::ReviewError;
use crate::hypno::{Stage, N_STAGES};
use crate::uncertainty::{compute_uncertainty, SelectionMode, UncertaintyMetric};

/// Version tag carried by every response body.
pub const API_SCHEMA: &str = "somnogray.review/1";

#[derive(Serialize)]
struct Versioned<T> {
    schema: &'static str,
    #[serde(flatten)]
    body: T,
}

fn ok<T: Serialize>(body: T) -> Response {
    Json(Versioned { schema: API_SCHEMA, body }).into_response()
}

impl IntoResponse for ReviewError {
    fn into_response(self) -> Response {
        let status = match &self {
            ReviewError::UnknownRecording(_) | ReviewError::UnknownSession(_) | ReviewError::UnknownEpoch { .. } => {
                StatusCode::NOT_FOUND
            }
            ReviewError::InvalidGrayParams(_) | ReviewError::InvalidStage(_) => StatusCode::BAD_REQUEST,
            ReviewError::EpochNotGray { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ReviewError::SessionClosed => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        #[derive(Serialize)]
        struct ErrorBody {
            error: &'static str,
            message: String,
        }
        let body = ErrorBody { error: self.kind(), message: self.to_string() };
        (status, Json(Versioned { schema: API_SCHEMA, body })).into_response()
    }
}

type AppState = Arc<ReviewStore>;

pub fn router(store: Arc<ReviewStore>) -> Router {
    Router::new()
        .route("/recordings", get(list_recordings))
        .route("/recordings/{id}/hypnodensity", get(hypnodensity))
        .route("/recordings/{id}/epochs/{epoch}/signal", get(signal))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(session))
        .route("/sessions/{id}/queue", get(queue))
        .route("/sessions/{id}/decisions", post(decide))
        .route("/sessions/{id}/complete", post(complete))
        .route("/sessions/{id}/metrics", get(metrics))
        .route("/sessions/{id}/export", get(export))
        .with_state(store)
}

#[derive(Serialize)]
struct RecordingSummary {
    recording_id: String,
    epochs: usize,
    has_reference: bool,
    channels: Vec<String>,
}

async fn list_recordings(State(store): State<AppState>) -> Response {
    #[derive(Serialize)]
    struct Body {
        recordings: Vec<RecordingSummary>,
    }
    let recordings = store
        .recordings()
        .map(|r| RecordingSummary {
            recording_id: r.recording_id.clone(),
            epochs: r.model.len(),
            has_reference: r.reference.is_some(),
            channels: r.channels.iter().map(|c| c.label.clone()).collect(),
        })
        .collect();
    ok(Body { recordings })
}

async fn hypnodensity(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ReviewError> {
    #[derive(Serialize)]
    struct Body<'a> {
        recording_id: &'a str,
        stages: [&'static str; N_STAGES],
        rows: &'a [[f64; N_STAGES]],
    }
    let rec = store.recording(&id)?;
    Ok(ok(Body { recording_id: &rec.recording_id, stages: Stage::SCOREABLE.map(Stage::token), rows: rec.model.rows() }))
}

#[derive(Deserialize)]
struct SignalQuery {
    #[serde(default)]
    context: usize,
}

async fn signal(
    State(store): State<AppState>,
    Path((id, epoch)): Path<(String, usize)>,
    Query(q): Query<SignalQuery>,
) -> Result<Response, ReviewError> {
    #[derive(Serialize)]
    struct Channel<'a> {
        label: &'a str,
        fs: f64,
        samples: Vec<f64>,
    }
    #[derive(Serialize)]
    struct Body<'a> {
        recording_id: &'a str,
        epoch: usize,
        first_epoch: usize,
        last_epoch: usize,
        channels: Vec<Channel<'a>>,
    }
    let rec = store.recording(&id)?;
    if epoch >= rec.model.len() {
        return Err(ReviewError::UnknownEpoch { epoch });
    }
    let first = epoch.saturating_sub(q.context);
    let last = (epoch + q.context).min(rec.model.len() - 1);
    let channels = rec
        .channels
        .iter()
        .map(|c| Channel {
            label: &c.label,
            fs: c.samples_per_epoch as f64 / rec.model.grid().epoch_duration_s(),
            samples: (first..=last).flat_map(|e| c.epoch(e).iter().copied()).collect(),
        })
        .collect();
    Ok(ok(Body { recording_id: &rec.recording_id, epoch, first_epoch: first, last_epoch: last, channels }))
}

#[derive(Deserialize)]
struct CreateRequest {
    recording_id: String,
    metric: UncertaintyMetric,
    mode: SelectionMode,
    value: f64,
    #[serde(default)]
    reviewer: String,
}

async fn create_session(
    State(store): State<AppState>,
    Json(req): Json<CreateRequest>,
) -> Result<Response, ReviewError> {
    let params = GrayParams { metric: req.metric, mode: req.mode, value: req.value };
    let s = store.create_session(&req.recording_id, params, &req.reviewer)?;
    let mut resp = ok(&*s);
    *resp.status_mut() = StatusCode::CREATED;
    Ok(resp)
}

async fn list_sessions(State(store): State<AppState>) -> Response {
    #[derive(Serialize)]
    struct Body {
        sessions: Vec<String>,
    }
    ok(Body { sessions: store.session_ids() })
}

async fn session(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ReviewError> {
    Ok(ok(&*store.session(&id)?))
}

async fn queue(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ReviewError> {
    #[derive(Serialize)]
    struct Item {
        epoch: usize,
        uncertainty: f64,
        model_stage: Stage,
        decision: Option<Stage>,
    }
    #[derive(Serialize)]
    struct Body {
        session_id: String,
        decided: usize,
        total: usize,
        items: Vec<Item>,
    }
    let s = store.session(&id)?;
    let rec = store.recording(&s.recording_id)?;
    let series = compute_uncertainty(&rec.model, s.params.metric);
    let argmax = crate::hypno::argmax_hypnogram(&rec.model);
    let items = s
        .queue
        .iter()
        .map(|&e| Item {
            epoch: e,
            uncertainty: series.values()[e],
            model_stage: argmax.stages()[e],
            decision: s.decisions.get(&e).map(|d| d.stage),
        })
        .collect();
    Ok(ok(Body { session_id: s.session_id.clone(), decided: s.decided(), total: s.queue.len(), items }))
}

#[derive(Deserialize)]
struct DecisionRequest {
    epoch: usize,
    stage: String,
    #[serde(default)]
    note: String,
}

async fn decide(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<DecisionRequest>,
) -> Result<Response, ReviewError> {
    let stage = Stage::from_token(&req.stage)
        .filter(|s| s.is_scored())
        .ok_or_else(|| ReviewError::InvalidStage(req.stage.clone()))?;
    Ok(ok(store.submit_decision(&id, req.epoch, stage, &req.note)?))
}

async fn complete(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ReviewError> {
    Ok(ok(&*store.complete(&id)?))
}

async fn metrics(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ReviewError> {
    Ok(ok(store.metrics(&id)?))
}

async fn export(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ReviewError> {
    Ok(ok(store.export(&id)?))
}

/// Serves until ctrl-c.
pub async fn serve(store: Arc<ReviewStore>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("review service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypno::{argmax_hypnogram, EpochGrid, Hypnodensity, Hypnogram};
    use crate::review::store::RecordingData;
    use axum::body::Body;
    use axum::http::Request;
    use http_body_util::BodyExt;
    use serde_json::{json, Value};
    use tower::ServiceExt;

    fn app() -> (Router, Hypnogram) {
        let n = 100;
        let rows = (0..n)
            .map(|e| {
                let c = 0.3 + 0.7 * (e as f64 / n as f64);
                let mut r = [(1.0 - c) / 4.0; 5];
                r[e % 5] = c;
                r
            })
            .collect();
        let model = Hypnodensity::new(EpochGrid::new("rec", n).unwrap(), rows).unwrap();
        let mut truth = argmax_hypnogram(&model).stages().to_vec();
        truth[0] = Stage::N3;
        let reference = Hypnogram::certain(model.grid().clone(), truth).unwrap();
        let rec = RecordingData { recording_id: "rec".into(), model, reference: Some(reference.clone()), channels: vec![] };
        (router(Arc::new(ReviewStore::new(vec![rec], None).unwrap())), reference)
    }

    async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
        let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
        let resp = app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
    }

    #[tokio::test]
    async fn review_loop_over_http() {
        let (app, _) = app();
        let (st, recs) = call(&app, "GET", "/recordings", None).await;
        assert_eq!(st, StatusCode::OK);
        assert_eq!(recs["schema"], API_SCHEMA);
        assert_eq!(recs["recordings"][0]["epochs"], 100);

        let create = json!({"recording_id": "rec", "metric": "uu", "mode": "rank_pct", "value": 0.1});
        let (st, s) = call(&app, "POST", "/sessions", Some(create)).await;
        assert_eq!(st, StatusCode::CREATED);
        let id = s["session_id"].as_str().unwrap().to_string();
        assert_eq!(s["queue"].as_array().unwrap().len(), 10);

        let (_, q) = call(&app, "GET", &format!("/sessions/{id}/queue"), None).await;
        assert_eq!(q["items"][0]["epoch"], 0);

        let (st, m) = call(&app, "POST", &format!("/sessions/{id}/decisions"), Some(json!({"epoch": 0, "stage": "N3"}))).await;
        assert_eq!(st, StatusCode::OK);
        let delta = m["after"]["accuracy"].as_f64().unwrap() - m["before"]["accuracy"].as_f64().unwrap();
        assert!((delta - 0.01).abs() < 1e-12);

        let (st, err) = call(&app, "POST", &format!("/sessions/{id}/decisions"), Some(json!({"epoch": 99, "stage": "W"}))).await;
        assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(err["error"], "epoch_not_gray");

        let (st, _) = call(&app, "POST", &format!("/sessions/{id}/decisions"), Some(json!({"epoch": 0, "stage": "U"}))).await;
        assert_eq!(st, StatusCode::BAD_REQUEST);

        let (_, ex) = call(&app, "GET", &format!("/sessions/{id}/export"), None).await;
        assert!(ex["hypnogram_csv"].as_str().unwrap().starts_with("epoch,stage,uncertain\n0,N3,0\n"));
        assert_eq!(ex["audit_log"].as_str().unwrap().lines().count(), 2);

        let (st, _) = call(&app, "POST", &format!("/sessions/{id}/complete"), None).await;
        assert_eq!(st, StatusCode::OK);
        let (st, _) = call(&app, "POST", &format!("/sessions/{id}/decisions"), Some(json!({"epoch": 1, "stage": "W"}))).await;
        assert_eq!(st, StatusCode::CONFLICT);
    }

    #[tokio::test]
    async fn not_found_and_bad_params() {
        let (app, _) = app();
        assert_eq!(call(&app, "GET", "/recordings/nope/hypnodensity", None).await.0, StatusCode::NOT_FOUND);
        assert_eq!(call(&app, "GET", "/sessions/nope/metrics", None).await.0, StatusCode::NOT_FOUND);
        assert_eq!(call(&app, "GET", "/recordings/rec/epochs/100/signal", None).await.0, StatusCode::NOT_FOUND);
        let bad = json!({"recording_id": "rec", "metric": "uu", "mode": "rank_pct", "value": 2.0});
        assert_eq!(call(&app, "POST", "/sessions", Some(bad)).await.0, StatusCode::BAD_REQUEST);
        let (st, h) = call(&app, "GET", "/recordings/rec/hypnodensity", None).await;
        assert_eq!(st, StatusCode::OK);
        assert_eq!(h["rows"].as_array().unwrap().len(), 100);
    }
}
