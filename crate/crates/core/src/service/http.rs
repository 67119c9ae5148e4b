//! JSON HTTP API over a shared [`Experiment`].

use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::experiment::{ChainSummary, ChoiceOutcome, Experiment, SessionStart, Side};
use crate::chain::DEFAULT_STRIDE;
use crate::error::Error;
use crate::respondent::Choice;
use crate::samples::SampleRecord;

pub type SharedExperiment = Arc<Mutex<Experiment>>;

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = match &self.0 {
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            Error::Lifecycle(_) => (StatusCode::CONFLICT, "lifecycle"),
            Error::RetryLater(_) => (StatusCode::SERVICE_UNAVAILABLE, "retry_later"),
            Error::DecodeFailure(_) => (StatusCode::BAD_GATEWAY, "decode_failure"),
            Error::Domain(_) | Error::DimensionMismatch { .. } | Error::InvalidState(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request")
            }
            Error::UndefinedStatistic(_) => (StatusCode::UNPROCESSABLE_ENTITY, "undefined_statistic"),
            Error::Config { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "config"),
            Error::CorruptLog { .. } | Error::Io(_) | Error::Json(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        let body = Json(json!({ "error": code, "message": self.0.to_string() }));
        let mut response = (status, body).into_response();
        if status == StatusCode::SERVICE_UNAVAILABLE {
            response
                .headers_mut()
                .insert(header::RETRY_AFTER, header::HeaderValue::from_static("5"));
        }
        response
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs `f` on the experiment off the async executor; the lock serializes
/// every mutation through the single log writer.
async fn with_experiment<T, F>(state: &SharedExperiment, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&mut Experiment) -> crate::Result<T> + Send + 'static,
{
    let state = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut exp = state.lock().unwrap_or_else(|e| e.into_inner());
        f(&mut exp)
    })
    .await
    .map_err(|e| ApiError(Error::InvalidState(format!("worker failed: {e}"))))?
    .map_err(ApiError)
}

#[derive(Debug, Deserialize)]
pub struct StartSessionBody {
    pub participant_id: String,
}

/// Either the semantic choice or the screen side that was picked.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum ChoiceBody {
    Choice { choice: Choice },
    Side { side: Side },
}

#[derive(Debug, Default, Deserialize)]
pub struct DiscardBody {
    #[serde(default)]
    pub reason: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct ExportQuery {
    pub burn_in: Option<usize>,
    pub stride: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChainsResponse {
    pub seq: u64,
    pub active_leases: usize,
    pub recorded_samples: usize,
    pub chains: Vec<ChainSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExportResponse {
    pub seq: u64,
    pub records: Vec<SampleRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DiscardResponse {
    pub session_id: String,
    pub status: String,
    pub rolled_back: Vec<String>,
}

async fn start_session(
    State(state): State<SharedExperiment>,
    Json(body): Json<StartSessionBody>,
) -> ApiResult<(StatusCode, Json<SessionStart>)> {
    let start = with_experiment(&state, move |e| e.start_session(&body.participant_id)).await?;
    Ok((StatusCode::CREATED, Json(start)))
}

async fn next_trial(State(state): State<SharedExperiment>, Path(id): Path<String>) -> ApiResult<Json<ChoiceOutcome>> {
    Ok(Json(with_experiment(&state, move |e| e.next_trial(&id)).await?))
}

async fn submit_choice(
    State(state): State<SharedExperiment>,
    Path(id): Path<String>,
    Json(body): Json<ChoiceBody>,
) -> ApiResult<Json<ChoiceOutcome>> {
    let outcome = with_experiment(&state, move |e| match body {
        ChoiceBody::Choice { choice } => e.submit_choice(&id, choice),
        ChoiceBody::Side { side } => e.submit_side(&id, side),
    })
    .await?;
    Ok(Json(outcome))
}

async fn discard_session(
    State(state): State<SharedExperiment>,
    Path(id): Path<String>,
    body: Option<Json<DiscardBody>>,
) -> ApiResult<Json<DiscardResponse>> {
    let reason = body
        .and_then(|Json(b)| b.reason)
        .unwrap_or_else(|| "reported by client".into());
    let session_id = id.clone();
    let rolled_back = with_experiment(&state, move |e| e.discard(&id, &reason)).await?;
    Ok(Json(DiscardResponse {
        session_id,
        status: "discarded".into(),
        rolled_back,
    }))
}

async fn admin_chains(State(state): State<SharedExperiment>) -> ApiResult<Json<ChainsResponse>> {
    let response = with_experiment(&state, |e| {
        Ok(ChainsResponse {
            seq: e.log().last_seq(),
            active_leases: e.engine().active_leases(),
            recorded_samples: e.engine().recorded_samples(),
            chains: e.admin_chains(),
        })
    })
    .await?;
    Ok(Json(response))
}

async fn export(State(state): State<SharedExperiment>, Query(q): Query<ExportQuery>) -> ApiResult<Json<ExportResponse>> {
    let response = with_experiment(&state, move |e| {
        Ok(ExportResponse {
            seq: e.log().last_seq(),
            records: e.export(q.burn_in, q.stride.unwrap_or(DEFAULT_STRIDE))?,
        })
    })
    .await?;
    Ok(Json(response))
}

async fn image(State(state): State<SharedExperiment>, Path(hash): Path<String>) -> ApiResult<Response> {
    let image = with_experiment(&state, move |e| {
        e.gateway()
            .ok_or_else(|| Error::NotFound("this experiment serves no images".into()))?
            .image(&hash)
    })
    .await?;
    Ok((
        [
            (header::CONTENT_TYPE, image.media_type),
            (header::CACHE_CONTROL, "public, max-age=31536000, immutable".to_string()),
        ],
        image.bytes,
    )
        .into_response())
}

pub fn router(state: SharedExperiment) -> Router {
    Router::new()
        .route("/sessions", post(start_session))
        .route("/sessions/{id}/trials/next", get(next_trial))
        .route("/sessions/{id}/discard", post(discard_session))
        .route("/trials/{id}/choice", post(submit_choice))
        .route("/admin/chains", get(admin_chains))
        .route("/export", get(export))
        .route("/images/{hash}", get(image))
        .with_state(state)
}

/// Serves the API until the listener fails; idle sessions are swept every
/// `sweep` when the experiment has an idle timeout.
pub async fn serve(experiment: Experiment, listener: tokio::net::TcpListener, sweep: Duration) -> std::io::Result<()> {
    let state: SharedExperiment = Arc::new(Mutex::new(experiment));
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(sweep);
        loop {
            tick.tick().await;
            match with_experiment(&sweeper, |e| e.discard_idle()).await {
                Ok(ids) if !ids.is_empty() => log::info!("discarded idle sessions {ids:?}"),
                Ok(_) => {}
                Err(ApiError(e)) => log::warn!("idle sweep failed: {e}"),
            }
        }
    });
    axum::serve(listener, router(state)).await
}
