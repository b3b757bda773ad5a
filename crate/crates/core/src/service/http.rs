use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{PostMessage, ServiceError, TutorResponse, TutorService};
use crate::policy::{AwarenessLevel, LeakAction};
use crate::provider::ProviderError;
use crate::retrieval::ScopeVerdict;
use crate::telemetry::Cost;

pub fn router(service: Arc<TutorService>) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{thread_id}/messages", post(post_message))
        .route("/api/tasks", get(list_tasks))
        .route("/api/tasks/{task_id}", get(get_task))
        .route("/api/config", get(get_config).put(put_config))
        .route("/api/health", get(health))
        .with_state(service)
}

#[derive(Debug, Deserialize)]
pub struct MessageBody {
    pub text: String,
    #[serde(default)]
    pub awareness: Option<AwarenessLevel>,
    #[serde(default)]
    pub task_id: Option<String>,
    #[serde(default)]
    pub code: Option<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ScopeBody {
    pub verdict: ScopeVerdict,
    pub top_score: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct LeakBody {
    pub leaked: bool,
    pub action: LeakAction,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct UsageBody {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost: Cost,
}

/// Wire shape of a tutor reply.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct MessageReply {
    pub text: String,
    pub scope: ScopeBody,
    pub leak: LeakBody,
    pub usage: UsageBody,
    pub interaction_id: String,
}

impl From<TutorResponse> for MessageReply {
    fn from(r: TutorResponse) -> Self {
        Self {
            text: r.text,
            scope: ScopeBody {
                verdict: r.scope.verdict,
                top_score: r.scope.top_score,
            },
            leak: LeakBody {
                leaked: r.leak.leaked,
                action: r.leak.action_taken,
            },
            usage: UsageBody {
                prompt_tokens: r.usage.prompt_tokens,
                completion_tokens: r.usage.completion_tokens,
                cost: r.usage.cost,
            },
            interaction_id: r.interaction_id,
        }
    }
}

struct ApiError(StatusCode, Value);

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl ToString) -> Self {
        Self(status, json!({"error": code, "message": message.to_string()}))
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        match &e {
            ServiceError::UnknownThread(_) => Self::new(StatusCode::NOT_FOUND, "unknown_thread", &e),
            ServiceError::UnknownTask(_) => Self::new(StatusCode::NOT_FOUND, "unknown_task", &e),
            ServiceError::MissingContext(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "missing_context", &e),
            ServiceError::InvalidConfig(fields) => Self(
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({"error": "invalid_config", "message": e.to_string(), "fields": fields}),
            ),
            ServiceError::Provider(ProviderError::Rejected { .. }) => {
                Self::new(StatusCode::BAD_GATEWAY, "provider_rejected", &e)
            }
            ServiceError::Provider(_) => Self::new(StatusCode::SERVICE_UNAVAILABLE, "provider_unavailable", &e),
            ServiceError::Prompt(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "prompt_too_large", &e),
            ServiceError::InvalidTasks(_) | ServiceError::Knowledge(_) | ServiceError::Startup(_) => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", &e)
            }
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn create_session(State(svc): State<Arc<TutorService>>) -> Json<Value> {
    Json(json!({"thread_id": svc.create_session()}))
}

async fn post_message(
    State(svc): State<Arc<TutorService>>,
    Path(thread_id): Path<String>,
    body: Result<Json<MessageBody>, JsonRejection>,
) -> ApiResult<MessageReply> {
    let Json(body) = body?;
    let response = svc
        .post_message(
            &thread_id,
            PostMessage {
                text: body.text,
                awareness: body.awareness,
                task_id: body.task_id,
                code: body.code,
            },
        )
        .await?;
    Ok(Json(response.into()))
}

async fn list_tasks(State(svc): State<Arc<TutorService>>) -> Json<Value> {
    Json(json!(svc.list_tasks()))
}

async fn get_task(State(svc): State<Arc<TutorService>>, Path(task_id): Path<String>) -> ApiResult<Value> {
    Ok(Json(json!(svc.get_task(&task_id)?)))
}

async fn get_config(State(svc): State<Arc<TutorService>>) -> Json<Value> {
    Json(json!(*svc.config()))
}

async fn put_config(
    State(svc): State<Arc<TutorService>>,
    body: Result<Json<Value>, JsonRejection>,
) -> ApiResult<Value> {
    let Json(patch) = body?;
    Ok(Json(json!(*svc.put_config(&patch)?)))
}

async fn health(State(svc): State<Arc<TutorService>>) -> Json<Value> {
    Json(json!({"status": "ok", "index_version": svc.index_version()}))
}
