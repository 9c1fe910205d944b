//! HTTP session service.
//!
//! Every session lives in memory behind its own mutex and is written to
//! `<data dir>/<id>.json` after each successful mutation. Mutations run on a
//! copy that replaces the live session only once it has been persisted.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use ared_core::controller::Session;
use ared_core::error::AredError;
use ared_core::io::{self, SessionRequest};

use crate::views;

pub const TOKEN_HEADER: &str = "x-ared-token";

type Shared = Arc<Mutex<Session>>;

pub struct AppState {
    data_dir: PathBuf,
    token: Option<String>,
    sessions: RwLock<HashMap<String, Shared>>,
}

impl AppState {
    /// Opens the store, loading every readable session document in
    /// `data_dir`.
    pub fn open(data_dir: impl Into<PathBuf>, token: Option<String>) -> anyhow::Result<Self> {
        let data_dir = data_dir.into();
        std::fs::create_dir_all(&data_dir)?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(&data_dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
                continue;
            };
            match io::load_session(&path) {
                Ok(s) => {
                    sessions.insert(id, Arc::new(Mutex::new(s)));
                }
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            }
        }
        log::info!("loaded {} sessions from {}", sessions.len(), data_dir.display());
        Ok(Self {
            data_dir,
            token,
            sessions: RwLock::new(sessions),
        })
    }

    fn path_of(&self, id: &str) -> PathBuf {
        self.data_dir.join(format!("{id}.json"))
    }

    fn get(&self, id: &str) -> Result<Shared, ApiError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    status: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    code: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn not_found(id: &str) -> Self {
        Self {
            code: StatusCode::NOT_FOUND,
            body: ErrorBody {
                error: "NotFound",
                message: format!("no session {id:?}"),
                status: None,
            },
        }
    }

    fn internal(message: String) -> Self {
        Self {
            code: StatusCode::INTERNAL_SERVER_ERROR,
            body: ErrorBody {
                error: "Internal",
                message,
                status: None,
            },
        }
    }
}

fn error_kind(e: &AredError) -> (&'static str, StatusCode) {
    use AredError::*;
    match e {
        WrongState { .. } => ("WrongState", StatusCode::CONFLICT),
        DrawExhausted { .. } => ("DrawExhausted", StatusCode::CONFLICT),
        NotConverged => ("NotConverged", StatusCode::CONFLICT),
        DegenerateRange { .. } => ("DegenerateRange", StatusCode::UNPROCESSABLE_ENTITY),
        EmptyDomain => ("EmptyDomain", StatusCode::UNPROCESSABLE_ENTITY),
        OutOfDomain { .. } => ("OutOfDomain", StatusCode::UNPROCESSABLE_ENTITY),
        DimensionMismatch { .. } => ("DimensionMismatch", StatusCode::UNPROCESSABLE_ENTITY),
        MissingEndpoints { .. } => ("MissingEndpoints", StatusCode::UNPROCESSABLE_ENTITY),
        UnmeasuredInitialSample { .. } => {
            ("UnmeasuredInitialSample", StatusCode::UNPROCESSABLE_ENTITY)
        }
        UnmeasuredSample { .. } => ("UnmeasuredSample", StatusCode::UNPROCESSABLE_ENTITY),
        NonFiniteValue(_) => ("NonFiniteValue", StatusCode::UNPROCESSABLE_ENTITY),
        InvalidConfig(_) => ("InvalidConfig", StatusCode::UNPROCESSABLE_ENTITY),
        InsufficientData { .. } => ("InsufficientData", StatusCode::UNPROCESSABLE_ENTITY),
        LengthMismatch { .. } => ("LengthMismatch", StatusCode::UNPROCESSABLE_ENTITY),
        EmptyArchive => ("EmptyArchive", StatusCode::UNPROCESSABLE_ENTITY),
        SolverDiverged { .. } => ("SolverDiverged", StatusCode::INTERNAL_SERVER_ERROR),
        Io(_) => ("Io", StatusCode::INTERNAL_SERVER_ERROR),
        SchemaMismatch { .. } => ("SchemaMismatch", StatusCode::INTERNAL_SERVER_ERROR),
        CorruptDocument(_) => ("CorruptDocument", StatusCode::INTERNAL_SERVER_ERROR),
    }
}

impl From<AredError> for ApiError {
    fn from(e: AredError) -> Self {
        let (error, code) = error_kind(&e);
        let status = match &e {
            AredError::WrongState { status, .. } => Some(status.clone()),
            _ => None,
        };
        Self {
            code,
            body: ErrorBody {
                error,
                message: e.to_string(),
                status,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs `op` on a copy of the session off the async runtime; on success the
/// copy is persisted and replaces the live session.
async fn mutate<T, F>(state: &Arc<AppState>, id: &str, op: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&mut Session) -> ared_core::error::Result<T> + Send + 'static,
{
    let shared = state.get(id)?;
    let path = state.path_of(id);
    tokio::task::spawn_blocking(move || {
        let mut live = shared.lock().expect("session lock");
        let mut next = live.clone();
        let out = op(&mut next)?;
        io::save_session(&next, &path)?;
        *live = next;
        Ok(out)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn read<T, F>(state: &Arc<AppState>, id: &str, op: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Session) -> ared_core::error::Result<T> + Send + 'static,
{
    let shared = state.get(id)?;
    tokio::task::spawn_blocking(move || {
        let live = shared.lock().expect("session lock");
        Ok(op(&live)?)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn create(
    State(state): State<Arc<AppState>>,
    Json(req): Json<SessionRequest>,
) -> ApiResult<(StatusCode, Json<views::SessionSummary>)> {
    let session = tokio::task::spawn_blocking(move || req.start())
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    let id = uuid::Uuid::new_v4().simple().to_string();
    io::save_session(&session, state.path_of(&id))?;
    let body = views::summary(&id, &session);
    state
        .sessions
        .write()
        .expect("session map lock")
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)))
}

async fn show(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<views::SessionSummary>> {
    let key = id.clone();
    Ok(Json(read(&state, &key, move |s| Ok(views::summary(&id, s))).await?))
}

async fn propose(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<views::ProposalView>> {
    let view = mutate(&state, &id, |s| s.propose_next().map(views::ProposalView::from)).await?;
    Ok(Json(view))
}

#[derive(Debug, Deserialize)]
struct ResultBody {
    value: f64,
}

async fn record(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<ResultBody>,
) -> ApiResult<Json<views::ResultView>> {
    let view = mutate(&state, &id, move |s| {
        s.record_result(body.value)?;
        let rec = s.history.last().expect("record pushes history");
        Ok(views::ResultView::new(rec, s))
    })
    .await?;
    Ok(Json(view))
}

#[derive(Debug, Deserialize)]
struct SurfaceQuery {
    resolution: Option<usize>,
}

async fn surface(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<SurfaceQuery>,
) -> ApiResult<Json<views::SurfaceView>> {
    let g = q.resolution.unwrap_or(41);
    Ok(Json(read(&state, &id, move |s| views::surface(s, g)).await?))
}

async fn history(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<Vec<views::HistoryEntry>>> {
    Ok(Json(read(&state, &id, |s| Ok(views::history(s))).await?))
}

async fn require_token(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    request: Request,
    next: Next,
) -> Response {
    if let Some(expected) = &state.token {
        let given = headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok());
        if given != Some(expected.as_str()) {
            let body = ErrorBody {
                error: "Unauthorized",
                message: format!("missing or wrong {TOKEN_HEADER} header"),
                status: None,
            };
            return (StatusCode::UNAUTHORIZED, Json(body)).into_response();
        }
    }
    next.run(request).await
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/proposal", post(propose))
        .route("/sessions/{id}/result", post(record))
        .route("/sessions/{id}/surface", get(surface))
        .route("/sessions/{id}/history", get(history))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

pub async fn serve(bind: &str, state: AppState) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind {bind}: {e}"))?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
