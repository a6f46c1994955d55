//! HTTP front end for the query loop.
//!
//! Sessions live in memory and are dropped after an idle period. Each
//! session is guarded by its own lock, so concurrent requests against one
//! session are applied one at a time while distinct sessions proceed
//! independently.
//!
//! ```no_run
//! # async fn demo() -> std::io::Result<()> {
//! use expalign_service::{AppState, ServiceConfig};
//! let state = AppState::new(ServiceConfig::default());
//! state.load_builtin();
//! expalign_service::serve(state, "127.0.0.1:8080".parse().unwrap()).await
//! # }
//! ```

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use thiserror::Error;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;
use uuid::Uuid;

use expalign::benchmarks::{self, fixtures, InstanceError};
use expalign::query::{Answer, QueryError};
use expalign::{BenchmarkInstance, FormulationParams, QuerySession};

pub mod resource;

use resource::{AnswerBatch, CreateSession, InstanceSummary, SessionResource};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(3600);

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("invalid instance: {0}")]
    Instance(#[from] InstanceError),
    #[error("{0}")]
    Internal(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownSession(_) | ServiceError::UnknownInstance(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Unprocessable(_) | ServiceError::Instance(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Internal(_) | ServiceError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<QueryError> for ServiceError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::AnswerMismatch(_) => ServiceError::Unprocessable(e.to_string()),
            QueryError::IllegalState(_) => ServiceError::Conflict(e.to_string()),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub idle_timeout: Duration,
    pub params: FormulationParams,
    /// Directory with a built UI bundle, served under `/`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            params: FormulationParams::default(),
            ui_dir: None,
        }
    }
}

struct Slot {
    instance: Arc<BenchmarkInstance>,
    session: QuerySession,
    last_used: Instant,
}

type SlotRef = Arc<Mutex<Slot>>;

pub struct AppState {
    config: ServiceConfig,
    instances: RwLock<BTreeMap<String, Arc<BenchmarkInstance>>>,
    sessions: Mutex<HashMap<String, SlotRef>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self {
            config,
            instances: RwLock::new(BTreeMap::new()),
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn insert_instance(&self, instance: BenchmarkInstance) {
        self.instances
            .write()
            .unwrap()
            .insert(instance.name.clone(), Arc::new(instance));
    }

    /// Registers the hand-built fixtures.
    pub fn load_builtin(&self) {
        for f in fixtures::all() {
            self.insert_instance(f);
        }
    }

    /// Loads every `*.json` instance in `dir`, returning how many were read.
    pub fn load_dir(&self, dir: &Path) -> Result<usize, ServiceError> {
        let io = |source| ServiceError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in &paths {
            let text = std::fs::read_to_string(path).map_err(|source| ServiceError::Io {
                path: path.clone(),
                source,
            })?;
            self.insert_instance(benchmarks::deserialize(&text)?);
        }
        Ok(paths.len())
    }

    pub fn instance(&self, name: &str) -> Result<Arc<BenchmarkInstance>, ServiceError> {
        self.instances
            .read()
            .unwrap()
            .get(name)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownInstance(name.to_string()))
    }

    pub fn num_sessions(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    /// Drops sessions idle for longer than the configured timeout as of `now`.
    pub fn evict_idle(&self, now: Instant) -> usize {
        let timeout = self.config.idle_timeout;
        let mut sessions = self.sessions.lock().unwrap();
        let before = sessions.len();
        sessions.retain(|_, slot| match slot.try_lock() {
            Ok(s) => now.saturating_duration_since(s.last_used) <= timeout,
            Err(_) => true,
        });
        before - sessions.len()
    }

    fn slot(&self, id: &str) -> Result<SlotRef, ServiceError> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    fn create(&self, req: CreateSession) -> Result<SessionResource, ServiceError> {
        let instance = match &req.instance {
            serde_json::Value::String(name) => self.instance(name)?,
            doc @ serde_json::Value::Object(_) => Arc::new(benchmarks::deserialize(&doc.to_string())?),
            _ => {
                return Err(ServiceError::Unprocessable(
                    "`instance` must be a name or an instance document".into(),
                ))
            }
        };
        let session = QuerySession::start(
            &instance.human_domain,
            &instance.reward,
            &instance.robot_domain,
            req.planning.into(),
            self.config.params,
        )?;
        let id = Uuid::new_v4().to_string();
        let view = resource::render(&id, &instance, &session);
        let slot = Slot {
            instance,
            session,
            last_used: Instant::now(),
        };
        self.sessions.lock().unwrap().insert(id, Arc::new(Mutex::new(slot)));
        Ok(view)
    }

    fn get(&self, id: &str) -> Result<SessionResource, ServiceError> {
        let slot = self.slot(id)?;
        let mut s = slot.lock().unwrap();
        s.last_used = Instant::now();
        Ok(resource::render(id, &s.instance, &s.session))
    }

    fn answer(&self, id: &str, batch: AnswerBatch) -> Result<SessionResource, ServiceError> {
        let slot = self.slot(id)?;
        let mut s = slot.lock().unwrap();
        s.last_used = Instant::now();
        if s.session.status().is_terminal() {
            return Err(ServiceError::Conflict(format!(
                "session is {}, not awaiting answers",
                s.session.status()
            )));
        }
        let domain = &s.instance.robot_domain;
        let mut answers = Vec::with_capacity(batch.answers.len());
        for entry in &batch.answers {
            let bad = |what: &str| ServiceError::Unprocessable(format!("unknown {what} in answer {entry:?}"));
            answers.push(Answer {
                state: domain.state_index(&entry.state).ok_or_else(|| bad("state"))?,
                kind: resource::parse_kind(&entry.kind).ok_or_else(|| bad("kind"))?,
                verdict: resource::parse_verdict(&entry.verdict).ok_or_else(|| bad("verdict"))?,
            });
        }
        s.session.step(&answers)?;
        Ok(resource::render(id, &s.instance, &s.session))
    }

    fn policy(&self, id: &str) -> Result<resource::PolicyView, ServiceError> {
        let slot = self.slot(id)?;
        let mut s = slot.lock().unwrap();
        s.last_used = Instant::now();
        resource::policy_view(&s.instance, s.session.status())
            .ok_or_else(|| ServiceError::Conflict(format!("session is {}, no policy yet", s.session.status())))
    }
}

async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionResource>), ServiceError> {
    let view = blocking(move || state.create(req)).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionResource>, ServiceError> {
    state.get(&id).map(Json)
}

async fn post_answers(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(batch): Json<AnswerBatch>,
) -> Result<Json<SessionResource>, ServiceError> {
    blocking(move || state.answer(&id, batch)).await.map(Json)
}

async fn get_policy(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<resource::PolicyView>, ServiceError> {
    state.policy(&id).map(Json)
}

async fn list_instances(State(state): State<Arc<AppState>>) -> Json<Vec<InstanceSummary>> {
    let instances = state.instances.read().unwrap();
    Json(instances.values().map(|i| InstanceSummary::of(i)).collect())
}

async fn get_instance(
    State(state): State<Arc<AppState>>,
    UrlPath(name): UrlPath<String>,
) -> Result<Response, ServiceError> {
    let instance = state.instance(&name)?;
    let body = benchmarks::serialize(&instance);
    Ok(([(axum::http::header::CONTENT_TYPE, "application/json")], body).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    let ui_dir = state.config.ui_dir.clone();
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/answers", post(post_answers))
        .route("/api/sessions/{id}/policy", get(get_policy))
        .route("/api/instances", get(list_instances))
        .route("/api/instances/{name}", get(get_instance))
        .with_state(state)
        .layer(CorsLayer::permissive());
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves the API on `addr` until the process exits, sweeping idle
/// sessions once a minute.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let sweeper = Arc::clone(&state);
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.evict_idle(Instant::now());
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idle_sessions_are_evicted() {
        let state = AppState::new(ServiceConfig {
            idle_timeout: Duration::from_secs(10),
            ..Default::default()
        });
        state.load_builtin();
        let view = state
            .create(CreateSession {
                instance: json!("switch"),
                planning: Default::default(),
            })
            .unwrap();
        assert_eq!(state.evict_idle(Instant::now()), 0);
        assert_eq!(state.evict_idle(Instant::now() + Duration::from_secs(11)), 1);
        assert!(matches!(state.get(&view.id), Err(ServiceError::UnknownSession(_))));
    }

    #[test]
    fn query_errors_map_to_status_codes() {
        let e: ServiceError = QueryError::AnswerMismatch("x".into()).into();
        assert_eq!(e.status(), StatusCode::UNPROCESSABLE_ENTITY);
        let e: ServiceError = QueryError::IllegalState("solved").into();
        assert_eq!(e.status(), StatusCode::CONFLICT);
    }
}
