//! HTTP session service over the analogy pipeline.
//!
//! Every session is a JSON document under the data directory. Handlers load it,
//! apply one step under a per-session lock and persist it before answering.

use std::collections::HashMap;
use std::fs;
use std::future::Future;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use analogist_core::config::{Config, ConfigError, Engine};
use analogist_core::designspace::AnalogyStrategy;
use analogist_core::genai::ProviderError;
use analogist_core::pipeline::{write_materials, PipelineError, StageError, StatementKind, Stage1Request};
use analogist_core::scoring::{FactorWeights, WeightConfig};
use analogist_core::session::{valid_id, Session, SessionError, SessionStore};

/// Shared state behind every handler.
pub struct AppState {
    engine: Arc<Engine>,
    store: SessionStore,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    timeout: Duration,
}

impl AppState {
    pub fn new(engine: Engine, store: SessionStore, timeout: Duration) -> Self {
        Self {
            engine: Arc::new(engine),
            store,
            locks: Mutex::new(HashMap::new()),
            timeout,
        }
    }

    pub fn from_config(config: &Config) -> Result<Self, ServerError> {
        let engine = Engine::from_config(config)?;
        let store = SessionStore::new(&config.data_dir).map_err(|e| ServerError::Storage(e.to_string()))?;
        Ok(Self::new(engine, store, Duration::from_secs(config.request_timeout_secs)))
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }

    /// Runs a blocking pipeline call off the async workers, bounded by the request timeout.
    async fn blocking<T, F>(&self, stage: &'static str, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&Engine) -> Result<T, StageError> + Send + 'static,
    {
        let engine = self.engine.clone();
        let task = tokio::task::spawn_blocking(move || f(&engine));
        match tokio::time::timeout(self.timeout, task).await {
            Ok(Ok(result)) => result.map_err(ApiError::from),
            Ok(Err(join)) => Err(ApiError::internal(format!("{stage}: worker failed: {join}"))),
            Err(_) => Err(ApiError::new(
                StatusCode::GATEWAY_TIMEOUT,
                "timeout",
                format!("no result within {}s", self.timeout.as_secs()),
            )
            .with_stage(stage)),
        }
    }

    fn load(&self, id: &str) -> Result<Session, ApiError> {
        if !valid_id(id) {
            return Err(ApiError::not_found(format!("session `{id}`")));
        }
        Ok(self.store.load(id)?)
    }

    fn save(&self, session: &Session) -> Result<(), ApiError> {
        Ok(self.store.save(session)?)
    }

    async fn with_session<T, F, Fut>(&self, id: &str, f: F) -> Result<T, ApiError>
    where
        F: FnOnce(Session) -> Fut,
        Fut: Future<Output = Result<T, ApiError>>,
    {
        let lock = self.lock_for(id);
        let _guard = lock.lock().await;
        let session = self.load(id)?;
        f(session).await
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("session storage: {0}")]
    Storage(String),
    #[error("binding {addr}: {message}")]
    Bind { addr: String, message: String },
    #[error("serving: {0}")]
    Serve(String),
}

/// JSON error body: `{"error": {"kind", "message", "stage"?}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    stage: Option<&'static str>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
            stage: None,
        }
    }

    fn with_stage(mut self, stage: &'static str) -> Self {
        self.stage = Some(stage);
        self
    }

    fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("not found: {}", what.into()))
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::NotFound(what) => ApiError::not_found(what),
            SessionError::Conflict(m) => ApiError::new(StatusCode::CONFLICT, "conflict", m),
            SessionError::Invalid(m) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid", m),
            e @ SessionError::Storage { .. } => ApiError::internal(e.to_string()),
        }
    }
}

impl From<StageError> for ApiError {
    fn from(e: StageError) -> Self {
        let (status, kind) = match &e.source {
            PipelineError::Provider(ProviderError::Timeout { .. }) => (StatusCode::GATEWAY_TIMEOUT, "timeout"),
            PipelineError::Provider(_)
            | PipelineError::Generation(_)
            | PipelineError::Design(_)
            | PipelineError::Materials(_) => (StatusCode::BAD_GATEWAY, "upstream"),
            PipelineError::Parse(_) | PipelineError::Argument(_) | PipelineError::Unit(_) | PipelineError::Scoring(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid")
            }
            PipelineError::Configuration(_)
            | PipelineError::Template(_)
            | PipelineError::Lexicon(_)
            | PipelineError::Io { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, kind, e.source.to_string()).with_stage(e.stage)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(stage = self.stage, "{}", self.message);
        }
        let mut body = json!({ "kind": self.kind, "message": self.message });
        if let Some(stage) = self.stage {
            body["stage"] = json!(stage);
        }
        (self.status, Json(json!({ "error": body }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateBody {
    pub statement: String,
    #[serde(default)]
    pub kind: StatementKind,
    #[serde(default)]
    pub strategy: Option<AnalogyStrategy>,
    #[serde(default)]
    pub weights: Option<WeightConfig>,
    #[serde(default)]
    pub theme_hint: String,
}

/// Either a full weight configuration or just the three factor weights.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RerankBody {
    #[serde(default)]
    pub weights: Option<WeightConfig>,
    #[serde(default)]
    pub factors: Option<FactorWeights>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChooseBody {
    pub candidate_id: String,
    #[serde(default)]
    pub sentence: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBody {
    /// Replacement object keywords applied after generation.
    #[serde(default)]
    pub objects: Option<Vec<String>>,
    #[serde(default)]
    pub background: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsBody {
    pub selected: Vec<String>,
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    version: &'static str,
}

/// Parses an optional JSON body; an empty body yields the default.
fn optional_body<T: Default + serde::de::DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("request body: {e}")))
}

fn required_body<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("request body: {e}")))
}

async fn healthz() -> Json<Health> {
    Json(Health {
        status: "ok",
        version: env!("CARGO_PKG_VERSION"),
    })
}

async fn create(State(app): State<Arc<AppState>>, body: axum::body::Bytes) -> ApiResult<(StatusCode, Json<Session>)> {
    let body: CreateBody = required_body(&body)?;
    if body.statement.trim().is_empty() {
        return Err(ApiError::bad_request("statement is empty"));
    }
    let weights = body.weights.unwrap_or_default();
    weights.validate().map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid", e.to_string()))?;
    let session = Session::new(Stage1Request {
        statement: body.statement,
        kind: body.kind,
        strategy: body.strategy,
        weights,
        theme_hint: body.theme_hint,
    });
    app.save(&session)?;
    tracing::info!(session = %session.id, "created");
    Ok((StatusCode::CREATED, Json(session)))
}

async fn fetch(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Session>> {
    Ok(Json(app.load(&id)?))
}

async fn generate(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Session>> {
    let app2 = app.clone();
    app.with_session(&id, |mut session| async move {
        let request = session.request.clone();
        let report = app2.blocking("stage1", move |engine| engine.stage1(&request)).await?;
        session.set_generated(report);
        app2.save(&session)?;
        Ok(Json(session))
    })
    .await
}

async fn rerank(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: axum::body::Bytes,
) -> ApiResult<Json<Session>> {
    let body: RerankBody = optional_body(&body)?;
    let app2 = app.clone();
    app.with_session(&id, |mut session| async move {
        let mut weights = body.weights.unwrap_or(session.request.weights);
        if let Some(f) = body.factors {
            weights.factors = f;
        }
        session.rerank(&weights)?;
        app2.save(&session)?;
        Ok(Json(session))
    })
    .await
}

async fn choose(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: axum::body::Bytes,
) -> ApiResult<Json<Session>> {
    let body: ChooseBody = required_body(&body)?;
    let app2 = app.clone();
    app.with_session(&id, |mut session| async move {
        session.choose(&body.candidate_id, body.sentence)?;
        app2.save(&session)?;
        Ok(Json(session))
    })
    .await
}

async fn design(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: axum::body::Bytes,
) -> ApiResult<Json<Session>> {
    let body: DesignBody = optional_body(&body)?;
    let app2 = app.clone();
    app.with_session(&id, |mut session| async move {
        let sentence = session.chosen_sentence()?.to_string();
        let mut scheme = app2.blocking("stage2.design", move |engine| engine.design(&sentence)).await?;
        let edit = |e: PipelineError| ApiError::from(e.at("stage2.design"));
        if let Some(objects) = body.objects {
            scheme = scheme.with_objects(objects).map_err(edit)?;
        }
        if let Some(background) = body.background {
            scheme = scheme.with_background(background).map_err(edit)?;
        }
        session.set_scheme(scheme)?;
        app2.save(&session)?;
        Ok(Json(session))
    })
    .await
}

async fn materials(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: axum::body::Bytes,
) -> ApiResult<Json<Session>> {
    let body: MaterialsBody = required_body(&body)?;
    let app2 = app.clone();
    app.with_session(&id, |mut session| async move {
        let scheme = session.scheme()?.clone();
        let dir = app2.store.materials_dir(&session.id);
        let set = app2
            .blocking("stage2.materials", move |engine| {
                let set = engine.materials(&scheme, &body.selected)?;
                write_materials(&dir, &set).map_err(|e| e.at("stage2.materials"))?;
                Ok(set)
            })
            .await?;
        session.set_materials(&set)?;
        app2.save(&session)?;
        Ok(Json(session))
    })
    .await
}

fn content_type(name: &str) -> &'static str {
    match Path::new(name).extension().and_then(|e| e.to_str()) {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        Some("json") => "application/json",
        _ => "application/octet-stream",
    }
}

async fn material_file(
    State(app): State<Arc<AppState>>,
    UrlPath((id, name)): UrlPath<(String, String)>,
) -> ApiResult<Response> {
    let session = app.load(&id)?;
    if !session.material_files().any(|f| f == name) {
        return Err(ApiError::not_found(format!("material `{name}`")));
    }
    let path = app.store.materials_dir(&id).join(&name);
    let bytes = fs::read(&path).map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))?;
    Ok(([(header::CONTENT_TYPE, content_type(&name))], bytes).into_response())
}

async fn fallback() -> ApiError {
    ApiError::not_found("route")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(fetch))
        .route("/sessions/{id}/generate", post(generate))
        .route("/sessions/{id}/rerank", post(rerank))
        .route("/sessions/{id}/choose", post(choose))
        .route("/sessions/{id}/design", post(design))
        .route("/sessions/{id}/materials", post(materials))
        .route("/sessions/{id}/materials/{name}", get(material_file))
        .fallback(fallback)
        .with_state(state)
}

/// Binds `config.listen` and serves until ctrl-c.
pub async fn serve(config: &Config) -> Result<(), ServerError> {
    let state = Arc::new(AppState::from_config(config)?);
    let addr: SocketAddr = config.listen.parse().map_err(|e: std::net::AddrParseError| ServerError::Bind {
        addr: config.listen.clone(),
        message: e.to_string(),
    })?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| ServerError::Bind {
        addr: config.listen.clone(),
        message: e.to_string(),
    })?;
    tracing::info!(%addr, data_dir = %config.data_dir.display(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServerError::Serve(e.to_string()))
}
