//! HTTP sessions in which a human plays the follower against a planner.
//!
//! ```text
//! POST /sessions                      create a session, returns its view
//! GET  /sessions/{id}                 current view
//! POST /sessions/{id}/action          {"column": 2}
//! POST /sessions/{id}/learned         {"learned": true}   (M1 and M2 only)
//! GET  /sessions/{id}/transcript.csv
//! GET  /presets
//! ```

pub mod session;
pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex as StdMutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use revealplan_core::{preset, Error as CoreError, Game, GameSpec, Model, Planner, PlannerKind};
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, RwLock};

pub use session::{Phase, RevealMode, Session, SessionError, SessionView, TranscriptEntry};
pub use store::{Store, StoreError};

/// Bind address, e.g. `0.0.0.0:8080`.
pub const ADDR_ENV: &str = "REVEALPLAN_ADDR";
/// Path of the session database.
pub const DATA_ENV: &str = "REVEALPLAN_DATA";
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";

/// Text shown next to a specific joint outcome of a preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeNote {
    pub row: usize,
    pub column: usize,
    pub note: String,
}

pub fn outcome_notes(preset: &str) -> Vec<OutcomeNote> {
    match preset {
        "table-clearing" => [0, 1]
            .into_iter()
            .map(|column| OutcomeNote {
                row: 2,
                column,
                note: "The robot tried to pick up both objects, but the torque required \
                       exceeded its limits, so nothing was picked up."
                    .into(),
            })
            .collect(),
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetView {
    pub name: String,
    pub spec: GameSpec,
    pub outcome_notes: Vec<OutcomeNote>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub preset: Option<String>,
    pub spec: Option<GameSpec>,
    #[serde(default)]
    pub planner: PlannerKind,
    #[serde(default)]
    pub reveal_mode: RevealMode,
    pub model: Option<Model>,
    pub alpha: Option<f64>,
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRequest {
    pub column: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LearnedRequest {
    pub learned: bool,
}

/// Error body: `{code, message, phase}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    pub phase: Option<Phase>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.into(),
            message: message.into(),
            phase: None,
        }
    }

    fn in_phase(mut self, phase: Phase) -> Self {
        self.phase = Some(phase);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text())
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::UnknownPreset(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, "unknown_preset", e.to_string())
            }
            CoreError::Capacity(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "capacity", e.to_string())
            }
            _ => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_spec",
                e.to_string(),
            ),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "store_error",
            e.to_string(),
        )
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// A session with its validated game and (shared) planner tables.
struct Live {
    session: Session,
    game: Game,
    planner: Arc<Planner>,
}

impl Live {
    fn view(&self) -> SessionView {
        let notes = self
            .session
            .preset
            .as_deref()
            .map(outcome_notes)
            .unwrap_or_default();
        self.session.view(&self.game, &self.planner, &notes)
    }
}

pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<Live>>>>,
    planners: StdMutex<HashMap<String, Arc<Planner>>>,
    store: Arc<Store>,
}

impl AppState {
    /// Opens the state, resuming every stored session.
    pub fn new(store: Store) -> Result<Arc<Self>, ApiError> {
        let state = AppState {
            sessions: RwLock::new(HashMap::new()),
            planners: StdMutex::new(HashMap::new()),
            store: Arc::new(store),
        };
        let mut sessions = HashMap::new();
        for session in state.store.load_all()? {
            let game = Game::new(session.spec.clone()).map_err(CoreError::from)?;
            let planner = state.planner(&game, session.planner)?;
            let id = session.id.clone();
            sessions.insert(
                id,
                Arc::new(Mutex::new(Live {
                    session,
                    game,
                    planner,
                })),
            );
        }
        state
            .sessions
            .try_write()
            .expect("fresh lock")
            .extend(sessions);
        Ok(Arc::new(state))
    }

    pub fn in_memory() -> Arc<Self> {
        Self::new(Store::Memory).expect("memory store cannot fail")
    }

    /// Planner tables are shared by every session with the same game.
    fn planner(&self, game: &Game, kind: PlannerKind) -> Result<Arc<Planner>, CoreError> {
        let key = format!("{kind}|{}", serde_json::to_string(game.spec())?);
        if let Some(p) = self.planners.lock().expect("planner cache").get(&key) {
            return Ok(p.clone());
        }
        let planner = Arc::new(Planner::build(game, kind)?);
        self.planners
            .lock()
            .expect("planner cache")
            .insert(key, planner.clone());
        Ok(planner)
    }

    async fn live(&self, id: &str) -> ApiResult<Arc<Mutex<Live>>> {
        self.sessions.read().await.get(id).cloned().ok_or_else(|| {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "not_found",
                format!("no session {id:?}"),
            )
        })
    }

    async fn persist(&self, session: &Session) -> ApiResult<()> {
        let store = self.store.clone();
        let session = session.clone();
        tokio::task::spawn_blocking(move || store.save(&session))
            .await
            .map_err(|e| {
                ApiError::new(
                    StatusCode::INTERNAL_SERVER_ERROR,
                    "store_error",
                    e.to_string(),
                )
            })??;
        Ok(())
    }
}

fn session_error(e: SessionError, phase: Phase) -> ApiError {
    match e {
        SessionError::WrongPhase(m) => ApiError::new(StatusCode::CONFLICT, "wrong_phase", m),
        SessionError::InvalidColumn { .. } => ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_column",
            e.to_string(),
        ),
    }
    .in_phase(phase)
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let Json(req) = body?;
    let (preset_name, mut spec) = match (req.preset, req.spec) {
        (Some(name), None) => {
            let spec = preset(&name)?;
            (Some(name), spec)
        }
        (None, Some(spec)) => (None, spec),
        _ => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "bad_request",
                "give exactly one of \"preset\" and \"spec\"",
            ))
        }
    };
    if let Some(model) = req.model {
        spec.model = model;
    }
    if let Some(alpha) = req.alpha {
        spec.alpha = alpha;
    }
    if let Some(horizon) = req.horizon {
        spec.horizon = horizon;
    }
    let game = Game::new(spec).map_err(CoreError::from)?;
    let planner = state.planner(&game, req.planner)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::new(id.clone(), preset_name, &game, &planner, req.reveal_mode);
    state.persist(&session).await?;
    let live = Live {
        session,
        game,
        planner,
    };
    let view = live.view();
    state
        .sessions
        .write()
        .await
        .insert(id, Arc::new(Mutex::new(live)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionView>> {
    let live = state.live(&id).await?;
    let live = live.lock().await;
    Ok(Json(live.view()))
}

async fn submit_action(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<ActionRequest>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let live = state.live(&id).await?;
    let mut live = live.lock().await;
    let phase = live.session.phase;
    let body = body.map_err(|e| ApiError::from(e).in_phase(phase))?;
    let Live {
        session,
        game,
        planner,
    } = &mut *live;
    let mut next = session.clone();
    next.submit_action(game, planner, body.column)
        .map_err(|e| session_error(e, phase))?;
    state.persist(&next).await?;
    *session = next;
    Ok(Json(live.view()))
}

async fn declare_learned(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<LearnedRequest>, JsonRejection>,
) -> ApiResult<Json<SessionView>> {
    let live = state.live(&id).await?;
    let mut live = live.lock().await;
    let phase = live.session.phase;
    let body = body.map_err(|e| ApiError::from(e).in_phase(phase))?;
    let Live {
        session,
        game,
        planner,
    } = &mut *live;
    let mut next = session.clone();
    next.declare_learned(game, planner, body.learned)
        .map_err(|e| session_error(e, phase))?;
    state.persist(&next).await?;
    *session = next;
    Ok(Json(live.view()))
}

async fn transcript_csv(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let live = state.live(&id).await?;
    let live = live.lock().await;
    let csv = live.session.transcript_csv(&live.game).map_err(|e| {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "csv_error",
            e.to_string(),
        )
    })?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

async fn list_presets() -> ApiResult<Json<Vec<PresetView>>> {
    revealplan_core::game::PRESETS
        .iter()
        .map(|&name| {
            Ok(PresetView {
                name: name.to_string(),
                spec: preset(name)?,
                outcome_notes: outcome_notes(name),
            })
        })
        .collect::<Result<_, CoreError>>()
        .map(Json)
        .map_err(ApiError::from)
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/action", post(submit_action))
        .route("/sessions/{id}/learned", post(declare_learned))
        .route("/sessions/{id}/transcript.csv", get(transcript_csv))
        .route("/presets", get(list_presets))
        .fallback(fallback)
        .with_state(state)
}

/// Resolves the bind address from the environment value, overriding the
/// port when one is given.
pub fn bind_address(env: Option<&str>, port: Option<u16>) -> Result<SocketAddr, String> {
    let text = env.filter(|s| !s.is_empty()).unwrap_or(DEFAULT_ADDR);
    let mut addr: SocketAddr = text
        .parse()
        .map_err(|e| format!("invalid bind address {text:?}: {e}"))?;
    if let Some(port) = port {
        addr.set_port(port);
    }
    Ok(addr)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    /// Session database; sessions are kept in memory only when absent.
    pub data: Option<PathBuf>,
}

impl ServeConfig {
    /// Reads [`ADDR_ENV`] and [`DATA_ENV`].
    pub fn from_env(port: Option<u16>, data: Option<PathBuf>) -> Result<Self, String> {
        let addr = bind_address(std::env::var(ADDR_ENV).ok().as_deref(), port)?;
        let data = data.or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from));
        Ok(ServeConfig { addr, data })
    }
}

pub async fn serve(config: ServeConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let store = match &config.data {
        Some(path) => Store::open(path)?,
        None => Store::Memory,
    };
    let state = AppState::new(store).map_err(|e| e.message)?;
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
