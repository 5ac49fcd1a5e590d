//! Local HTTP service over the session store and the decision models.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use opa_bench::fixtures::published_rankings;
use opa_bench::spearman_heatmap;
use opa_core::elicitation::{
    next_question, pose_question, record_answer, start_session, utility_band, Answer, AskedQuestion,
    ElicitationSession, LotteryQuestion, SessionStatus,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::document::{from_value, parse_instance, parse_json, ResultDocument};
use crate::error::{ErrorClass, Result, WorkbenchError};
use crate::models::{ModelRegistry, SolveOptions};
use crate::openapi;
use crate::store::SessionStore;

pub struct AppState {
    pub store: SessionStore,
    pub models: ModelRegistry,
}

impl AppState {
    pub fn new(store: SessionStore) -> Self {
        AppState { store, models: ModelRegistry::default() }
    }
}

pub struct ApiError(pub WorkbenchError);

impl<E: Into<WorkbenchError>> From<E> for ApiError {
    fn from(e: E) -> Self {
        ApiError(e.into())
    }
}

pub fn status_of(err: &WorkbenchError) -> StatusCode {
    match err.class() {
        ErrorClass::Validation => StatusCode::BAD_REQUEST,
        ErrorClass::NotFound => StatusCode::NOT_FOUND,
        ErrorClass::Conflict => StatusCode::CONFLICT,
        ErrorClass::Solver | ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let err = self.0;
        let mut body = json!({ "code": err.code(), "message": err.to_string() });
        if !err.violations().is_empty() {
            body["violations"] = json!(err.violations());
        }
        (status_of(&err), Json(json!({ "error": body }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| WorkbenchError::Io(std::io::Error::other(e)))?.map_err(ApiError)
}

fn body_as<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T> {
    let text = std::str::from_utf8(body).map_err(|_| WorkbenchError::Parse("body is not UTF-8".into()))?;
    from_value(parse_json(text)?)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(rename = "R", alias = "ranks")]
    pub ranks: usize,
    #[serde(rename = "G", alias = "lipschitz")]
    pub lipschitz: f64,
    #[serde(rename = "L", alias = "questions")]
    pub questions: usize,
    pub seed: u64,
}

/// Public state of a session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    #[serde(rename = "R")]
    pub ranks: usize,
    #[serde(rename = "G")]
    pub lipschitz: f64,
    #[serde(rename = "L")]
    pub questions: usize,
    pub seed: u64,
    pub status: SessionStatus,
    pub budget_warning: bool,
    pub asked: Vec<AskedQuestion>,
    pub pending: Option<LotteryQuestion>,
}

impl SessionView {
    fn new(id: &str, s: &ElicitationSession) -> Self {
        SessionView {
            id: id.to_string(),
            ranks: s.ranks,
            lipschitz: s.lipschitz,
            questions: s.target_questions,
            seed: s.seed,
            status: s.status,
            budget_warning: s.budget_warning,
            asked: s.asked.clone(),
            pending: s.pending.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRequest {
    pub r1: usize,
    pub r2: usize,
    pub r3: usize,
    #[serde(default)]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerRequest {
    pub answer: Answer,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandView {
    pub grid: Vec<f64>,
    /// `[min, max]` of the normalized utility at each grid point.
    pub band: Vec<[f64; 2]>,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResponse {
    pub id: String,
    pub result: ResultDocument,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct SolveQuery {
    pub alpha: Option<f64>,
    pub lp_check: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct HeatmapQuery {
    /// Comma-separated method names; all published rows when absent.
    pub methods: Option<String>,
}

type AppStateRef = State<Arc<AppState>>;

async fn create_session(State(app): AppStateRef, body: Bytes) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let req: CreateSession = body_as(&body)?;
    let view = blocking(move || {
        let session = start_session(req.ranks, req.lipschitz, req.questions, req.seed)?;
        let id = app.store.create_session(&session)?;
        Ok(SessionView::new(&id, &session))
    })
    .await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(app): AppStateRef, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let file = blocking(move || app.store.session_file(&id)).await?;
    Ok(Json(serde_json::to_value(file).map_err(|e| WorkbenchError::Parse(e.to_string()))?))
}

async fn get_question(State(app): AppStateRef, Path(id): Path<String>) -> ApiResult<Json<LotteryQuestion>> {
    let q = blocking(move || app.store.update_session(&id, |s| Ok(next_question(s)?))).await?;
    Ok(Json(q))
}

async fn pose(State(app): AppStateRef, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<LotteryQuestion>> {
    let req: PoseRequest = body_as(&body)?;
    let q = blocking(move || {
        app.store.update_session(&id, |s| {
            if s.pending.is_some() {
                return Err(WorkbenchError::Conflict("a question is already pending".into()));
            }
            Ok(pose_question(s, req.r1, req.r2, req.r3, req.p)?)
        })
    })
    .await?;
    Ok(Json(q))
}

async fn answer(State(app): AppStateRef, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<SessionView>> {
    let req: AnswerRequest = body_as(&body)?;
    let view = blocking(move || {
        app.store.update_session(&id, |s| {
            record_answer(s, req.answer)?;
            Ok(SessionView::new(&id, s))
        })
    })
    .await?;
    Ok(Json(view))
}

async fn band(State(app): AppStateRef, Path(id): Path<String>) -> ApiResult<Json<BandView>> {
    let view = blocking(move || {
        let s = app.store.session_file(&id)?.session;
        let band = utility_band(&s)?;
        Ok(BandView {
            grid: s.spec.grid.clone(),
            band: band.into_iter().map(|(lo, hi)| [lo, hi]).collect(),
            status: s.status,
        })
    })
    .await?;
    Ok(Json(view))
}

async fn solve(
    State(app): AppStateRef,
    Path(model): Path<String>,
    Query(q): Query<SolveQuery>,
    body: Bytes,
) -> ApiResult<Json<SolveResponse>> {
    app.models.get(&model)?;
    let text = String::from_utf8(body.to_vec()).map_err(|_| WorkbenchError::Parse("body is not UTF-8".into()))?;
    let out = blocking(move || {
        let doc = parse_instance(&text)?;
        let opts = SolveOptions { lp_check: q.lp_check.unwrap_or(false), alpha: q.alpha };
        let result = app.models.solve(&model, &doc, &app.store, &opts)?;
        let id = app.store.save_result(&result)?;
        Ok(SolveResponse { id, result })
    })
    .await?;
    Ok(Json(out))
}

async fn get_result(State(app): AppStateRef, Path(id): Path<String>) -> ApiResult<Json<ResultDocument>> {
    Ok(Json(blocking(move || app.store.load_result(&id)).await?))
}

async fn heatmap(Query(q): Query<HeatmapQuery>) -> ApiResult<Json<opa_bench::Heatmap>> {
    let published = published_rankings()?;
    let rows = match q.methods {
        None => published.named(),
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(|m| {
                published
                    .get(m)
                    .map(|r| (m.to_string(), r.clone()))
                    .ok_or_else(|| WorkbenchError::NotFound(format!("no published ranking for `{m}`")))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(Json(spearman_heatmap(&rows)?))
}

async fn spec() -> Json<Value> {
    Json(openapi::document())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/spec", get(spec))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/question", get(get_question).post(pose))
        .route("/api/sessions/{id}/answer", post(answer))
        .route("/api/sessions/{id}/band", get(band))
        .route("/api/solve/{model}", post(solve))
        .route("/api/results/{id}", get(get_result))
        .route("/api/bench/heatmap", get(heatmap))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, store: SessionStore) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    let app = router(Arc::new(AppState::new(store)));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
