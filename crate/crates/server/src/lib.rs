//! Local HTTP service for interactive sessions.
//!
//! Every session is a [`Session`] behind its own mutex; handlers only touch
//! it through that lock, so each session has a single writer at a time.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use distortion_core::harness::ExperimentReport;
use distortion_core::lexicon::Lexicon;
use distortion_core::obfuscator::{
    assemble_query, AssembleOptions, CategoryPattern, IntentQuery, ObfuscatedQuery,
};
use distortion_core::searchsim::{Ad, AdInventory, Corpus, ResultPage};
use distortion_core::session::{
    exposure_report, ExposureReport, LogRecord, PseudoProfile, Session, SessionError, SpecificityRule, TargetKind,
};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub top_k: usize,
    /// Ads shown next to every result page.
    pub ads_per_query: usize,
    pub assemble: AssembleOptions,
    /// Base seed for queries that don't bring their own.
    pub seed: u64,
    /// Session logs are written here on shutdown (and by [`AppState::flush_logs`]).
    pub log_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            top_k: 10,
            ads_per_query: 3,
            assemble: AssembleOptions::default(),
            seed: 2014,
            log_dir: None,
        }
    }
}

struct LiveSession {
    session: Session,
    /// Intent of the most recent query; exposure is measured against it.
    intent: Option<String>,
    queries: u64,
}

pub struct AppState {
    corpus: Corpus,
    inventory: AdInventory,
    lexicon: Lexicon,
    config: ServerConfig,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<LiveSession>>>>,
    next_id: AtomicU64,
    report: RwLock<Option<ExperimentReport>>,
}

impl AppState {
    pub fn new(corpus: Corpus, inventory: AdInventory, lexicon: Lexicon, config: ServerConfig) -> Self {
        Self {
            corpus,
            inventory,
            lexicon,
            config,
            sessions: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
            report: RwLock::new(None),
        }
    }

    pub fn set_report(&self, report: ExperimentReport) {
        *self.report.write().expect("report lock") = Some(report);
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.read().expect("sessions lock").keys().cloned().collect()
    }

    /// Writes `<log_dir>/<session_id>.jsonl` for every session. Returns the
    /// written paths; nothing is written without a log directory.
    pub fn flush_logs(&self) -> io::Result<Vec<PathBuf>> {
        let Some(dir) = &self.config.log_dir else {
            return Ok(Vec::new());
        };
        fs::create_dir_all(dir)?;
        let sessions: Vec<(String, Arc<Mutex<LiveSession>>)> = self
            .sessions
            .read()
            .expect("sessions lock")
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let mut written = Vec::new();
        for (id, live) in sessions {
            let path = dir.join(format!("{id}.jsonl"));
            let live = live.lock().expect("session lock");
            let mut buf = Vec::new();
            live.session.write_log_jsonl(&mut buf)?;
            fs::write(&path, buf)?;
            written.push(path);
        }
        Ok(written)
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<LiveSession>>, ApiError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id:?}")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            code,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            code: "not_found",
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request("invalid_body", e.body_text())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let code = match e {
            SessionError::UnknownTarget { .. } => "unknown_target",
            _ => "invalid_session_request",
        };
        Self::bad_request(code, e.to_string())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
}

#[derive(Debug, Deserialize)]
pub struct QueryRequest {
    pub intent: String,
    pub pattern: String,
    /// Same seed, same decoys.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Hand-edited segment list; must keep the intent as one of its segments.
    #[serde(default)]
    pub segments: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResultItem {
    pub rank: usize,
    pub doc_id: String,
    pub score: f64,
    pub title: String,
    pub url: String,
    pub snippet: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PageView {
    pub query_id: String,
    pub top_k: usize,
    pub results: Vec<ResultItem>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QueryResponse {
    pub query: ObfuscatedQuery,
    pub result_page: PageView,
    pub ads: Vec<Ad>,
}

#[derive(Debug, Deserialize)]
pub struct ClickRequest {
    pub target: String,
    pub kind: TargetKind,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProfileResponse {
    pub profile: PseudoProfile,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProfileView {
    pub session_id: String,
    pub profile: PseudoProfile,
    /// `None` until an ad has been shown.
    pub exposure: Option<ExposureReport>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LogView {
    pub session_id: String,
    pub records: Vec<LogRecord>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/query", post(run_query))
        .route("/sessions/{id}/click", post(click))
        .route("/sessions/{id}/profile", get(profile))
        .route("/sessions/{id}/log", get(event_log))
        .route("/report/latest", get(latest_report))
        .with_state(state)
}

async fn create_session(State(state): State<Arc<AppState>>) -> (StatusCode, Json<CreatedSession>) {
    let n = state.next_id.fetch_add(1, Ordering::Relaxed);
    let id = format!("s{n}");
    let live = LiveSession {
        session: Session::new(id.clone()),
        intent: None,
        queries: 0,
    };
    state
        .sessions
        .write()
        .expect("sessions lock")
        .insert(id.clone(), Arc::new(Mutex::new(live)));
    (StatusCode::CREATED, Json(CreatedSession { session_id: id }))
}

fn edited_query(base: ObfuscatedQuery, intent: &IntentQuery, segments: Vec<String>) -> Result<ObfuscatedQuery, ApiError> {
    if segments.iter().any(|s| s.trim().is_empty()) {
        return Err(ApiError::bad_request("invalid_segments", "segments must not be empty"));
    }
    let hits: Vec<usize> = segments
        .iter()
        .enumerate()
        .filter(|(_, s)| s.trim() == intent.phrase)
        .map(|(i, _)| i)
        .collect();
    let [intent_index] = hits[..] else {
        return Err(ApiError::bad_request(
            "invalid_segments",
            "segments must contain the intent exactly once",
        ));
    };
    Ok(ObfuscatedQuery {
        segments: segments.into_iter().map(|s| s.trim().to_string()).collect(),
        intent_index,
        ..base
    })
}

fn page_view(page: &ResultPage, corpus: &Corpus) -> PageView {
    let results = page
        .hits
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            let doc = corpus.get(&h.doc_id)?;
            Some(ResultItem {
                rank: i + 1,
                doc_id: h.doc_id.clone(),
                score: h.score,
                title: doc.title.clone(),
                url: doc.url.clone(),
                snippet: doc.snippet.clone(),
            })
        })
        .collect();
    PageView {
        query_id: page.query_id.clone(),
        top_k: page.top_k,
        results,
    }
}

async fn run_query(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> Result<Json<QueryResponse>, ApiError> {
    let Json(req) = body?;
    let live = state.session(&id)?;
    let intent = IntentQuery::new(&req.intent, &state.lexicon)
        .map_err(|e| ApiError::bad_request("invalid_intent", e.to_string()))?;
    let pattern: CategoryPattern = req
        .pattern
        .trim()
        .parse()
        .map_err(|e: distortion_core::obfuscator::PatternError| ApiError::bad_request("invalid_pattern", e.to_string()))?;
    let rule = SpecificityRule::new(&intent.phrase, state.corpus.config())
        .map_err(|e| ApiError::bad_request("invalid_intent", e.to_string()))?;

    let mut live = live.lock().expect("session lock");
    live.queries += 1;
    let query_id = format!("Q{}", live.queries);
    let seed = req.seed.unwrap_or_else(|| state.config.seed ^ live.queries.rotate_left(32));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generated = assemble_query(&query_id, &intent, &pattern, &state.lexicon, &state.config.assemble, &mut rng)
        .map_err(|e| ApiError::bad_request("obfuscation_failed", e.to_string()))?;
    let query = match req.segments {
        Some(segments) => edited_query(generated, &intent, segments)?,
        None => generated,
    };
    let page = state
        .corpus
        .execute(&query, state.config.top_k)
        .map_err(|e| ApiError::bad_request("search_failed", e.to_string()))?;
    let draw = state
        .inventory
        .sample(live.session.profile(), state.config.ads_per_query, &mut rng)
        .map_err(|e| ApiError::bad_request("ads_failed", e.to_string()))?;
    let day = live.queries as usize;
    for ad in &draw.ads {
        // Only clicks move the profile; impressions are logged for exposure.
        live.session.record_impression(day, ad, rule.is_specific(ad), false);
    }
    let view = page_view(&page, &state.corpus);
    live.session.record_page(page);
    live.intent = Some(intent.phrase.clone());
    Ok(Json(QueryResponse {
        query,
        result_page: view,
        ads: draw.ads,
    }))
}

async fn click(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<ClickRequest>, JsonRejection>,
) -> Result<Json<ProfileResponse>, ApiError> {
    let Json(req) = body?;
    let live = state.session(&id)?;
    let mut live = live.lock().expect("session lock");
    live.session.click(&req.target, req.kind, &state.corpus)?;
    Ok(Json(ProfileResponse {
        profile: live.session.profile().clone(),
    }))
}

async fn profile(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<ProfileView>, ApiError> {
    let live = state.session(&id)?;
    let live = live.lock().expect("session lock");
    let exposure = match &live.intent {
        Some(intent) if !live.session.ads_served().is_empty() => {
            Some(exposure_report(live.session.ads_served(), intent, state.corpus.config())?)
        }
        _ => None,
    };
    Ok(Json(ProfileView {
        session_id: id,
        profile: live.session.profile().clone(),
        exposure,
    }))
}

async fn event_log(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<LogView>, ApiError> {
    let live = state.session(&id)?;
    let live = live.lock().expect("session lock");
    Ok(Json(LogView {
        session_id: id,
        records: live.session.log().to_vec(),
    }))
}

async fn latest_report(State(state): State<Arc<AppState>>) -> Result<Json<ExperimentReport>, ApiError> {
    state
        .report
        .read()
        .expect("report lock")
        .clone()
        .map(Json)
        .ok_or_else(|| ApiError::not_found("no report has been produced yet"))
}

/// Serves until ctrl-c, then flushes session logs.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    let written = state.flush_logs()?;
    log::info!("flushed {} session logs", written.len());
    Ok(())
}
