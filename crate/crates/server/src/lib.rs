//! HTTP facade over the engines: sessions hold a catalog, a query draft and
//! the latest design; solves run on the blocking pool and answer 202 with a
//! poll URL when they take longer than the synchronous wait.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use archforge_core::explain::{
    default_objective, explain, render, ExplainError, ExplainOptions, ExplainRequest, Explanation, Renderer,
};
use archforge_core::io::{load_catalog_sources, load_query_source, to_canonical, Diagnostic, LoadError, Source};
use archforge_core::model::{Catalog, Query};
use archforge_core::synth::{synthesize, Design, SynthError, SynthOptions, SynthOutcome};
use archforge_core::bundled;
use axum::body::Bytes;
use axum::extract::{Path, Query as QueryParams, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::Router;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::oneshot;

#[derive(Clone, Debug)]
pub struct Config {
    /// How long a solve may run before the request answers 202.
    pub sync_wait: Duration,
    /// Idle time after which sessions and finished jobs are dropped.
    pub ttl: Duration,
    /// Default solver budget when the request names none.
    pub budget: Duration,
}

impl Default for Config {
    fn default() -> Self {
        Config { sync_wait: Duration::from_secs(2), ttl: Duration::from_secs(30 * 60), budget: Duration::from_secs(30) }
    }
}

struct Session {
    catalog: Arc<Catalog>,
    query: Option<Arc<Query>>,
    design: Option<Arc<Design>>,
    explanations: Vec<Explanation>,
    touched: Instant,
}

const KEPT_EXPLANATIONS: usize = 16;

enum Job {
    Running(Instant),
    Done(Instant, StatusCode, String),
}

#[derive(Clone)]
pub struct AppState {
    config: Config,
    default_catalog: Arc<Catalog>,
    sessions: Arc<Mutex<HashMap<String, Session>>>,
    jobs: Arc<Mutex<HashMap<String, Job>>>,
}

impl AppState {
    pub fn new(default_catalog: Catalog, config: Config) -> Self {
        AppState {
            config,
            default_catalog: Arc::new(default_catalog),
            sessions: Arc::default(),
            jobs: Arc::default(),
        }
    }

    /// Drops idle sessions and old finished jobs. Running solves keep their
    /// own copies of the inputs, so eviction cannot disturb them.
    pub fn evict_expired(&self) {
        let ttl = self.config.ttl;
        self.sessions.lock().unwrap().retain(|_, s| s.touched.elapsed() < ttl);
        self.jobs.lock().unwrap().retain(|_, j| match j {
            Job::Running(_) => true,
            Job::Done(at, ..) => at.elapsed() < ttl,
        });
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }
}

// --- errors -------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    code: String,
    message: String,
    details: Vec<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, code: code.into(), message: message.into(), details: Vec::new() }
    }
    fn not_found(what: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no such {what}"))
    }
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }
    fn with_details(mut self, details: Vec<String>) -> Self {
        self.details = details;
        self
    }
    fn body(&self) -> String {
        to_canonical(self)
    }
}

impl From<LoadError> for ApiError {
    fn from(e: LoadError) -> Self {
        let (status, code) = match e {
            LoadError::Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_document"),
            _ => (StatusCode::BAD_REQUEST, "parse_error"),
        };
        let details = e.diagnostics().iter().map(Diagnostic::to_string).collect();
        ApiError::new(status, code, "document rejected").with_details(details)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        json_response(self.status, self.body())
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

type ApiResult = Result<Response, ApiError>;

// --- routes -------------------------------------------------------------------

pub fn app(state: AppState) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", axum::routing::delete(delete_session))
        .route("/v1/sessions/{id}/query", put(put_query))
        .route("/v1/sessions/{id}/synthesize", post(post_synthesize))
        .route("/v1/sessions/{id}/explain", post(post_explain))
        .route("/v1/sessions/{id}/designs/latest", get(latest_design))
        .route("/v1/catalog/{kind}", get(catalog_entries))
        .route("/v1/jobs/{job}", get(poll_job))
        .with_state(state)
}

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSession {
    /// Name of a bundled catalog.
    bundled: Option<String>,
    /// Catalog documents, merged in order.
    catalogs: Option<Vec<Value>>,
}

async fn create_session(State(st): State<AppState>, body: Bytes) -> ApiResult {
    let req: NewSession = parse_body(&body)?;
    let catalog = match (req.bundled, req.catalogs) {
        (Some(_), Some(_)) => return Err(ApiError::bad_request("give either `bundled` or `catalogs`, not both")),
        (Some(name), None) => {
            let text = bundled::catalog_source(&name).ok_or_else(|| ApiError::not_found("bundled catalog"))?;
            load_catalog_sources(&[Source::new(format!("bundled:{name}"), text)])?
        }
        (None, Some(docs)) => {
            let sources: Vec<Source> = docs
                .iter()
                .enumerate()
                .map(|(i, d)| Source::new(format!("catalogs[{i}]"), serde_json::to_string_pretty(d).unwrap()))
                .collect();
            load_catalog_sources(&sources)?
        }
        (None, None) => (*st.default_catalog).clone(),
    };
    let id = uuid::Uuid::new_v4().to_string();
    st.sessions.lock().unwrap().insert(
        id.clone(),
        Session { catalog: Arc::new(catalog), query: None, design: None, explanations: Vec::new(), touched: Instant::now() },
    );
    tracing::info!(session = %id, "session created");
    Ok(json_response(StatusCode::CREATED, to_canonical(&json!({ "id": id }))))
}

async fn delete_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    match st.sessions.lock().unwrap().remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT.into_response()),
        None => Err(ApiError::not_found("session")),
    }
}

/// Runs `f` against a live session, refreshing its idle timer.
fn with_session<R>(st: &AppState, id: &str, f: impl FnOnce(&mut Session) -> R) -> Result<R, ApiError> {
    let mut sessions = st.sessions.lock().unwrap();
    let s = sessions.get_mut(id).filter(|s| s.touched.elapsed() < st.config.ttl).ok_or_else(|| ApiError::not_found("session"))?;
    s.touched = Instant::now();
    Ok(f(s))
}

async fn put_query(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let catalog = with_session(&st, &id, |s| s.catalog.clone())?;
    let text = String::from_utf8(body.to_vec()).map_err(|_| ApiError::bad_request("query must be UTF-8"))?;
    let query = load_query_source(&catalog, &Source::new("query", text))?;
    with_session(&st, &id, |s| {
        s.query = Some(Arc::new(query));
        s.design = None;
    })?;
    Ok(json_response(StatusCode::OK, to_canonical(&json!({ "status": "ok" }))))
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveParams {
    seed: Option<u64>,
    budget_seconds: Option<u64>,
}

async fn post_synthesize(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let params: SolveParams = parse_body(&body)?;
    let (catalog, query) = with_session(&st, &id, |s| (s.catalog.clone(), s.query.clone()))?;
    let query = query.ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "no_query", "PUT a query first"))?;
    let opts = SynthOptions {
        seed: params.seed.unwrap_or(0),
        budget: params.budget_seconds.map(Duration::from_secs).unwrap_or(st.config.budget),
    };
    let sessions = st.sessions.clone();
    Ok(run_job(&st, move || match synthesize(&catalog, &query, &opts) {
        Ok(SynthOutcome::Design(d)) => {
            let body = to_canonical(&*d);
            // The session may have been deleted or given a new query meanwhile.
            if let Some(s) = sessions.lock().unwrap().get_mut(&id) {
                if s.query.as_ref().is_some_and(|q| Arc::ptr_eq(q, &query)) {
                    s.design = Some(Arc::new(*d));
                }
            }
            (StatusCode::OK, body)
        }
        Ok(SynthOutcome::Infeasible(inf)) => (StatusCode::OK, to_canonical(&inf)),
        Err(e) => synth_error(e),
    })
    .await)
}

fn synth_error(e: SynthError) -> (StatusCode, String) {
    let err = match &e {
        SynthError::Timeout => ApiError::new(StatusCode::GATEWAY_TIMEOUT, "timeout", e.to_string()),
        SynthError::Invalid(v) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_document", e.to_string())
            .with_details(v.iter().map(|v| format!("[{}] {}: {}", v.code, v.path, v.message)).collect()),
        SynthError::Encoding(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "encoding", e.to_string()),
        SynthError::CheckFailed(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "check_failed", e.to_string()),
    };
    (err.status, err.body())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplainBody {
    workload: String,
    role: String,
    preferred: String,
    objective: Option<String>,
    #[serde(default)]
    flexible: Vec<String>,
    seed: Option<u64>,
    budget_seconds: Option<u64>,
}

#[derive(Default, Deserialize)]
struct ExplainParams {
    /// `template` or `summarizer`: answer with rendered text instead of the
    /// explanation document.
    render: Option<String>,
}

async fn post_explain(
    State(st): State<AppState>,
    Path(id): Path<String>,
    QueryParams(params): QueryParams<ExplainParams>,
    body: Bytes,
) -> ApiResult {
    let b: ExplainBody =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("malformed explain request: {e}")))?;
    let renderer = match params.render.as_deref() {
        None => None,
        Some("template") => Some(Renderer::Template),
        Some("summarizer") => Some(Renderer::from_env()),
        Some(other) => return Err(ApiError::bad_request(format!("unknown renderer {other}"))),
    };
    let (catalog, query, design) = with_session(&st, &id, |s| (s.catalog.clone(), s.query.clone(), s.design.clone()))?;
    let (Some(query), Some(design)) = (query, design) else {
        return Err(ApiError::new(StatusCode::CONFLICT, "no_design", "synthesize a design first"));
    };
    let objective = b
        .objective
        .or_else(|| default_objective(&catalog, &query, &design, &b.workload, &b.role, &b.preferred))
        .ok_or_else(|| ApiError::bad_request(format!("no objective to consult for {}", b.role)))?;
    let req = ExplainRequest { workload: b.workload, role: b.role, preferred: b.preferred, objective, flexible: b.flexible };
    let opts = ExplainOptions {
        seed: b.seed.unwrap_or(0),
        budget: b.budget_seconds.map(Duration::from_secs).unwrap_or(st.config.budget),
        ..ExplainOptions::default()
    };
    let sessions = st.sessions.clone();
    Ok(run_job(&st, move || match explain(&catalog, &query, &design, &req, &opts) {
        Ok(e) => {
            let body = match &renderer {
                Some(r) => render(&e, r).text,
                None => to_canonical(&e),
            };
            if let Some(s) = sessions.lock().unwrap().get_mut(&id) {
                s.explanations.push(e);
                let extra = s.explanations.len().saturating_sub(KEPT_EXPLANATIONS);
                s.explanations.drain(..extra);
            }
            (StatusCode::OK, body)
        }
        Err(e) => {
            let err = match &e {
                ExplainError::InvalidRequest(_) => ApiError::bad_request(e.to_string()),
                ExplainError::Timeout => ApiError::new(StatusCode::GATEWAY_TIMEOUT, "timeout", e.to_string()),
                ExplainError::Encoding(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "encoding", e.to_string()),
                ExplainError::CheckFailed(_) => {
                    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "check_failed", e.to_string())
                }
            };
            (err.status, err.body())
        }
    })
    .await)
}

async fn latest_design(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let design = with_session(&st, &id, |s| s.design.clone())?.ok_or_else(|| ApiError::not_found("design"))?;
    Ok(json_response(StatusCode::OK, to_canonical(&*design)))
}

#[derive(Default, Deserialize)]
struct CatalogParams {
    session: Option<String>,
}

async fn catalog_entries(
    State(st): State<AppState>,
    Path(kind): Path<String>,
    QueryParams(p): QueryParams<CatalogParams>,
) -> ApiResult {
    let catalog = match p.session {
        Some(id) => with_session(&st, &id, |s| s.catalog.clone())?,
        None => st.default_catalog.clone(),
    };
    let body = match kind.as_str() {
        "systems" => to_canonical(&catalog.systems),
        "hardware" => to_canonical(&catalog.hardware),
        "roles" => to_canonical(&catalog.roles),
        "orderings" => to_canonical(&catalog.orderings),
        _ => return Err(ApiError::not_found("catalog section")),
    };
    Ok(json_response(StatusCode::OK, body))
}

async fn poll_job(State(st): State<AppState>, Path(job): Path<String>) -> ApiResult {
    match st.jobs.lock().unwrap().get(&job) {
        None => Err(ApiError::not_found("job")),
        Some(Job::Running(since)) => Ok(json_response(
            StatusCode::ACCEPTED,
            to_canonical(&json!({ "job": job, "status": "running", "elapsed_ms": since.elapsed().as_millis() as u64 })),
        )),
        Some(Job::Done(_, status, body)) => Ok(json_or_text(*status, body.clone())),
    }
}

/// Runs `work` on the blocking pool. Answers with its result if it finishes
/// within the synchronous wait, otherwise 202 with a poll URL.
async fn run_job<F>(st: &AppState, work: F) -> Response
where
    F: FnOnce() -> (StatusCode, String) + Send + 'static,
{
    let job = uuid::Uuid::new_v4().to_string();
    st.jobs.lock().unwrap().insert(job.clone(), Job::Running(Instant::now()));
    let (tx, rx) = oneshot::channel();
    let jobs = st.jobs.clone();
    let id = job.clone();
    tokio::spawn(async move {
        let (status, body) = tokio::task::spawn_blocking(work).await.unwrap_or_else(|e| {
            let err = ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string());
            (err.status, err.body())
        });
        jobs.lock().unwrap().insert(id, Job::Done(Instant::now(), status, body.clone()));
        let _ = tx.send((status, body));
    });
    match tokio::time::timeout(st.config.sync_wait, rx).await {
        Ok(Ok((status, body))) => {
            st.jobs.lock().unwrap().remove(&job);
            json_or_text(status, body)
        }
        _ => {
            let poll = format!("/v1/jobs/{job}");
            (
                StatusCode::ACCEPTED,
                [(header::CONTENT_TYPE, "application/json".to_string()), (header::LOCATION, poll.clone())],
                to_canonical(&json!({ "job": job, "status": "running", "poll": poll })),
            )
                .into_response()
        }
    }
}

fn json_or_text(status: StatusCode, body: String) -> Response {
    if body.trim_start().starts_with('{') || body.trim_start().starts_with('[') {
        json_response(status, body)
    } else {
        (status, [(header::CONTENT_TYPE, "text/plain; charset=utf-8")], body).into_response()
    }
}
