//! Session-oriented HTTP API.
//!
//! Each session owns an instance, an optional active plan and, once a plan
//! exists, an execution state that events advance. Mutating requests on one
//! session are serialized; a second one arriving while the first is running
//! gets `409`. Solves whose timeout exceeds
//! [`ServiceConfig::async_threshold`] return `202` and finish in the
//! background; poll `GET /sessions/{id}` for the result.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

use crate::dynamic::{DynamicError, DynamicPolicy, Event, ExecutionState};
use crate::explain::{answer, ExplainError, ExplainOptions, Query};
use crate::io::{check_transits, from_json, FormatError};
use crate::model::{Instance, Plan};
use crate::solver::{solve_decision, solve_optimal, Budget, Relaxation, SolveResult, SolverError};
use crate::validate::validate;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Where `POST /sessions/{id}/snapshot` writes; snapshots are refused
    /// when unset.
    pub snapshot_dir: Option<PathBuf>,
    pub default_timeout: Duration,
    /// Solves allowed to run longer than this are answered with `202`.
    pub async_threshold: Duration,
    pub policy: DynamicPolicy,
    /// Allowed CORS origin; any origin when unset.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            snapshot_dir: None,
            default_timeout: Duration::from_secs(60),
            async_threshold: Duration::from_secs(10),
            policy: DynamicPolicy::default(),
            cors_origin: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct HistoryEntry {
    op: &'static str,
    request: Value,
    status: u16,
    response: Value,
}

#[derive(Debug)]
struct SessionData {
    instance: Instance,
    plan: Option<Plan>,
    exec: Option<ExecutionState>,
    last_solve: Option<Value>,
    history: Vec<HistoryEntry>,
}

impl SessionData {
    fn adopt_plan(&mut self, plan: Plan) {
        self.exec = ExecutionState::new(self.instance.clone(), plan.clone()).ok();
        self.plan = Some(plan);
    }
}

#[derive(Debug)]
struct Session {
    busy: AtomicBool,
    data: Mutex<SessionData>,
}

impl Session {
    fn data(&self) -> MutexGuard<'_, SessionData> {
        self.data.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Clears the session's busy flag when dropped.
struct BusyGuard(Arc<Session>);

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::Release);
    }
}

struct AppState {
    config: ServiceConfig,
    sessions: Mutex<BTreeMap<String, Arc<Session>>>,
}

type Shared = Arc<AppState>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    detail: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            detail: None,
        }
    }

    fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    fn body(&self) -> Value {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Some(d) = &self.detail {
            error["detail"] = d.clone();
        }
        json!({ "error": error })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

impl From<FormatError> for ApiError {
    fn from(e: FormatError) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "schema", e.to_string()).with_detail(json!({ "path": e.path() }))
    }
}

impl From<SolverError> for ApiError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Timeout => timeout(),
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "precondition", other.to_string()),
        }
    }
}

impl From<DynamicError> for ApiError {
    fn from(e: DynamicError) -> Self {
        let status = StatusCode::UNPROCESSABLE_ENTITY;
        match e {
            DynamicError::Timeout => timeout(),
            DynamicError::Unsat => ApiError::new(status, "unsat", e.to_string()),
            DynamicError::Occupied(ref v) => {
                let detail = serde_json::to_value(v).expect("violations serialize");
                ApiError::new(status, "event_rejected", e.to_string()).with_detail(detail)
            }
            DynamicError::InvalidPlan(ref report) => {
                let detail = serde_json::to_value(report).expect("reports serialize");
                ApiError::new(status, "precondition", e.to_string()).with_detail(detail)
            }
            _ => ApiError::new(status, "event_rejected", e.to_string()),
        }
    }
}

impl From<ExplainError> for ApiError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::Timeout | ExplainError::Solver(SolverError::Timeout) => timeout(),
            ExplainError::PlanInfeasible(ref report) => {
                let detail = serde_json::to_value(report).expect("reports serialize");
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "precondition", e.to_string()).with_detail(detail)
            }
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "precondition", other.to_string()),
        }
    }
}

fn timeout() -> ApiError {
    ApiError::new(StatusCode::GATEWAY_TIMEOUT, "timeout", "solver budget exhausted")
}

fn not_found(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no session `{id}`"))
}

fn session(state: &AppState, id: &str) -> Result<Arc<Session>, ApiError> {
    let sessions = state.sessions.lock().unwrap_or_else(|e| e.into_inner());
    sessions.get(id).cloned().ok_or_else(|| not_found(id))
}

fn claim(state: &AppState, id: &str) -> Result<BusyGuard, ApiError> {
    let s = session(state, id)?;
    if s.busy
        .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
        .is_err()
    {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "busy",
            format!("session `{id}` is processing another request"),
        ));
    }
    Ok(BusyGuard(s))
}

fn budget(config: &ServiceConfig, seconds: Option<f64>) -> Result<(Duration, Budget), ApiError> {
    let limit = match seconds {
        Some(s) if s.is_finite() && s > 0.0 => Duration::from_secs_f64(s),
        Some(_) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "schema",
                "$.timeout: must be a positive number of seconds",
            ))
        }
        None => config.default_timeout,
    };
    Ok((limit, Budget::with_timeout(limit)))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("solver task panicked")
}

/// JSON body of a solve answer, shared with the CLI.
pub fn solve_json(result: &SolveResult) -> Value {
    let status = match result.outcome {
        crate::solver::SolveOutcome::Sat(_) => "sat",
        crate::solver::SolveOutcome::Unsat => "unsat",
        crate::solver::SolveOutcome::Timeout => "timeout",
    };
    let mut out = json!({ "status": status, "stats": result.stats });
    if let Some(plan) = result.plan() {
        out["plan"] = serde_json::to_value(plan).expect("plans serialize");
        out["objectives"] = serde_json::to_value(plan.objective_values()).expect("objectives serialize");
    }
    out
}

fn record(s: &Session, op: &'static str, request: Value, status: StatusCode, response: &Value) {
    s.data().history.push(HistoryEntry {
        op,
        request,
        status: status.as_u16(),
        response: response.clone(),
    });
}

fn finish(s: &Session, op: &'static str, request: Value, result: Result<Value, ApiError>) -> Response {
    let (status, body) = match result {
        Ok(body) => (StatusCode::OK, body),
        Err(e) => (e.status, e.body()),
    };
    record(s, op, request, status, &body);
    (status, Json(body)).into_response()
}

fn parse_body(body: &Bytes) -> Result<Value, ApiError> {
    if body.is_empty() {
        return Ok(json!({}));
    }
    Ok(from_json::<Value>(body)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    instance: Instance,
    #[serde(default)]
    plan: Option<Value>,
}

async fn create(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = from_json(&body)?;
    let mut data = SessionData {
        instance: req.instance,
        plan: None,
        exec: None,
        last_solve: None,
        history: Vec::new(),
    };
    if let Some(plan) = req.plan {
        let plan: Plan = serde_json::from_value(plan).map_err(|e| FormatError::schema("$.plan", e.to_string()))?;
        check_transits(&plan, data.instance.graph())?;
        let report = validate(&data.instance, &plan);
        if !report.feasible {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "precondition",
                "the plan is not feasible",
            )
            .with_detail(serde_json::to_value(report).expect("reports serialize")));
        }
        data.adopt_plan(plan);
    }
    let session = Arc::new(Session {
        busy: AtomicBool::new(false),
        data: Mutex::new(data),
    });
    let mut sessions = state.sessions.lock().unwrap_or_else(|e| e.into_inner());
    let id = loop {
        let candidate = format!("{:016x}", rand::random::<u64>());
        if !sessions.contains_key(&candidate) {
            break candidate;
        }
    };
    sessions.insert(id.clone(), session);
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))).into_response())
}

fn session_view(id: &str, s: &Session) -> Value {
    let d = s.data();
    let mut out = json!({
        "session_id": id,
        "busy": s.busy.load(Ordering::Acquire),
        "instance": d.instance,
        "t_now": d.exec.as_ref().map_or(0, ExecutionState::t_now),
        "history": d.history,
    });
    if let Some(p) = &d.plan {
        out["plan"] = serde_json::to_value(p).expect("plans serialize");
    }
    if let Some(solve) = &d.last_solve {
        out["last_solve"] = solve.clone();
    }
    out
}

async fn get_session(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let s = session(&state, &id)?;
    Ok(Json(session_view(&id, &s)))
}

async fn delete_session(State(state): State<Shared>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    let mut sessions = state.sessions.lock().unwrap_or_else(|e| e.into_inner());
    sessions
        .remove(&id)
        .map(|_| StatusCode::NO_CONTENT)
        .ok_or_else(|| not_found(&id))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveRequest {
    #[serde(default)]
    timeout: Option<f64>,
    #[serde(default)]
    makespan: Option<u32>,
}

fn run_solve(instance: &Instance, makespan: Option<u32>, budget: &Budget) -> Result<SolveResult, SolverError> {
    match makespan {
        Some(h) => solve_decision(instance, h, &Relaxation::none(), budget),
        None => Ok(solve_optimal(instance, &Relaxation::none(), budget)),
    }
}

fn store_solve(s: &Session, result: &Result<SolveResult, SolverError>) -> Result<Value, ApiError> {
    let result = result.as_ref().map_err(|e| ApiError::from(e.clone()))?;
    let body = solve_json(result);
    let mut d = s.data();
    d.last_solve = Some(body.clone());
    if let Some(plan) = result.plan() {
        d.adopt_plan(plan.clone());
    }
    drop(d);
    if result.outcome == crate::solver::SolveOutcome::Timeout {
        return Err(timeout().with_detail(body));
    }
    Ok(body)
}

async fn solve(State(state): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let guard = claim(&state, &id)?;
    let request = parse_body(&body)?;
    let raw: &[u8] = if body.is_empty() { b"{}" } else { &body };
    let req: SolveRequest = from_json(raw)?;
    let (limit, budget) = budget(&state.config, req.timeout)?;
    let instance = guard.0.data().instance.clone();

    if limit > state.config.async_threshold {
        guard.0.data().last_solve = Some(json!({ "status": "running" }));
        tokio::task::spawn_blocking(move || {
            let result = run_solve(&instance, req.makespan, &budget);
            let response = store_solve(&guard.0, &result);
            let (status, body) = match response {
                Ok(b) => (StatusCode::OK, b),
                Err(e) => (e.status, e.body()),
            };
            record(&guard.0, "solve", request, status, &body);
            drop(guard);
        });
        return Ok((StatusCode::ACCEPTED, Json(json!({ "status": "running" }))).into_response());
    }

    let result = blocking(move || run_solve(&instance, req.makespan, &budget)).await;
    let response = store_solve(&guard.0, &result);
    Ok(finish(&guard.0, "solve", request, response))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ValidateRequest {
    plan: Value,
}

async fn validate_plan(State(state): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let guard = claim(&state, &id)?;
    let request = parse_body(&body)?;
    let req: ValidateRequest = from_json(&body)?;
    let instance = guard.0.data().instance.clone();
    let result = (|| {
        let plan: Plan = serde_json::from_value(req.plan).map_err(|e| FormatError::schema("$.plan", e.to_string()))?;
        check_transits(&plan, instance.graph())?;
        let report = validate(&instance, &plan);
        let mut body = serde_json::to_value(&report).expect("reports serialize");
        body["categories"] = json!(crate::validate::categorize(&report));
        Ok(body)
    })();
    Ok(finish(&guard.0, "validate", request, result))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRequest {
    #[serde(default)]
    event: Option<Event>,
    #[serde(default)]
    events: Vec<Event>,
    #[serde(default)]
    policy: Option<DynamicPolicy>,
    #[serde(default)]
    timeout: Option<f64>,
}

async fn event(State(state): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let guard = claim(&state, &id)?;
    let request = parse_body(&body)?;
    let req: EventRequest = from_json(&body)?;
    let events: Vec<Event> = req.event.into_iter().chain(req.events).collect();
    if events.is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "schema",
            "$: `event` or `events` is required",
        ));
    }
    let Some(exec) = guard.0.data().exec.clone() else {
        let e = ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "precondition",
            "the session has no plan to execute",
        );
        return Ok(finish(&guard.0, "event", request, Err(e)));
    };
    let policy = req.policy.unwrap_or(state.config.policy);
    let (_, budget) = budget(&state.config, req.timeout)?;

    let outcome = blocking(move || -> Result<(ExecutionState, Value), DynamicError> {
        let mut next = exec;
        for e in &events {
            next = next.apply_event(e)?;
        }
        let result = next.resolve(&policy, &budget)?;
        next.commit(&result);
        let body = serde_json::to_value(&result).expect("results serialize");
        Ok((next, body))
    })
    .await;

    let response = outcome.map_err(ApiError::from).map(|(next, body)| {
        let mut d = guard.0.data();
        d.instance = next.instance().clone();
        d.plan = Some(next.active_plan().clone());
        d.exec = Some(next);
        body
    });
    Ok(finish(&guard.0, "event", request, response))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryRequest {
    query: Query,
    #[serde(default)]
    timeout: Option<f64>,
}

async fn query(State(state): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let guard = claim(&state, &id)?;
    let request = parse_body(&body)?;
    let req: QueryRequest = from_json(&body)?;
    let (_, budget) = budget(&state.config, req.timeout)?;
    let (instance, plan) = {
        let d = guard.0.data();
        (d.instance.clone(), d.plan.clone())
    };
    let options = ExplainOptions {
        delta_max: state.config.policy.delta_max,
        budget,
    };
    let q = req.query.clone();
    let result = blocking(move || answer(&instance, plan.as_ref(), &q, &options)).await;
    let response = result.map_err(ApiError::from).map(|mut list| {
        if matches!(req.query, Query::WhyInfeasible) {
            serde_json::to_value(&list).expect("explanations serialize")
        } else {
            serde_json::to_value(list.remove(0)).expect("explanations serialize")
        }
    });
    Ok(finish(&guard.0, "query", request, response))
}

async fn snapshot(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let Some(dir) = state.config.snapshot_dir.clone() else {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "precondition",
            "snapshots are not enabled on this server",
        ));
    };
    let s = session(&state, &id)?;
    // Session ids are generated hex strings, so they are safe file names.
    let path = dir.join(format!("{id}.json"));
    let text = crate::io::to_canonical_json(&session_view(&id, &s));
    let target = path.clone();
    blocking(move || std::fs::write(target, text)).await.map_err(|e| {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "io",
            format!("writing snapshot: {e}"),
        )
    })?;
    Ok(Json(json!({ "path": path })))
}

pub fn router(config: ServiceConfig) -> Router {
    let cors = match &config.cors_origin {
        Some(origin) => match origin.parse::<axum::http::HeaderValue>() {
            Ok(o) => CorsLayer::new()
                .allow_origin(o)
                .allow_methods(tower_http::cors::Any)
                .allow_headers(tower_http::cors::Any),
            Err(_) => CorsLayer::permissive(),
        },
        None => CorsLayer::permissive(),
    };
    let state = Arc::new(AppState {
        config,
        sessions: Mutex::new(BTreeMap::new()),
    });
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/solve", post(solve))
        .route("/sessions/{id}/validate", post(validate_plan))
        .route("/sessions/{id}/event", post(event))
        .route("/sessions/{id}/query", post(query))
        .route("/sessions/{id}/snapshot", post(snapshot))
        .layer(cors)
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
