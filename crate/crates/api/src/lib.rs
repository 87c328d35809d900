//! HTTP/JSON service over the case-mix planning engine.
//!
//! Sessions hold a utility configuration and a history of solves. Each
//! session runs at most one solve at a time; solves run on a bounded pool of
//! blocking workers.

mod error;
mod session;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use casemix_core::engine::Engine;
use casemix_core::io::{UfConfig, UfEntry};
use casemix_core::sensitivity::SweepSpec;
use casemix_core::utility::{instantiate, UfTemplate};
use casemix_core::{Error, SolveRequest};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;
use tower_http::cors::CorsLayer;

pub use error::ApiError;
pub use session::{BusyGuard, HistoryEntry, Session, DEFAULT_SESSION};
use session::Store;

/// Samples in a utility preview unless the caller asks otherwise.
pub const PREVIEW_POINTS: usize = 200;
const MAX_PREVIEW_POINTS: usize = 10_000;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    engine: Engine,
    store: Store,
    workers: Semaphore,
}

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    /// Directory for session files; in-memory only when absent.
    pub persist_dir: Option<PathBuf>,
    /// Concurrent engine calls; one per logical core when absent.
    pub workers: Option<usize>,
}

impl AppState {
    pub fn new(engine: Engine, opts: ServiceOptions) -> std::io::Result<AppState> {
        let workers = opts
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1);
        let store = Store::open(opts.persist_dir, Engine::default_uf_config())?;
        Ok(AppState {
            inner: Arc::new(Inner {
                engine,
                store,
                workers: Semaphore::new(workers),
            }),
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.inner.engine
    }

    /// Marks a session as solving, as a solve request does.
    pub fn begin_solve(&self, id: &str) -> Result<BusyGuard, ApiError> {
        self.inner.store.begin_solve(id)
    }

    /// Runs `f` against the engine on a blocking worker.
    async fn run<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&Engine) -> Result<T, Error> + Send + 'static,
    {
        let _permit = self
            .inner
            .workers
            .acquire()
            .await
            .map_err(|_| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "shutting_down", "worker pool closed"))?;
        let state = self.clone();
        tokio::task::spawn_blocking(move || f(&state.inner.engine))
            .await
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
            .map_err(ApiError::from)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/api/instance", get(instance))
        .route("/api/templates", get(templates))
        .route("/api/preview", post(preview))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/uf-config", put(put_config).get(get_config))
        .route("/api/sessions/{id}/solve", post(solve))
        .route("/api/sessions/{id}/sweep", post(sweep))
        .route("/api/sessions/{id}/pareto-check", post(pareto_check))
        .route("/api/sessions/{id}/history", get(history))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}

/// Reads a request body as JSON; an empty body reads as `null`.
fn body_value(bytes: &Bytes) -> Result<Value, ApiError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(Value::Null);
    }
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request("/", format!("malformed JSON: {e}")))
}

/// Parses an optional body; empty or `null` gives the default.
fn optional_body<T: serde::de::DeserializeOwned + Default>(bytes: &Bytes) -> Result<T, ApiError> {
    match body_value(bytes)? {
        Value::Null => Ok(T::default()),
        v => parse_body(v),
    }
}

/// Parses a JSON body, reporting shape errors as 400 with a field path.
fn parse_body<T: serde::de::DeserializeOwned>(body: Value) -> Result<T, ApiError> {
    serde_path_to_error::deserialize(body).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." {
            "/".to_string()
        } else {
            format!("/{}", path.replace('.', "/").replace('[', "/").replace(']', ""))
        };
        ApiError::bad_request(&path, e.into_inner().to_string())
    })
}

async fn instance(State(st): State<AppState>) -> Json<Value> {
    let e = st.engine();
    let inst = e.instance();
    let count = |k| inst.resources.iter().filter(|r| r.kind == k).count();
    let beds = |k| -> u32 { inst.resources.iter().filter(|r| r.kind == k).map(|r| r.bed_count).sum() };
    use casemix_core::model::ResourceKind::*;
    Json(json!({
        "name": inst.name,
        "horizon_weeks": inst.horizon_weeks,
        "groups": inst.groups.iter().zip(e.bounds()).map(|(g, b)| json!({
            "id": g.id,
            "name": g.name,
            "subtypes": g.subtypes.iter().map(|s| &s.id).collect::<Vec<_>>(),
            "bound": b,
        })).collect::<Vec<_>>(),
        "resources": {
            "theatres": count(Theatre),
            "wards": count(Ward),
            "ward_beds": beds(Ward),
            "icu_beds": beds(Icu),
        },
        "bounds": e.bounds_table(),
        "total": e.bounds().iter().sum::<f64>(),
    }))
}

async fn templates() -> Json<Value> {
    Json(Value::Array(
        UfTemplate::ALL
            .iter()
            .map(|t| {
                json!({
                    "template": t,
                    "number": t.number(),
                    "description": t.description(),
                    "required": t.required_params(),
                    "optional": t.optional_params(),
                    "monotone": t.is_monotone(),
                })
            })
            .collect(),
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PreviewRequest {
    group: String,
    uf: UfEntry,
    #[serde(default)]
    points: Option<usize>,
    /// Extra abscissae to evaluate exactly.
    #[serde(default)]
    at: Vec<f64>,
}

#[derive(Serialize)]
struct PreviewResponse {
    group: String,
    bound: f64,
    points: Vec<[f64; 2]>,
    at: Vec<[f64; 2]>,
    breakpoints: Vec<f64>,
    jumps: Vec<[f64; 2]>,
    concave: bool,
}

/// Samples a group's utility for plotting.
async fn preview(State(st): State<AppState>, body: Bytes) -> Result<Json<PreviewResponse>, ApiError> {
    let req: PreviewRequest = parse_body(body_value(&body)?)?;
    let e = st.engine();
    let g = e
        .instance()
        .group_index(&req.group)
        .ok_or_else(|| ApiError::bad_request("/group", format!("unknown patient group {}", req.group)))?;
    let spec = req
        .uf
        .to_spec()
        .map_err(|(field, msg)| ApiError::bad_request(&format!("/uf/{field}"), msg))?;
    let bound = e.bounds()[g];
    let plf = instantiate(&spec, bound)
        .map_err(|err| ApiError::bad_request("/uf", format!("group {}: {err}", req.group)))?;
    let n = req.points.unwrap_or(PREVIEW_POINTS);
    if !(2..=MAX_PREVIEW_POINTS).contains(&n) {
        return Err(ApiError::bad_request("/points", format!("must be within 2..={MAX_PREVIEW_POINTS}")));
    }
    let mut at = Vec::with_capacity(req.at.len());
    for (i, &x) in req.at.iter().enumerate() {
        let u = plf
            .evaluate(x)
            .map_err(|err| ApiError::bad_request(&format!("/at/{i}"), err.to_string()))?;
        at.push([x, u]);
    }
    Ok(Json(PreviewResponse {
        group: req.group,
        bound,
        points: plf.sample(n).into_iter().map(|(x, u)| [x, u]).collect(),
        at,
        breakpoints: plf.breakpoints().to_vec(),
        jumps: plf.jumps().into_iter().map(|(x, h)| [x, h]).collect(),
        concave: plf.is_concave(),
    }))
}

fn summary(s: &Session) -> Value {
    json!({
        "id": s.id,
        "uf_config": s.uf_config,
        "solves": s.history.len(),
    })
}

/// Creates a session, optionally seeded with a configuration.
async fn create_session(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let config = match body_value(&body)? {
        Value::Null => Engine::default_uf_config(),
        v => validated_config(&st, v)?,
    };
    let s = st.inner.store.create(config)?;
    Ok((StatusCode::CREATED, Json(summary(&s))).into_response())
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let slot = st.inner.store.require(&id)?;
    let s = slot.session.lock().unwrap();
    Ok(Json(summary(&s)))
}

fn validated_config(st: &AppState, body: Value) -> Result<UfConfig, ApiError> {
    let cfg = UfConfig::from_value(body)?;
    let e = st.engine();
    cfg.resolve(e.instance(), e.bounds())?;
    Ok(cfg)
}

async fn put_config(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let cfg = validated_config(&st, body_value(&body)?)?;
    let s = st.inner.store.put_config(&id, cfg)?;
    Ok(Json(summary(&s)))
}

async fn get_config(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<UfConfig>, ApiError> {
    let slot = st.inner.store.require(&id)?;
    let cfg = slot.session.lock().unwrap().uf_config.clone();
    Ok(Json(cfg))
}

/// Solves with the session's configuration and appends the result to its history.
///
/// An empty ("zeroed") caseload is recorded but answered with 422.
async fn solve(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: SolveRequest = optional_body(&body)?;
    let _guard = st.begin_solve(&id)?;
    let cfg = st.inner.store.require(&id)?.session.lock().unwrap().uf_config.clone();
    let outcome = {
        let (cfg, req) = (cfg.clone(), req.clone());
        st.run(move |e| e.solve(Some(&cfg), &req)).await?
    };
    let index = st.inner.store.record(&id, cfg, req, outcome.clone())?;
    let mut body = serde_json::to_value(&outcome).expect("outcome serializes");
    body["history_index"] = json!(index);
    if outcome.result.zeroed {
        let err = ApiError {
            extra: Some(json!({ "zeroed": true, "result": body })),
            ..ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "zeroed",
                "the optimum treats no patients: no caseload raises the worst-off group's utility above its value at zero",
            )
        };
        return Ok(err.into_response());
    }
    Ok(Json(body).into_response())
}

#[derive(Deserialize)]
struct SweepBody {
    #[serde(flatten)]
    spec: SweepSpec,
    #[serde(default)]
    jobs: Option<usize>,
}

async fn sweep(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    st.inner.store.require(&id)?;
    let SweepBody { spec, jobs } = parse_body(body_value(&body)?)?;
    spec.validate()?;
    let report = st.run(move |e| e.sweep(&spec, jobs)).await?;
    Ok(Json(serde_json::to_value(report).expect("report serializes")))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ParetoBody {
    /// `"latest"` or a history index.
    #[serde(default)]
    which: Option<Value>,
    /// Audit the repaired caseload of that entry instead.
    #[serde(default)]
    repaired: bool,
}

async fn pareto_check(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: ParetoBody = optional_body(&body)?;
    let slot = st.inner.store.require(&id)?;
    let entry = {
        let s = slot.session.lock().unwrap();
        let index = match &req.which {
            None => s.history.len().checked_sub(1),
            Some(Value::String(w)) if w == "latest" => s.history.len().checked_sub(1),
            Some(Value::Number(n)) => n.as_u64().map(|i| i as usize),
            Some(_) => return Err(ApiError::bad_request("/which", "expected \"latest\" or an index")),
        };
        index
            .and_then(|i| s.history.get(i).cloned())
            .ok_or_else(|| ApiError::not_found(format!("session {id} has no such solve")))?
    };
    let result = if req.repaired {
        entry
            .outcome
            .repaired
            .clone()
            .ok_or_else(|| ApiError::bad_request("/repaired", "that solve has no repaired caseload"))?
    } else {
        entry.outcome.result.clone()
    };
    let base = result.patients();
    let report = st.run(move |e| e.pareto(&base)).await?;
    let mut body = serde_json::to_value(report).expect("report serializes");
    body["history_index"] = json!(entry.index);
    Ok(Json(body))
}

async fn history(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let slot = st.inner.store.require(&id)?;
    let s = slot.session.lock().unwrap();
    let rows: Vec<Value> = s
        .history
        .iter()
        .map(|h| {
            let r = &h.outcome.result;
            json!({
                "index": h.index,
                "method": r.method,
                "throughput": r.throughput,
                "sum_u": r.sum_u,
                "min_u": r.min_u,
                "zeroed": r.zeroed,
            })
        })
        .collect();
    Ok(Json(json!({ "id": s.id, "summary": rows, "entries": s.history })))
}
