//! `/v1` handlers and their JSON shapes.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use serde_json::json;

use taxnext_core::eventlog::{Diagnosis, LogStats, END};
use taxnext_core::predictor::{self, Mode, PredictError, PredictOptions};
use taxnext_core::similarity::{SimilarityBreakdown, Variant};
use taxnext_core::taxonomy::TaxonomyError;

use crate::state::AppState;

type Shared = State<Arc<AppState>>;

pub fn routes() -> Router<Arc<AppState>> {
    Router::new()
        .route("/predict", post(predict))
        .route("/logs", get(list_logs))
        .route("/logs/{id}/stats", get(log_stats))
        .route("/taxonomies", get(list_taxonomies))
        .route("/taxonomy/{tax_id}/code/{code}", get(lookup_code))
        .route("/taxonomy/{tax_id}/search", get(search_codes))
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": error, "message": message.into() }),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(error: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, error, message)
    }

    fn unknown_code(code: &str) -> Self {
        Self {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: json!({ "error": "unknown_code", "code": code }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, json_body(&self.body)).into_response()
    }
}

impl From<PredictError> for ApiError {
    fn from(e: PredictError) -> Self {
        match e {
            PredictError::Taxonomy(TaxonomyError::UnknownConcept { code, .. }) => Self::unknown_code(&code),
            PredictError::InvalidN | PredictError::EmptyQuery | PredictError::EmptyDiagnoses => {
                Self::bad_request(e.to_string())
            }
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

/// Serialized with serde_json's shortest round-trip float formatting, so
/// every f64 survives the wire exactly.
fn json_body<T: Serialize>(value: &T) -> Response {
    match serde_json::to_vec(value) {
        Ok(bytes) => ([(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    pub log_id: String,
    pub diagnoses: Vec<Diagnosis>,
    pub events: Vec<String>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub variant: Option<Variant>,
    /// Supporters per candidate that get a full breakdown.
    #[serde(default)]
    pub top_k: Option<usize>,
    /// Restrict score aggregation to this many best-ranked cases.
    #[serde(default)]
    pub neighbors: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub log_id: String,
    pub query_fingerprint: String,
    pub variant: Variant,
    pub mode: Mode,
    pub n: usize,
    pub pool_size: usize,
    pub candidates: Vec<CandidateOut>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateOut {
    pub rank: usize,
    pub activity: String,
    pub description: Option<String>,
    pub score: f64,
    pub n_supporters: usize,
    /// The best `top_k` supporters, each with its full breakdown.
    pub supporting_cases: Vec<SupporterOut>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupporterOut {
    pub case_id: String,
    #[serde(flatten)]
    pub breakdown: SimilarityBreakdown,
}

async fn predict(State(state): Shared, body: Bytes) -> Result<Response, ApiError> {
    let req: PredictRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_body", e.to_string()))?;
    let out = tokio::task::spawn_blocking(move || run_predict(&state, req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(json_body(&out))
}

pub fn run_predict(state: &AppState, req: PredictRequest) -> Result<PredictResponse, ApiError> {
    let loaded = state
        .log(&req.log_id)
        .ok_or_else(|| ApiError::not_found("unknown_log", format!("log {:?} is not loaded", req.log_id)))?;
    let d = state.defaults;
    let variant = req.variant.unwrap_or(d.variant);
    let opts = PredictOptions {
        n: req.n.unwrap_or(d.n),
        mode: req.mode.unwrap_or(d.mode),
        neighbors: req.neighbors,
    };
    if opts.neighbors == Some(0) {
        return Err(ApiError::bad_request("neighbors must be at least 1"));
    }
    let top_k = req.top_k.unwrap_or(d.top_k);
    let p = loaded.predictor(variant);
    let query = predictor::Query {
        diagnoses: req.diagnoses,
        events: req.events,
    };
    let resolved = p.resolve(&query)?;
    let result = p.predict(&query, &opts, None)?;
    let procedures = p.taxonomies().procedures;
    let mut candidates = Vec::with_capacity(result.candidates.len());
    for (i, c) in result.candidates.into_iter().enumerate() {
        let description = if c.activity == END {
            None
        } else {
            procedures
                .node(&c.activity)
                .ok()
                .and_then(|n| procedures.description(n))
                .map(str::to_string)
        };
        let mut supporting_cases = Vec::with_capacity(top_k.min(c.supporting_cases.len()));
        for s in c.supporting_cases.iter().take(top_k) {
            let idx = p
                .case_index(&s.case_id)
                .ok_or_else(|| PredictError::UnknownCase(s.case_id.clone()))?;
            supporting_cases.push(SupporterOut {
                case_id: s.case_id.clone(),
                breakdown: p.explain(&resolved, idx)?,
            });
        }
        candidates.push(CandidateOut {
            rank: i + 1,
            activity: c.activity,
            description,
            score: c.score,
            n_supporters: c.supporting_cases.len(),
            supporting_cases,
        });
    }
    Ok(PredictResponse {
        log_id: req.log_id,
        query_fingerprint: result.query_fingerprint,
        variant,
        mode: result.mode,
        n: opts.n,
        pool_size: result.pool_size,
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSummary {
    pub id: String,
    pub diagnosis_taxonomy: String,
    pub procedure_taxonomy: String,
    pub n_cases: usize,
}

async fn list_logs(State(state): Shared) -> Response {
    let logs: Vec<LogSummary> = state
        .logs()
        .map(|l| LogSummary {
            id: l.log.id.clone(),
            diagnosis_taxonomy: l.log.diagnosis_taxonomy.clone(),
            procedure_taxonomy: l.log.procedure_taxonomy.clone(),
            n_cases: l.log.cases.len(),
        })
        .collect();
    json_body(&logs)
}

async fn log_stats(State(state): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    let loaded = state
        .log(&id)
        .ok_or_else(|| ApiError::not_found("unknown_log", format!("log {id:?} is not loaded")))?;
    let stats: &LogStats = &loaded.stats;
    Ok(json_body(stats))
}

async fn list_taxonomies(State(state): Shared) -> Response {
    let list: Vec<serde_json::Value> = state
        .taxonomies()
        .map(|t| json!({ "id": t.id(), "root": t.code(t.root()), "n_concepts": t.len() }))
        .collect();
    json_body(&list)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeInfo {
    pub code: String,
    pub description: Option<String>,
    /// Proper ancestors, most specific first, ending at the root.
    pub ancestors: Vec<String>,
    pub ic: f64,
}

async fn lookup_code(State(state): Shared, Path((tax_id, code)): Path<(String, String)>) -> Result<Response, ApiError> {
    let t = state
        .taxonomy(&tax_id)
        .ok_or_else(|| ApiError::not_found("unknown_taxonomy", format!("taxonomy {tax_id:?} is not loaded")))?;
    let node = t
        .node(&code)
        .map_err(|_| ApiError::not_found("unknown_code", format!("{code:?} is not in taxonomy {tax_id:?}")))?;
    Ok(json_body(&CodeInfo {
        code: t.code(node).to_string(),
        description: t.description(node).map(str::to_string),
        ancestors: t.ancestor_chain(node).into_iter().map(|a| t.code(a).to_string()).collect(),
        ic: t.ic(node),
    }))
}

#[derive(Debug, Deserialize)]
struct SearchParams {
    #[serde(default)]
    prefix: String,
    #[serde(default = "default_limit")]
    limit: usize,
}

fn default_limit() -> usize {
    20
}

/// Codes starting with `prefix` in code order, for typeahead.
async fn search_codes(
    State(state): Shared,
    Path(tax_id): Path<String>,
    Query(params): Query<SearchParams>,
) -> Result<Response, ApiError> {
    let t = state
        .taxonomy(&tax_id)
        .ok_or_else(|| ApiError::not_found("unknown_taxonomy", format!("taxonomy {tax_id:?} is not loaded")))?;
    let mut hits: Vec<_> = t.nodes().filter(|&n| t.code(n).starts_with(&params.prefix)).collect();
    hits.sort_by(|&a, &b| t.code(a).cmp(t.code(b)));
    let out: Vec<serde_json::Value> = hits
        .into_iter()
        .take(params.limit.min(1000))
        .map(|n| json!({ "code": t.code(n), "description": t.description(n) }))
        .collect();
    Ok(json_body(&out))
}
