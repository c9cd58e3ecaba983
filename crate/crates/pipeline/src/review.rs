//! Review store and its HTTP API.
//!
//! The store keeps records in memory behind a lock and appends every
//! applied decision to an audit log, fsynced before the in-memory state
//! changes. Reopening a store replays the log over the filtered records.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mmm_core::filter::FilterConfig;
use mmm_core::review::{
    apply_decision, paginate, AuditEntry, Page, RecordFilter, ReviewAction, ReviewDecision, ReviewError,
};
use mmm_core::{RecordStatus, Sample, TranslationRecord};
use serde::{Deserialize, Serialize};

use crate::corpus::{self, CorpusError};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Review(#[from] ReviewError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("audit log {path}: {message}")]
    Audit { path: PathBuf, message: String },
}

struct Inner {
    records: BTreeMap<String, TranslationRecord>,
    audit: Option<(PathBuf, File)>,
    next_seq: u64,
}

pub struct ReviewStore {
    inner: RwLock<Inner>,
    config: FilterConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewStats {
    pub total: usize,
    pub by_status: BTreeMap<String, usize>,
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub count: usize,
    pub ids: Vec<String>,
    pub audit_entries: u64,
}

impl ReviewStore {
    /// A store without an audit log; decisions are lost on drop.
    pub fn in_memory(records: Vec<TranslationRecord>, config: FilterConfig) -> Self {
        ReviewStore {
            inner: RwLock::new(Inner {
                records: records.into_iter().map(|r| (r.id.clone(), r)).collect(),
                audit: None,
                next_seq: 1,
            }),
            config,
        }
    }

    /// Loads `records` and replays the audit log at `audit_path`, creating
    /// it if absent.
    pub fn open(records: &Path, audit_path: &Path, config: FilterConfig) -> Result<Self, StoreError> {
        let mut map: BTreeMap<String, TranslationRecord> = corpus::read_records(records)?
            .into_iter()
            .map(|r| (r.id.clone(), r))
            .collect();
        let audit_err = |message: String| StoreError::Audit {
            path: audit_path.to_path_buf(),
            message,
        };
        let mut next_seq = 1;
        match File::open(audit_path) {
            Ok(file) => {
                for (i, line) in BufReader::new(file).lines().enumerate() {
                    let line = line.map_err(|e| audit_err(e.to_string()))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let at = |m: String| audit_err(format!("line {}: {m}", i + 1));
                    let entry: AuditEntry = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
                    let record = map
                        .get_mut(&entry.decision.record_id)
                        .ok_or_else(|| at(format!("unknown record {}", entry.decision.record_id)))?;
                    apply_decision(record, &entry.decision, &config).map_err(|e| at(e.to_string()))?;
                    if record.status != entry.status_after || record.revision != entry.revision_after {
                        return Err(at("replay diverged from the logged outcome".into()));
                    }
                    next_seq = entry.seq + 1;
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(audit_err(e.to_string())),
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(audit_path)
            .map_err(|e| audit_err(e.to_string()))?;
        Ok(ReviewStore {
            inner: RwLock::new(Inner {
                records: map,
                audit: Some((audit_path.to_path_buf(), file)),
                next_seq,
            }),
            config,
        })
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(|p| p.into_inner())
    }

    pub fn get(&self, id: &str) -> Option<TranslationRecord> {
        self.read().records.get(id).cloned()
    }

    pub fn list(&self, filter: &RecordFilter, page: usize, page_size: usize) -> Page<TranslationRecord> {
        paginate(self.read().records.values(), filter, page, page_size)
    }

    pub fn records(&self) -> Vec<TranslationRecord> {
        self.read().records.values().cloned().collect()
    }

    pub fn stats(&self) -> ReviewStats {
        let inner = self.read();
        let mut stats = ReviewStats {
            total: inner.records.len(),
            ..Default::default()
        };
        for r in inner.records.values() {
            *stats.by_status.entry(r.status.to_string()).or_default() += 1;
            stats.flagged += usize::from(r.flagged);
        }
        stats
    }

    /// Applies a decision. The audit entry reaches disk before the record
    /// changes in memory; on any error nothing changes.
    pub fn decide(&self, decision: &ReviewDecision) -> Result<(TranslationRecord, AuditEntry), StoreError> {
        let mut inner = self.inner.write().unwrap_or_else(|p| p.into_inner());
        let mut record = inner
            .records
            .get(&decision.record_id)
            .cloned()
            .ok_or_else(|| ReviewError::NotFound(decision.record_id.clone()))?;
        let mut entry = apply_decision(&mut record, decision, &self.config)?;
        entry.seq = inner.next_seq;
        entry.at = Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true));
        if let Some((path, file)) = inner.audit.as_mut() {
            let mut line = serde_json::to_string(&entry).expect("audit entry serializes");
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|()| file.sync_data())
                .map_err(|e| StoreError::Audit {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
        }
        inner.next_seq += 1;
        inner.records.insert(record.id.clone(), record.clone());
        Ok((record, entry))
    }

    /// Candidates of accepted and edited records, by id.
    pub fn accepted_samples(&self) -> Vec<Sample> {
        self.read()
            .records
            .values()
            .filter(|r| matches!(r.status, RecordStatus::Accepted | RecordStatus::Edited))
            .filter_map(|r| r.candidate.clone())
            .collect()
    }

    /// Writes the accepted corpus to `path` and a manifest beside it.
    pub fn export_accepted(&self, path: &Path) -> Result<ExportManifest, StoreError> {
        let samples = self.accepted_samples();
        corpus::write_corpus(&samples, path)?;
        let manifest = ExportManifest {
            count: samples.len(),
            ids: samples.iter().map(|s| s.id.clone()).collect(),
            audit_entries: self.read().next_seq - 1,
        };
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        json.push('\n');
        corpus::write_atomic(&manifest_path(path), json.as_bytes())?;
        Ok(manifest)
    }
}

pub fn manifest_path(export: &Path) -> PathBuf {
    let mut name = export.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

#[derive(Debug, Serialize)]
struct ApiError {
    code: &'static str,
    message: String,
    #[serde(skip)]
    status: StatusCode,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            status,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        use ReviewError::*;
        let message = e.to_string();
        let (status, code) = match e {
            StoreError::Review(NotFound(_)) => (StatusCode::NOT_FOUND, "not-found"),
            StoreError::Review(Conflict { .. }) => (StatusCode::CONFLICT, "revision-conflict"),
            StoreError::Review(NotPending { .. }) => (StatusCode::CONFLICT, "not-pending"),
            StoreError::Review(FailingVerdicts(_)) => (StatusCode::CONFLICT, "failing-verdicts"),
            StoreError::Review(MissingEdit | UnexpectedEdit | InvalidEdit(_) | Filter(_)) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid-decision")
            }
            StoreError::Corpus(_) | StoreError::Audit { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, message)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        let status = match e {
            JsonRejection::JsonDataError(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, "bad-request", e.body_text())
    }
}

#[derive(Debug, Default, Deserialize)]
struct ListQuery {
    status: Option<String>,
    dataset: Option<String>,
    language: Option<String>,
    page: Option<usize>,
    page_size: Option<usize>,
}

const MAX_PAGE_SIZE: usize = 500;

impl ListQuery {
    fn filter(&self) -> Result<RecordFilter, ApiError> {
        let bad = |e: mmm_core::dataset::UnknownIdentifier| {
            ApiError::new(StatusCode::BAD_REQUEST, "bad-request", e.to_string())
        };
        // Without a status the listing is the review queue.
        let status = match self.status.as_deref() {
            None | Some("") | Some("pending") => Some(RecordStatus::PendingReview),
            Some("all") => None,
            Some(s) => Some(s.parse().map_err(bad)?),
        };
        Ok(RecordFilter {
            status,
            dataset: self
                .dataset
                .as_deref()
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .transpose()
                .map_err(bad)?,
            language: self
                .language
                .as_deref()
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .transpose()
                .map_err(bad)?,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionBody {
    #[serde(default)]
    record_id: Option<String>,
    action: ReviewAction,
    #[serde(default)]
    edited: Option<Sample>,
    reviewer: String,
    expected_revision: u64,
}

#[derive(Debug, Serialize)]
struct DecisionResponse {
    record: TranslationRecord,
    audit: AuditEntry,
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

type Shared = Arc<ReviewStore>;

async fn list_records(
    State(store): State<Shared>,
    query: Result<Query<ListQuery>, QueryRejection>,
) -> Result<Json<Page<TranslationRecord>>, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad-request", e.body_text()))?;
    let filter = q.filter()?;
    let page_size = q.page_size.unwrap_or(50);
    if page_size == 0 || page_size > MAX_PAGE_SIZE {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad-request",
            format!("page_size must be between 1 and {MAX_PAGE_SIZE}"),
        ));
    }
    Ok(Json(store.list(&filter, q.page.unwrap_or(1), page_size)))
}

async fn get_record(
    State(store): State<Shared>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<TranslationRecord>, ApiError> {
    store
        .get(&id)
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not-found", format!("record {id} not found")))
}

async fn post_decision(
    State(store): State<Shared>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<DecisionBody>, JsonRejection>,
) -> Result<Json<DecisionResponse>, ApiError> {
    let Json(body) = body?;
    if body.record_id.as_ref().is_some_and(|r| *r != id) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad-request",
            "record_id in the body does not match the URL",
        ));
    }
    if body.reviewer.trim().is_empty() {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid-decision",
            "reviewer is required",
        ));
    }
    let decision = ReviewDecision {
        record_id: id,
        action: body.action,
        edited: body.edited,
        reviewer: body.reviewer,
        expected_revision: body.expected_revision,
    };
    let (record, audit) = tokio::task::spawn_blocking(move || store.decide(&decision))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(DecisionResponse { record, audit }))
}

async fn export(State(store): State<Shared>, Query(q): Query<ExportQuery>) -> Result<Response, ApiError> {
    match q.format.as_deref() {
        None | Some("jsonl") => {}
        Some(other) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "bad-request",
                format!("unsupported export format {other:?}"),
            ))
        }
    }
    let body = corpus::to_jsonl(&store.accepted_samples());
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn stats(State(store): State<Shared>) -> Json<ReviewStats> {
    Json(store.stats())
}

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/api/records", get(list_records))
        .route("/api/records/{id}", get(get_record))
        .route("/api/records/{id}/decision", post(post_decision))
        .route("/api/export", get(export))
        .route("/api/stats", get(stats))
        .with_state(store)
}

/// Serves the API until Ctrl-C.
pub async fn serve(store: Shared, addr: SocketAddr) -> io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "review service listening");
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
