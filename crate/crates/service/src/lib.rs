//! HTTP service that hands annotation tasks to annotator slots and records
//! their judgments in a durable per-project log.
//!
//! Layout under the data directory:
//!
//! ```text
//! projects/<id>/project.json     the posted project definition
//! projects/<id>/judgments.jsonl  append-only judgment log
//! ```

mod error;
mod project;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use faithkit_core::{Judgment, JudgmentStore};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

pub use error::{ApiError, ErrorBody};
pub use project::{
    HintView, NextTask, Position, Progress, Project, ProjectSpec, SlotProgress, TaskView, COARSE_INSTRUCTIONS,
    FINE_INSTRUCTIONS,
};

pub const TOKEN_HEADER: &str = "x-slot-token";

struct ProjectHandle {
    project: Project,
    store: JudgmentStore,
}

/// Shared service state: loaded projects and where they live on disk.
pub struct AppState {
    data_dir: Option<PathBuf>,
    projects: RwLock<HashMap<String, Arc<ProjectHandle>>>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::io::Write;
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    std::fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent() {
        std::fs::File::open(dir)?.sync_all()?;
    }
    Ok(())
}

impl AppState {
    /// State kept only in memory; used by tests.
    pub fn in_memory() -> Self {
        AppState {
            data_dir: None,
            projects: RwLock::new(HashMap::new()),
        }
    }

    /// Loads every project found under `data_dir/projects`, replaying logs.
    pub fn open(data_dir: &Path) -> Result<Self, ApiError> {
        let root = data_dir.join("projects");
        std::fs::create_dir_all(&root)?;
        let mut projects = HashMap::new();
        for entry in std::fs::read_dir(&root)? {
            let dir = entry?.path();
            let spec_path = dir.join("project.json");
            if !spec_path.is_file() {
                continue;
            }
            let spec: ProjectSpec = serde_json::from_slice(&std::fs::read(&spec_path)?)
                .map_err(|e| ApiError::InvalidProject(format!("{}: {e}", spec_path.display())))?;
            let project = Project::new(spec)?;
            let store = JudgmentStore::open(&dir.join("judgments.jsonl"))?;
            tracing::info!(project = project.id(), records = store.len(), "loaded project");
            projects.insert(project.id().to_string(), Arc::new(ProjectHandle { project, store }));
        }
        Ok(AppState {
            data_dir: Some(data_dir.to_path_buf()),
            projects: RwLock::new(projects),
        })
    }

    fn get(&self, id: &str) -> Result<Arc<ProjectHandle>, ApiError> {
        self.projects
            .read()
            .expect("project map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownProject(id.to_string()))
    }

    fn create(&self, spec: ProjectSpec) -> Result<Created, ApiError> {
        let project = Project::new(spec)?;
        let id = project.id().to_string();
        let mut projects = self.projects.write().expect("project map poisoned");
        if projects.contains_key(&id) {
            return Err(ApiError::ProjectExists(id));
        }
        let store = match &self.data_dir {
            Some(root) => {
                let dir = root.join("projects").join(&id);
                std::fs::create_dir_all(&dir)?;
                let bytes = serde_json::to_vec_pretty(&project.spec).map_err(std::io::Error::from)?;
                write_atomic(&dir.join("project.json"), &bytes)?;
                JudgmentStore::open(&dir.join("judgments.jsonl"))?
            }
            None => JudgmentStore::in_memory(),
        };
        let created = Created {
            project_id: id.clone(),
            slots: project.progress(&[]).slots.iter().map(|s| s.annotator_slot).collect(),
            n_assignments: project.spec.assignments.len(),
        };
        projects.insert(id, Arc::new(ProjectHandle { project, store }));
        Ok(created)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub project_id: String,
    pub slots: Vec<usize>,
    pub n_assignments: usize,
}

#[derive(Debug, Deserialize)]
struct SlotQuery {
    slot: usize,
    #[serde(default)]
    token: Option<String>,
}

/// Judgment payload; `supersedes` names the record a correction replaces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Submission {
    #[serde(flatten)]
    pub judgment: Judgment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ack {
    pub seq: u64,
    pub received_at: DateTime<Utc>,
    pub store_size: usize,
}

fn token<'a>(headers: &'a HeaderMap, query: Option<&'a str>) -> Option<&'a str> {
    headers
        .get(TOKEN_HEADER)
        .and_then(|v| v.to_str().ok())
        .or(query)
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(x)| x)
        .map_err(|e| ApiError::BadRequest(e.body_text()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Io(std::io::Error::other(e)))?
}

async fn create_project(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<ProjectSpec>, JsonRejection>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let spec = body(payload)?;
    let created = blocking(move || state.create(spec)).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn next_task(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<SlotQuery>,
    headers: HeaderMap,
) -> Result<Json<NextTask>, ApiError> {
    let handle = state.get(&id)?;
    let project = &handle.project;
    project.check_slot(q.slot, token(&headers, q.token.as_deref()))?;
    let next = match project.next_open(q.slot, |k| handle.store.contains(k)) {
        Some(task) => NextTask::Task(Box::new(project.view(task))),
        None => NextTask::Done {
            project_id: id,
            annotator_slot: q.slot,
        },
    };
    Ok(Json(next))
}

async fn submit(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    payload: Result<Json<Submission>, JsonRejection>,
) -> Result<(StatusCode, Json<Ack>), ApiError> {
    let Submission {
        mut judgment,
        supersedes,
    } = body(payload)?;
    let handle = state.get(&id)?;
    handle
        .project
        .check_slot(judgment.annotator_slot(), token(&headers, None))?;
    handle.project.admit(&mut judgment)?;
    let ack = blocking(move || {
        let record = handle.store.append(judgment, supersedes)?;
        Ok(Ack {
            seq: record.seq,
            received_at: record.received_at,
            store_size: handle.store.len(),
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(ack)))
}

async fn progress(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Progress>, ApiError> {
    let handle = state.get(&id)?;
    Ok(Json(handle.project.progress(&handle.store.effective())))
}

/// Every log record as JSONL, in append order.
async fn export(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<impl IntoResponse, ApiError> {
    let handle = state.get(&id)?;
    let mut out = Vec::new();
    for record in handle.store.records() {
        serde_json::to_writer(&mut out, &record).map_err(std::io::Error::from)?;
        out.push(b'\n');
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], out))
}

/// API routes, plus the UI bundle from `static_dir` when given.
pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/projects", post(create_project))
        .route("/projects/{id}/tasks/next", get(next_task))
        .route("/projects/{id}/judgments", post(submit))
        .route("/projects/{id}/progress", get(progress))
        .route("/projects/{id}/export", get(export))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    pub data_dir: PathBuf,
    pub static_dir: Option<PathBuf>,
}

/// Runs until ctrl-c. `on_ready` receives the bound address once the
/// listener is up (useful with port 0).
pub async fn serve(config: ServeConfig, on_ready: impl FnOnce(SocketAddr)) -> Result<(), ApiError> {
    let data_dir = config.data_dir.clone();
    let state = Arc::new(blocking(move || AppState::open(&data_dir)).await?);
    let app = router(state, config.static_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    let addr = listener.local_addr()?;
    tracing::info!(%addr, "listening");
    on_ready(addr);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
