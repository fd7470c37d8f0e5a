//! HTTP API for the study runner.
//!
//! | route | body |
//! |---|---|
//! | `GET /api/plan/{participant}` | plan without answers |
//! | `GET /api/trial/{trial_id}/scene` | trial question, scene manifest, mesh URLs, probe markers |
//! | `POST /api/trial/{trial_id}/response` | `TrialResponse` in, stored log record out |
//! | `GET /api/summary` | `AnalyticsSummary` over the current log |
//! | `GET /scenes/...` | scene manifests and `.glb` meshes |
//! | `GET /...` | runner static files |

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use anyhow::Result;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use surfgraph::analytics::{summarize, AnalyticsSummary};
use surfgraph::export::{read_scene, SceneManifest, MANIFEST_FILE};
use surfgraph::layout::{LayoutParams, Technique, DEFAULT_BANDS};
use surfgraph::protocol::{PublicPlan, PublicTrial};
use surfgraph::raster::Dataset;
use surfgraph::responses::{LogRecord, PlanStore, ResponseLog, StudyError, TrialResponse};
use tower_http::services::ServeDir;

use crate::data::{build_scene, scene_key, DataDir};

/// Layout parameters used for scenes served to participants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneDefaults {
    pub space: f64,
    pub min_height: Option<f64>,
    pub bands: u32,
}

impl Default for SceneDefaults {
    fn default() -> Self {
        Self { space: 48.0, min_height: None, bands: DEFAULT_BANDS }
    }
}

impl SceneDefaults {
    pub fn params(&self, technique: Technique, n_years: u32) -> LayoutParams {
        let p = LayoutParams::new(technique, self.space, n_years).with_bands(self.bands);
        match self.min_height {
            Some(h) => p.with_min_height(h),
            None => p,
        }
    }
}

pub struct AppState {
    data: DataDir,
    dataset: Dataset,
    plans: PlanStore,
    log: ResponseLog,
    scene: SceneDefaults,
    scenes: Mutex<HashMap<(Technique, u32), Arc<SceneManifest>>>,
}

impl AppState {
    /// Loads the dataset and every plan from `data`, and opens the response log.
    pub fn load(data: DataDir, scene: SceneDefaults) -> Result<Self> {
        let dataset = data.load_dataset()?;
        let plans = if data.plans_dir().is_dir() { PlanStore::load_dir(&data.plans_dir())? } else { PlanStore::new() };
        let log = ResponseLog::open(data.log_path())?;
        Ok(Self { data, dataset, plans, log, scene, scenes: Mutex::new(HashMap::new()) })
    }

    pub fn plans(&self) -> &PlanStore {
        &self.plans
    }

    pub fn log(&self) -> &ResponseLog {
        &self.log
    }

    /// Scene for a (technique, N) condition, built on first use. A scene
    /// already on disk is reused only when it was built with the current
    /// parameters.
    fn scene(&self, technique: Technique, n_years: u32) -> Result<Arc<SceneManifest>> {
        let mut cache = self.scenes.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(m) = cache.get(&(technique, n_years)) {
            return Ok(m.clone());
        }
        let params = self.scene.params(technique, n_years);
        let dir = self.data.scene_dir(technique, n_years);
        let manifest = match read_scene(&dir) {
            Ok((m, _)) if m.params == params => m,
            _ => build_scene(&self.dataset, &params, &dir)?,
        };
        let manifest = Arc::new(manifest);
        cache.insert((technique, n_years), manifest.clone());
        Ok(manifest)
    }
}

/// Probe marker in scene coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub year_label: String,
    pub row: usize,
    pub col: usize,
    pub x: f64,
    pub y: f64,
}

/// Body of `GET /api/trial/{trial_id}/scene`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialScene {
    pub trial: PublicTrial,
    pub scene_url: String,
    pub manifest: SceneManifest,
    pub mesh_urls: Vec<String>,
    pub markers: Vec<Marker>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl From<StudyError> for ApiError {
    fn from(e: StudyError) -> Self {
        let status = match &e {
            StudyError::UnknownTrial(_) => StatusCode::NOT_FOUND,
            StudyError::Duplicate(_) => StatusCode::CONFLICT,
            StudyError::Unconfirmed(_) | StudyError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl From<anyhow::Error> for ApiError {
    fn from(e: anyhow::Error) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, format!("{e:#}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type Shared = Arc<AppState>;

async fn get_plan(State(state): State<Shared>, Path(participant): Path<String>) -> Result<Json<PublicPlan>, ApiError> {
    state
        .plans
        .plan(&participant)
        .map(|p| Json(p.public()))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no plan for participant {participant:?}")))
}

async fn get_trial_scene(State(state): State<Shared>, Path(trial_id): Path<String>) -> Result<Json<TrialScene>, ApiError> {
    let (_, trial) = state.plans.trial(&trial_id).ok_or_else(|| ApiError::from(StudyError::UnknownTrial(trial_id.clone())))?;
    let (technique, n_years) = (trial.technique, trial.n_years);
    let worker = state.clone();
    let manifest = tokio::task::spawn_blocking(move || worker.scene(technique, n_years))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let base = format!("/scenes/{}", scene_key(technique, n_years));
    let grid = state.dataset.grid();
    let markers = trial
        .probes
        .iter()
        .map(|p| {
            let (x, y) = grid.position(p.row, p.col);
            Marker { year_label: p.year_label.clone(), row: p.row, col: p.col, x, y }
        })
        .collect();
    Ok(Json(TrialScene {
        trial: trial.public(),
        scene_url: format!("{base}/{MANIFEST_FILE}"),
        mesh_urls: manifest.slots.iter().map(|s| format!("{base}/{}", s.mesh)).collect(),
        manifest: (*manifest).clone(),
        markers,
    }))
}

async fn post_response(
    State(state): State<Shared>,
    Path(trial_id): Path<String>,
    Json(resp): Json<TrialResponse>,
) -> Result<(StatusCode, Json<LogRecord>), ApiError> {
    if resp.trial_id != trial_id {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("body trial_id {:?} does not match path {trial_id:?}", resp.trial_id),
        ));
    }
    let record = state.log.record(resp, &state.plans)?;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn get_summary(State(state): State<Shared>) -> Result<Json<AnalyticsSummary>, ApiError> {
    let records = state.log.snapshot()?;
    Ok(Json(summarize(records.iter().map(|r| &r.response), &state.plans)?))
}

/// Builds the full application router.
pub fn router(state: Arc<AppState>) -> Router {
    let scenes = ServeDir::new(state.data.scenes_dir());
    let runner = ServeDir::new(state.data.runner_dir());
    Router::new()
        .route("/api/plan/{participant}", get(get_plan))
        .route("/api/trial/{trial_id}/scene", get(get_trial_scene))
        .route("/api/trial/{trial_id}/response", post(post_response))
        .route("/api/summary", get(get_summary))
        .nest_service("/scenes", scenes)
        .fallback_service(runner)
        .with_state(state)
}
