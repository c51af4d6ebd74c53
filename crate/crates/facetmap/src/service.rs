//! HTTP service over long-lasting map documents.
//!
//! Data directory layout:
//!
//! ```text
//! <data-dir>/categories.json        category mapping config
//! <data-dir>/snapshots/<id>.jsonl   dataset snapshots written by `ingest`
//! <data-dir>/maps/<map_id>.json     one file per map document
//! ```
//!
//! Every mutation of a map runs under that map's mutex and is persisted
//! before the lock is released, so concurrent requests on one map apply in
//! some serial order. Each document carries a `version` counter; a PATCH
//! naming a stale `version` is refused with 409 so the client can refetch
//! and retry.

use std::collections::HashMap;
use std::future::Future;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path as UrlPath, Query, Request, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post, put};
use axum::{Json, Router};
use chrono::{DateTime, SubsecRound, Utc};
use facetmap_core::analytics::{build_widget_payload, rank_facets};
use facetmap_core::projection::{
    count_in_polygon, item_visibility, resolve_projection, ProjectionPatch,
};
use facetmap_core::{
    BoundingBox, Category, GeoItem, Geometry, Point, ProjectionError, ProjectionState,
    RankingConfig, Rgb, WidgetPayload,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::Mutex;

use crate::ingestion::{CategoryMappingConfig, DatasetSnapshot, IngestError};
use crate::snapshot::{load_snapshot, SnapshotError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("map is at version {actual} but the request expected {expected}; refetch and retry")]
    Conflict { expected: u64, actual: u64 },
    #[error("snapshot {id}: {source}")]
    Snapshot { id: String, source: SnapshotError },
    #[error("category config: {0}")]
    Config(#[from] IngestError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("corrupt map document {path}: {message}")]
    CorruptMap { path: PathBuf, message: String },
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Conflict { .. } => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<ProjectionError> for ServiceError {
    fn from(e: ProjectionError) -> Self {
        match e {
            ProjectionError::UnknownCategory(id) => {
                ServiceError::NotFound(format!("category {id} on this map"))
            }
            other => ServiceError::BadRequest(other.to_string()),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!("{self}");
        }
        let mut body = serde_json::json!({ "error": self.to_string() });
        if let ServiceError::Conflict { actual, .. } = self {
            body["version"] = actual.into();
        }
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WidgetLayout {
    #[default]
    Checkboxes,
    Treemap,
    Sunburst,
    SlidersOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub map_id: String,
    pub title: String,
    pub bbox: BoundingBox,
    pub snapshot_id: String,
    pub layout: WidgetLayout,
    pub projection: ProjectionState,
    pub version: u64,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CreateMapRequest {
    pub title: String,
    pub bbox: BoundingBox,
    pub snapshot_id: String,
    #[serde(default)]
    pub layout: WidgetLayout,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SearchCategoryRequest {
    pub category_id: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PatchProjectionRequest {
    #[serde(flatten)]
    pub patch: ProjectionPatch,
    /// Optimistic concurrency check against `MapDocument::version`.
    #[serde(default)]
    pub version: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct LayoutRequest {
    pub layout: WidgetLayout,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CountRequest {
    pub category_id: String,
    pub polygon: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountResponse {
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedItem {
    pub id: String,
    pub category: String,
    pub geometry: Geometry,
    pub color: Rgb,
    pub icon: String,
    pub opacity: f64,
    pub highlighted_facets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailRow {
    pub facet: String,
    pub value: String,
    pub highlighted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemDetails {
    pub id: String,
    pub category: String,
    pub color: Rgb,
    pub visible: bool,
    pub rows: Vec<DetailRow>,
}

/// Title of the first detail row, holding the item's display name.
pub const DISPLAY_NAME_ROW: &str = "Display Name";

fn valid_file_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
}

pub struct MapService {
    data_dir: PathBuf,
    config: CategoryMappingConfig,
    ranking: RankingConfig,
    snapshots: RwLock<HashMap<String, Arc<DatasetSnapshot>>>,
    maps: RwLock<HashMap<String, Arc<Mutex<MapDocument>>>>,
}

impl MapService {
    /// Opens a data directory, loading `categories.json` and every stored
    /// map document.
    pub fn open(data_dir: &Path) -> Result<Self, ServiceError> {
        let config = CategoryMappingConfig::load(&data_dir.join("categories.json"))?;
        Self::with_config(data_dir, config)
    }

    pub fn with_config(
        data_dir: &Path,
        config: CategoryMappingConfig,
    ) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(data_dir.join("maps"))?;
        std::fs::create_dir_all(data_dir.join("snapshots"))?;
        let service = MapService {
            data_dir: data_dir.to_path_buf(),
            config,
            ranking: RankingConfig::default(),
            snapshots: RwLock::default(),
            maps: RwLock::default(),
        };
        let mut maps = HashMap::new();
        for entry in std::fs::read_dir(data_dir.join("maps"))? {
            let path = entry?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let bytes = std::fs::read(&path)?;
            let doc: MapDocument =
                serde_json::from_slice(&bytes).map_err(|e| ServiceError::CorruptMap {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
            if doc.projection.map_id != doc.map_id {
                return Err(ServiceError::CorruptMap {
                    path,
                    message: "projection belongs to another map".into(),
                });
            }
            maps.insert(doc.map_id.clone(), Arc::new(Mutex::new(doc)));
        }
        *service.maps.write().unwrap() = maps;
        Ok(service)
    }

    pub fn config(&self) -> &CategoryMappingConfig {
        &self.config
    }

    fn map_path(&self, map_id: &str) -> PathBuf {
        self.data_dir.join("maps").join(format!("{map_id}.json"))
    }

    fn persist(&self, doc: &MapDocument) -> Result<(), ServiceError> {
        let path = self.map_path(&doc.map_id);
        let tmp = path.with_extension("json.tmp");
        let mut bytes = serde_json::to_vec_pretty(doc).expect("map documents serialize");
        bytes.push(b'\n');
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Writes every map document to disk.
    pub async fn flush_all(&self) -> Result<usize, ServiceError> {
        let maps: Vec<Arc<Mutex<MapDocument>>> =
            self.maps.read().unwrap().values().cloned().collect();
        for map in &maps {
            self.persist(&*map.lock().await)?;
        }
        Ok(maps.len())
    }

    pub fn snapshot(&self, snapshot_id: &str) -> Result<Arc<DatasetSnapshot>, ServiceError> {
        if let Some(s) = self.snapshots.read().unwrap().get(snapshot_id) {
            return Ok(s.clone());
        }
        if !valid_file_id(snapshot_id) {
            return Err(ServiceError::BadRequest(format!(
                "invalid snapshot id {snapshot_id:?}"
            )));
        }
        let path = self
            .data_dir
            .join("snapshots")
            .join(format!("{snapshot_id}.jsonl"));
        if !path.exists() {
            return Err(ServiceError::NotFound(format!("snapshot {snapshot_id}")));
        }
        let snapshot = load_snapshot(&path).map_err(|source| ServiceError::Snapshot {
            id: snapshot_id.to_string(),
            source,
        })?;
        let snapshot = Arc::new(snapshot);
        self.snapshots
            .write()
            .unwrap()
            .insert(snapshot_id.to_string(), snapshot.clone());
        Ok(snapshot)
    }

    fn category(&self, category_id: &str) -> Result<&Category, ServiceError> {
        self.config
            .get(category_id)
            .ok_or_else(|| ServiceError::NotFound(format!("category {category_id}")))
    }

    fn map(&self, map_id: &str) -> Result<Arc<Mutex<MapDocument>>, ServiceError> {
        self.maps
            .read()
            .unwrap()
            .get(map_id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("map {map_id}")))
    }

    /// Snapshot items inside the map box.
    fn map_items(&self, doc: &MapDocument) -> Result<Vec<GeoItem>, ServiceError> {
        let snapshot = self.snapshot(&doc.snapshot_id)?;
        Ok(snapshot
            .items
            .iter()
            .filter(|i| doc.bbox.contains(i.representative_point()))
            .cloned()
            .collect())
    }

    fn payload(&self, doc: &MapDocument, category_id: &str) -> Result<WidgetPayload, ServiceError> {
        let items: Vec<GeoItem> = self
            .map_items(doc)?
            .into_iter()
            .filter(|i| i.category_id == category_id)
            .collect();
        let ranking = if items.is_empty() {
            Vec::new()
        } else {
            rank_facets(&items, &self.ranking)
        };
        Ok(build_widget_payload(
            category_id,
            &items,
            &ranking,
            &self.ranking,
        ))
    }

    /// Runs `f` on the map under its lock, bumping the version and persisting
    /// when the document changed.
    async fn mutate<T, F>(&self, map_id: &str, f: F) -> Result<T, ServiceError>
    where
        F: FnOnce(&mut MapDocument) -> Result<T, ServiceError>,
    {
        let map = self.map(map_id)?;
        let mut doc = map.lock().await;
        let mut next = doc.clone();
        let out = f(&mut next)?;
        if next != *doc {
            next.version = doc.version + 1;
            next.updated = Utc::now().trunc_subsecs(0);
            self.persist(&next)?;
            *doc = next;
        }
        Ok(out)
    }

    pub async fn create_map(&self, req: CreateMapRequest) -> Result<MapDocument, ServiceError> {
        self.snapshot(&req.snapshot_id)?;
        let map_id = uuid::Uuid::new_v4().to_string();
        let now = Utc::now().trunc_subsecs(0);
        let doc = MapDocument {
            projection: ProjectionState::new(map_id.clone()),
            map_id: map_id.clone(),
            title: req.title,
            bbox: req.bbox,
            snapshot_id: req.snapshot_id,
            layout: req.layout,
            version: 0,
            created: now,
            updated: now,
        };
        self.persist(&doc)?;
        self.maps
            .write()
            .unwrap()
            .insert(map_id, Arc::new(Mutex::new(doc.clone())));
        Ok(doc)
    }

    pub async fn get_map(&self, map_id: &str) -> Result<MapDocument, ServiceError> {
        Ok(self.map(map_id)?.lock().await.clone())
    }

    pub fn categories(&self, prefix: &str) -> Vec<Category> {
        self.config
            .search_prefix(prefix)
            .into_iter()
            .cloned()
            .collect()
    }

    /// Adds the category to the side bar (idempotent) and returns its widget.
    pub async fn search_category(
        &self,
        map_id: &str,
        category_id: &str,
    ) -> Result<WidgetPayload, ServiceError> {
        self.category(category_id)?;
        let doc = self
            .mutate(map_id, |doc| {
                doc.projection = doc.projection.with_category(category_id);
                Ok(doc.clone())
            })
            .await?;
        self.payload(&doc, category_id)
    }

    pub async fn widget(
        &self,
        map_id: &str,
        category_id: &str,
    ) -> Result<WidgetPayload, ServiceError> {
        self.category(category_id)?;
        let doc = self.get_map(map_id).await?;
        self.payload(&doc, category_id)
    }

    /// Removes a category from the side bar, dropping its projection. A
    /// later search appends it again with default settings.
    pub async fn remove_category(
        &self,
        map_id: &str,
        category_id: &str,
    ) -> Result<ProjectionState, ServiceError> {
        self.mutate(map_id, |doc| {
            doc.projection = doc.projection.without_category(category_id)?;
            Ok(doc.projection.clone())
        })
        .await
    }

    pub async fn update_projection(
        &self,
        map_id: &str,
        patch: &ProjectionPatch,
        expected_version: Option<u64>,
    ) -> Result<ProjectionState, ServiceError> {
        self.mutate(map_id, |doc| {
            if let Some(expected) = expected_version {
                if expected != doc.version {
                    return Err(ServiceError::Conflict {
                        expected,
                        actual: doc.version,
                    });
                }
            }
            doc.projection = doc.projection.apply_patch(patch)?;
            Ok(doc.projection.clone())
        })
        .await
    }

    pub async fn set_layout(
        &self,
        map_id: &str,
        layout: WidgetLayout,
    ) -> Result<MapDocument, ServiceError> {
        self.mutate(map_id, |doc| {
            doc.layout = layout;
            Ok(())
        })
        .await?;
        self.get_map(map_id).await
    }

    pub async fn visible_items(&self, map_id: &str) -> Result<Vec<RenderedItem>, ServiceError> {
        let doc = self.get_map(map_id).await?;
        let items = self.map_items(&doc)?;
        resolve_projection(&items, &doc.projection)
            .into_iter()
            .map(|(item, visibility)| {
                let category = self.category(&item.category_id)?;
                Ok(RenderedItem {
                    id: item.id.clone(),
                    category: item.category_id.clone(),
                    geometry: item.geometry.clone(),
                    color: category.color,
                    icon: category.icon.clone(),
                    opacity: visibility.opacity,
                    highlighted_facets: visibility.highlighted_facets,
                    name: item.display_name.clone(),
                })
            })
            .collect()
    }

    /// Visible items of one category inside `polygon`.
    pub async fn count_items(
        &self,
        map_id: &str,
        category_id: &str,
        polygon: &[[f64; 2]],
    ) -> Result<usize, ServiceError> {
        self.category(category_id)?;
        let ring: Vec<Point> = polygon
            .iter()
            .map(|&[lon, lat]| Point::new(lon, lat))
            .collect::<Result<_, _>>()
            .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let ring =
            match Geometry::polygon(ring).map_err(|e| ServiceError::BadRequest(e.to_string()))? {
                Geometry::Polygon(ring) => ring,
                Geometry::Point(_) => unreachable!("polygon constructor returns a polygon"),
            };
        let doc = self.get_map(map_id).await?;
        let items: Vec<GeoItem> = self
            .map_items(&doc)?
            .into_iter()
            .filter(|i| i.category_id == category_id)
            .collect();
        Ok(count_in_polygon(&items, &doc.projection, &ring))
    }

    /// Detail table: display name first, then facets alphabetically, with
    /// the facets satisfying the active constraints flagged.
    pub async fn item_details(
        &self,
        map_id: &str,
        item_id: &str,
    ) -> Result<ItemDetails, ServiceError> {
        let doc = self.get_map(map_id).await?;
        let snapshot = self.snapshot(&doc.snapshot_id)?;
        let item = snapshot
            .items
            .iter()
            .find(|i| i.id == item_id)
            .ok_or_else(|| ServiceError::NotFound(format!("item {item_id}")))?;
        let category = self.category(&item.category_id)?;
        let visibility = item_visibility(item, &doc.projection);
        let mut rows = Vec::with_capacity(item.facets.len() + 1);
        if let Some(name) = &item.display_name {
            rows.push(DetailRow {
                facet: DISPLAY_NAME_ROW.to_string(),
                value: name.clone(),
                highlighted: false,
            });
        }
        rows.extend(item.facets.iter().map(|(facet, value)| DetailRow {
            facet: facet.clone(),
            value: value.clone(),
            highlighted: visibility.highlighted_facets.contains(facet),
        }));
        Ok(ItemDetails {
            id: item.id.clone(),
            category: item.category_id.clone(),
            color: category.color,
            visible: visibility.visible,
            rows,
        })
    }
}

/// JSON body extractor answering malformed bodies with 400.
pub struct JsonBody<T>(pub T);

impl<S, T> FromRequest<S> for JsonBody<T>
where
    Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ServiceError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| JsonBody(v))
            .map_err(|e| ServiceError::BadRequest(e.body_text()))
    }
}

type AppState = State<Arc<MapService>>;
type ApiResult<T> = Result<Json<T>, ServiceError>;

async fn create_map(
    State(s): AppState,
    JsonBody(req): JsonBody<CreateMapRequest>,
) -> ApiResult<MapDocument> {
    s.create_map(req).await.map(Json)
}

async fn get_map(State(s): AppState, UrlPath(id): UrlPath<String>) -> ApiResult<MapDocument> {
    s.get_map(&id).await.map(Json)
}

#[derive(Deserialize)]
struct PrefixQuery {
    #[serde(default)]
    prefix: String,
}

async fn list_categories(State(s): AppState, Query(q): Query<PrefixQuery>) -> Json<Vec<Category>> {
    Json(s.categories(&q.prefix))
}

async fn search_category(
    State(s): AppState,
    UrlPath(id): UrlPath<String>,
    JsonBody(req): JsonBody<SearchCategoryRequest>,
) -> ApiResult<WidgetPayload> {
    s.search_category(&id, &req.category_id).await.map(Json)
}

async fn remove_category(
    State(s): AppState,
    UrlPath((id, category)): UrlPath<(String, String)>,
) -> ApiResult<ProjectionState> {
    s.remove_category(&id, &category).await.map(Json)
}

async fn get_widget(
    State(s): AppState,
    UrlPath((id, category)): UrlPath<(String, String)>,
) -> ApiResult<WidgetPayload> {
    s.widget(&id, &category).await.map(Json)
}

async fn patch_projection(
    State(s): AppState,
    UrlPath(id): UrlPath<String>,
    JsonBody(req): JsonBody<PatchProjectionRequest>,
) -> ApiResult<ProjectionState> {
    s.update_projection(&id, &req.patch, req.version)
        .await
        .map(Json)
}

async fn put_layout(
    State(s): AppState,
    UrlPath(id): UrlPath<String>,
    JsonBody(req): JsonBody<LayoutRequest>,
) -> ApiResult<MapDocument> {
    s.set_layout(&id, req.layout).await.map(Json)
}

async fn get_items(
    State(s): AppState,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Vec<RenderedItem>> {
    s.visible_items(&id).await.map(Json)
}

async fn count(
    State(s): AppState,
    UrlPath(id): UrlPath<String>,
    JsonBody(req): JsonBody<CountRequest>,
) -> ApiResult<CountResponse> {
    let count = s.count_items(&id, &req.category_id, &req.polygon).await?;
    Ok(Json(CountResponse { count }))
}

async fn get_item(
    State(s): AppState,
    UrlPath((id, item)): UrlPath<(String, String)>,
) -> ApiResult<ItemDetails> {
    s.item_details(&id, &item).await.map(Json)
}

pub fn router(service: Arc<MapService>) -> Router {
    Router::new()
        .route("/maps", post(create_map))
        .route("/maps/{id}", get(get_map))
        .route("/categories", get(list_categories))
        .route("/maps/{id}/categories", post(search_category))
        .route(
            "/maps/{id}/categories/{category_id}",
            delete(remove_category),
        )
        .route("/maps/{id}/widgets/{category_id}", get(get_widget))
        .route(
            "/maps/{id}/projection",
            axum::routing::patch(patch_projection),
        )
        .route("/maps/{id}/layout", put(put_layout))
        .route("/maps/{id}/items", get(get_items))
        .route("/maps/{id}/items/{*item_id}", get(get_item))
        .route("/maps/{id}/count", post(count))
        .with_state(service)
}

/// Serves until `shutdown` resolves, then writes every map document.
pub async fn serve<F>(
    service: Arc<MapService>,
    listener: TcpListener,
    shutdown: F,
) -> anyhow::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(service.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    let flushed = service.flush_all().await?;
    tracing::info!("flushed {flushed} map documents");
    Ok(())
}
