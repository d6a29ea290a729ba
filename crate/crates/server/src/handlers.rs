use std::sync::Arc;

use axum::extract::multipart::{Multipart, MultipartError, MultipartRejection};
use axum::extract::path::ErrorKind;
use axum::extract::rejection::PathRejection;
use axum::extract::{Path, RawQuery, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use fitmap_core::custom::{
    build_layer, layer_features, parse_custom_table, validate_upload, ConversionTable, LayerRegistry, UploadError,
    UploadErrorKind, MAX_UPLOAD_BYTES,
};
use fitmap_core::geo::{
    district_features, legend, school_layer, ClusterOptions, MapQuery, SchoolLayer, SingleFlightCache,
};
use fitmap_core::ingest::{sha256_hex, Snapshot};
use fitmap_core::model::{Assessment, Grade};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::query::{self, Params};

type Body = Result<Arc<Vec<u8>>, ApiError>;

pub struct Inner {
    pub snapshot: Snapshot,
    pub registry: LayerRegistry,
    pub crosswalk: ConversionTable,
    pub options: ClusterOptions,
    bodies: SingleFlightCache<String, Body>,
    layers: SingleFlightCache<String, Result<Arc<SchoolLayer>, ApiError>>,
}

/// Shared, immutable-except-registry server state.
#[derive(Clone)]
pub struct AppState(pub Arc<Inner>);

const CACHE_CAPACITY: usize = 256;

impl AppState {
    pub fn new(
        snapshot: Snapshot,
        registry: LayerRegistry,
        crosswalk: ConversionTable,
        options: ClusterOptions,
    ) -> Self {
        AppState(Arc::new(Inner {
            snapshot,
            registry,
            crosswalk,
            options,
            bodies: SingleFlightCache::new(CACHE_CAPACITY),
            layers: SingleFlightCache::new(CACHE_CAPACITY),
        }))
    }

    pub fn snapshot(&self) -> &Snapshot {
        &self.0.snapshot
    }

    pub fn registry(&self) -> &LayerRegistry {
        &self.0.registry
    }
}

fn etag_for(parts: &[&str]) -> String {
    format!("\"{}\"", sha256_hex(parts.join("\n").as_bytes()))
}

fn not_modified(headers: &HeaderMap, etag: &str) -> bool {
    headers
        .get_all(header::IF_NONE_MATCH)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(','))
        .map(str::trim)
        .any(|t| t == "*" || t == etag)
}

fn cached(headers: &HeaderMap, etag: String, body: impl FnOnce() -> Body, content_type: &'static str) -> Response {
    let tag = HeaderValue::from_str(&etag).expect("hex etag");
    if not_modified(headers, &etag) {
        return (StatusCode::NOT_MODIFIED, [(header::ETAG, tag)]).into_response();
    }
    match body() {
        Ok(bytes) => (
            [
                (header::ETAG, tag),
                (header::CONTENT_TYPE, HeaderValue::from_static(content_type)),
                (header::CACHE_CONTROL, HeaderValue::from_static("no-cache")),
            ],
            bytes.as_ref().clone(),
        )
            .into_response(),
        Err(e) => e.into_response(),
    }
}

const GEOJSON: &str = "application/geo+json";
const JSON: &str = "application/json";

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

fn to_bytes(v: &Value) -> Arc<Vec<u8>> {
    Arc::new(serde_json::to_vec(v).expect("json serializes"))
}

pub async fn meta(State(state): State<AppState>, headers: HeaderMap) -> Response {
    let s = state.snapshot();
    let etag = etag_for(&[s.checksum(), "meta"]);
    let body = || {
        let assessments: Vec<Value> =
            Assessment::ALL.iter().map(|a| json!({"id": a.token(), "name": a.display_name()})).collect();
        Ok(to_bytes(&json!({
            "years": s.years(),
            "grades": Grade::ALL.iter().map(|g| g.number()).collect::<Vec<_>>(),
            "assessments": assessments,
            "counties": s.counties(),
            "legend": legend(),
            "max_zoom": state.0.options.max_zoom,
            "snapshot": s.checksum(),
        })))
    };
    cached(&headers, etag, body, JSON)
}

pub async fn districts(State(state): State<AppState>, headers: HeaderMap, RawQuery(raw): RawQuery) -> Response {
    let handle = async {
        let p = Params::parse(raw.as_deref());
        let q = query::map_query(&p)?;
        let key = format!("districts?{}", query::canonical(&q));
        let etag = etag_for(&[state.snapshot().checksum(), &key]);
        if not_modified(&headers, &etag) {
            return Ok(cached(&headers, etag, || unreachable!(), GEOJSON));
        }
        let st = state.clone();
        let body = blocking(move || {
            st.0.bodies.get_or_build(&key, || {
                district_features(st.snapshot(), &q).map(|v| to_bytes(&v)).map_err(ApiError::from)
            })
        })
        .await?;
        Ok::<_, ApiError>(cached(&headers, etag, || body, GEOJSON))
    };
    handle.await.unwrap_or_else(IntoResponse::into_response)
}

fn layer_for(
    state: &AppState,
    q: &MapQuery,
    bbox_key: &str,
    bbox: Option<fitmap_core::geo::Bbox>,
) -> Result<Arc<SchoolLayer>, ApiError> {
    let key = format!("{}&bbox={bbox_key}", query::canonical(q));
    state.0.layers.get_or_build(&key, || {
        school_layer(state.snapshot(), q, bbox.as_ref(), state.0.options).map(Arc::new).map_err(ApiError::from)
    })
}

pub async fn schools(State(state): State<AppState>, headers: HeaderMap, RawQuery(raw): RawQuery) -> Response {
    let handle = async {
        let p = Params::parse(raw.as_deref());
        let q = query::map_query(&p)?;
        let zoom = query::zoom(&p)?;
        let bbox = query::bbox(&p)?;
        let max = state.0.options.max_zoom;
        if zoom < 0 || zoom > i64::from(max) {
            return Err(ApiError::from(fitmap_core::geo::GeoError::ZoomOutOfRange { zoom, max_zoom: max }));
        }
        let bbox_key = query::canonical_bbox(bbox.as_ref());
        let key = format!("schools?{}&zoom={zoom}&bbox={bbox_key}", query::canonical(&q));
        let etag = etag_for(&[state.snapshot().checksum(), &key]);
        if not_modified(&headers, &etag) {
            return Ok(cached(&headers, etag, || unreachable!(), GEOJSON));
        }
        let st = state.clone();
        let body = blocking(move || {
            st.0.bodies.get_or_build(&key, || {
                let layer = layer_for(&st, &q, &bbox_key, bbox)?;
                layer.features(zoom).map(|v| to_bytes(&v)).map_err(ApiError::from)
            })
        })
        .await?;
        Ok(cached(&headers, etag, || body, GEOJSON))
    };
    handle.await.unwrap_or_else(IntoResponse::into_response)
}

pub async fn list_layers(State(state): State<AppState>) -> Json<Vec<String>> {
    Json(state.registry().names())
}

fn layer_name(path: Result<Path<String>, PathRejection>) -> Result<String, ApiError> {
    match path {
        Ok(Path(name)) => Ok(name),
        Err(PathRejection::FailedToDeserializePathParams(e))
            if matches!(e.kind(), ErrorKind::InvalidUtf8InPathParam { .. }) =>
        {
            Err(ApiError::new(StatusCode::BAD_REQUEST, "BadParam", "layer name is not valid UTF-8"))
        }
        Err(e) => Err(ApiError::new(StatusCode::BAD_REQUEST, "BadParam", e.body_text())),
    }
}

pub async fn get_layer(
    State(state): State<AppState>,
    headers: HeaderMap,
    path: Result<Path<String>, PathRejection>,
    RawQuery(raw): RawQuery,
) -> Result<Response, ApiError> {
    let name = layer_name(path)?;
    let p = Params::parse(raw.as_deref());
    match p.get("format")? {
        None | Some("geojson") => {}
        Some(other) => return Err(ApiError::bad_enum("format", other, "geojson")),
    }
    let layer = state.registry().get(&name).ok_or_else(|| ApiError::not_found(format!("no layer named {name:?}")))?;
    let fingerprint = state.registry().fingerprint();
    let etag = etag_for(&[state.snapshot().checksum(), "layer", &name, &fingerprint]);
    let st = state.clone();
    let body = blocking(move || Ok(to_bytes(&layer_features(&layer, st.snapshot().boundary_map())))).await?;
    Ok(cached(&headers, etag, || body, GEOJSON))
}

pub async fn delete_layer(
    State(state): State<AppState>,
    path: Result<Path<String>, PathRejection>,
) -> Result<StatusCode, ApiError> {
    let name = layer_name(path)?;
    let st = state.clone();
    blocking(move || st.registry().delete(&name)).await??;
    Ok(StatusCode::NO_CONTENT)
}

/// Layer names appear in URLs, so they are kept to a plain alphabet.
fn check_layer_name(name: &str) -> Result<(), ApiError> {
    let ok = !name.is_empty()
        && name.chars().count() <= 64
        && name.chars().all(|c| c.is_alphanumeric() || matches!(c, ' ' | '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(ApiError::bad_param(format!("layer name {name:?} must be 1-64 letters, digits, spaces, '-', '_' or '.'")))
    }
}

fn multipart_error(e: MultipartError) -> ApiError {
    if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
        UploadError::new(UploadErrorKind::TooLarge, format!("upload exceeds {MAX_UPLOAD_BYTES} bytes (10MB)")).into()
    } else {
        ApiError::new(StatusCode::BAD_REQUEST, "BadMultipart", e.body_text())
    }
}

const NAME_LIMIT: usize = 1024;

/// `multipart/form-data` with a `file` part and a `name` part. The file is
/// streamed and rejected as soon as it passes the size limit.
pub async fn create_layer(
    State(state): State<AppState>,
    multipart: Result<Multipart, MultipartRejection>,
) -> Result<Response, ApiError> {
    let mut mp = multipart.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BadMultipart", e.body_text()))?;
    let mut file: Option<(String, Vec<u8>)> = None;
    let mut name: Option<String> = None;
    while let Some(mut field) = mp.next_field().await.map_err(multipart_error)? {
        let limit = match field.name() {
            Some("file") => MAX_UPLOAD_BYTES as usize,
            Some("name") => NAME_LIMIT,
            _ => continue,
        };
        let is_file = field.name() == Some("file");
        let filename = field.file_name().unwrap_or("").to_string();
        let mut buf = Vec::new();
        while let Some(chunk) = field.chunk().await.map_err(multipart_error)? {
            if buf.len() + chunk.len() > limit {
                if is_file {
                    return Err(UploadError::new(
                        UploadErrorKind::TooLarge,
                        format!("file exceeds the maximum of {MAX_UPLOAD_BYTES} bytes (10MB)"),
                    )
                    .into());
                }
                return Err(ApiError::bad_param("layer name is too long"));
            }
            buf.extend_from_slice(&chunk);
        }
        let slot_taken = if is_file { file.is_some() } else { name.is_some() };
        if slot_taken {
            return Err(ApiError::bad_param("upload one file with one name per request"));
        }
        if is_file {
            file = Some((filename, buf));
        } else {
            name = Some(
                String::from_utf8(buf).map_err(|_| ApiError::bad_param("layer name is not UTF-8"))?.trim().to_string(),
            );
        }
    }
    let (filename, bytes) = file.ok_or_else(|| ApiError::missing_param("file"))?;
    let name = name.ok_or_else(|| ApiError::missing_param("name"))?;
    check_layer_name(&name)?;
    validate_upload(&filename, bytes.len() as u64, &name, &state.registry().names())?;

    let st = state.clone();
    let layer = blocking(move || -> Result<_, ApiError> {
        let table = parse_custom_table(&bytes)?;
        let layer = build_layer(&name, &table, &st.0.crosswalk, st.snapshot().boundary_map())?;
        Ok(st.registry().create(layer)?)
    })
    .await??;
    tracing::info!(layer = %layer.name, matched = layer.join_stats.matched, "layer created");
    let location = format!(
        "/api/layers/{}",
        form_urlencoded::byte_serialize(layer.name.as_bytes()).collect::<String>().replace('+', "%20")
    );
    let body = json!({ "name": layer.name, "join_stats": layer.join_stats, "created_at": layer.created_at });
    Ok((
        StatusCode::CREATED,
        [(header::LOCATION, HeaderValue::from_str(&location).map_err(|e| ApiError::internal(e.to_string()))?)],
        Json(body),
    )
        .into_response())
}

pub async fn api_not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "MethodNotAllowed", "method not allowed on this endpoint")
}
