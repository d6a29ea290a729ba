//! HTTP API over a fitmap snapshot.
//!
//! | Route | |
//! |---|---|
//! | `GET /api/meta` | years, grades, assessments, counties, legend |
//! | `GET /api/districts?year&grade&assessment[&counties]` | district choropleth GeoJSON |
//! | `GET /api/schools?year&grade&assessment&zoom[&counties][&bbox]` | clustered school GeoJSON |
//! | `GET/POST /api/layers` | list names / upload a layer (multipart `file`, `name`) |
//! | `GET/DELETE /api/layers/{name}` | layer GeoJSON / remove |
//!
//! Errors are `{"error": {"code", "message"}}`. GET responses carry a strong
//! ETag and honour `If-None-Match`.

mod error;
mod handlers;
mod query;

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::time::Instant;

use axum::extract::{DefaultBodyLimit, Request};
use axum::http::{header, HeaderValue, Method};
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use fitmap_core::custom::{ConversionTable, LayerRegistry, MAX_UPLOAD_BYTES};
use fitmap_core::geo::ClusterOptions;
use fitmap_core::ingest::read_snapshot;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

pub use error::{ApiError, StartupError};
pub use handlers::AppState;

pub const DEFAULT_PORT: u16 = 3000;

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub snapshot: PathBuf,
    pub host: IpAddr,
    pub port: u16,
    /// Layer store directory; layers live in memory when unset.
    pub uploads: Option<PathBuf>,
    /// LEAID ↔ CDS table for LEAID-keyed uploads.
    pub crosswalk: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    /// Origins allowed cross-origin access; empty means same-origin only.
    pub cors_origins: Vec<String>,
    pub cluster: ClusterOptions,
}

impl ServerConfig {
    pub fn new(snapshot: impl Into<PathBuf>) -> Self {
        ServerConfig {
            snapshot: snapshot.into(),
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            uploads: None,
            crosswalk: None,
            static_dir: None,
            cors_origins: Vec::new(),
            cluster: ClusterOptions::default(),
        }
    }
}

/// Reads and verifies the snapshot, opens the layer store and crosswalk.
pub fn load_state(cfg: &ServerConfig) -> Result<AppState, StartupError> {
    cfg.cluster.validate().map_err(|e| StartupError::Io(std::io::Error::other(e.to_string())))?;
    let snapshot = read_snapshot(&cfg.snapshot)?;
    let registry = match &cfg.uploads {
        Some(dir) => LayerRegistry::open(dir)?,
        None => LayerRegistry::in_memory(),
    };
    let crosswalk = match &cfg.crosswalk {
        Some(path) => {
            let file = std::fs::File::open(path)?;
            ConversionTable::from_csv(file).map_err(|source| StartupError::Crosswalk { path: path.clone(), source })?
        }
        None => ConversionTable::empty(),
    };
    Ok(AppState::new(snapshot, registry, crosswalk, cfg.cluster))
}

async fn access_log(req: Request, next: Next) -> Response {
    let start = Instant::now();
    let method = req.method().clone();
    let uri = req.uri().clone();
    let res = next.run(req).await;
    tracing::info!(
        target: "fitmap::access",
        "{method} {uri} {} {:.1}ms",
        res.status().as_u16(),
        start.elapsed().as_secs_f64() * 1e3
    );
    res
}

/// API routes, optional static files under `/`, CORS and access logging.
pub fn router(state: AppState, cfg: &ServerConfig) -> Router {
    use handlers::*;
    let api = Router::new()
        .route("/api/meta", get(meta))
        .route("/api/districts", get(districts))
        .route("/api/schools", get(schools))
        .route(
            "/api/layers",
            get(list_layers)
                .post(create_layer)
                // room for multipart framing; the file part is limited exactly in the handler
                .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES as usize + 64 * 1024)),
        )
        .route("/api/layers/{name}", get(get_layer).delete(delete_layer))
        .route("/api", get(api_not_found))
        .route("/api/{*rest}", get(api_not_found))
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state);
    let mut app = match &cfg.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(api_not_found),
    };
    if !cfg.cors_origins.is_empty() {
        let origins: Vec<HeaderValue> = cfg.cors_origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST, Method::DELETE])
                .allow_headers([header::CONTENT_TYPE, header::IF_NONE_MATCH])
                .expose_headers([header::ETAG]),
        );
    }
    app.layer(middleware::from_fn(access_log))
}

/// Binds the listener, reporting an occupied port as [`StartupError::PortBusy`].
pub async fn bind(host: IpAddr, port: u16) -> Result<TcpListener, StartupError> {
    TcpListener::bind(SocketAddr::new(host, port)).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => StartupError::PortBusy(port),
        _ => StartupError::Io(e),
    })
}

/// Loads state, binds and serves until Ctrl-C.
pub async fn run(cfg: ServerConfig) -> Result<(), StartupError> {
    let state = load_state(&cfg)?;
    let listener = bind(cfg.host, cfg.port).await?;
    tracing::info!("serving {} on http://{}", cfg.snapshot.display(), listener.local_addr()?);
    let app = router(state, &cfg);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
