#![allow(dead_code)]

use std::path::Path;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use fitmap_core::custom::{ConversionTable, LayerRegistry};
use fitmap_core::geo::ClusterOptions;
use fitmap_core::ingest::Snapshot;
use fitmap_core::synth::{synthetic_snapshot, SynthConfig};
use fitmap_server::{router, AppState, ServerConfig};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub const DEFAULT_QUERY: &str = "year=2019&grade=5&assessment=aerobic_capacity";

pub fn fixture() -> Snapshot {
    synthetic_snapshot(&SynthConfig { districts: 30, schools_per_district: 8, ..SynthConfig::default() })
}

/// Crosswalk rows for the first `n` synthetic districts: LEAID `06000NN`.
pub fn crosswalk_csv(snapshot: &Snapshot, n: usize) -> String {
    let mut out = String::from("leaid,cdscode\n");
    for (i, b) in snapshot.boundaries().take(n).enumerate() {
        out.push_str(&format!("{:07},{}\n", 600_000 + i, b.code));
    }
    out
}

pub fn app_with(snapshot: Snapshot, registry: LayerRegistry, crosswalk: ConversionTable) -> Router {
    let state = AppState::new(snapshot, registry, crosswalk, ClusterOptions::default());
    router(state, &ServerConfig::new("unused"))
}

pub fn app(snapshot: Snapshot) -> Router {
    let cw = ConversionTable::from_csv(crosswalk_csv(&snapshot, 10).as_bytes()).unwrap();
    app_with(snapshot, LayerRegistry::in_memory(), cw)
}

pub struct Reply {
    pub status: StatusCode,
    pub etag: Option<String>,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or(Value::Null)
    }

    pub fn error_code(&self) -> String {
        self.json()["error"]["code"].as_str().unwrap_or("").to_string()
    }
}

pub async fn send(app: &Router, req: Request<Body>) -> Reply {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let etag = res.headers().get(header::ETAG).map(|v| v.to_str().unwrap().to_string());
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, etag, body }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub const BOUNDARY: &str = "fitmap-test-boundary";

/// `multipart/form-data` body with optional `name` and `file` parts.
pub fn multipart(name: Option<&str>, file: Option<(&str, &[u8])>) -> Vec<u8> {
    let mut body = Vec::new();
    if let Some(n) = name {
        body.extend_from_slice(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"name\"\r\n\r\n{n}\r\n").as_bytes(),
        );
    }
    if let Some((filename, bytes)) = file {
        body.extend_from_slice(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{filename}\"\r\nContent-Type: text/csv\r\n\r\n")
                .as_bytes(),
        );
        body.extend_from_slice(bytes);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

pub async fn upload(app: &Router, name: Option<&str>, file: Option<(&str, &[u8])>) -> Reply {
    let req = Request::post("/api/layers")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(name, file)))
        .unwrap();
    send(app, req).await
}

pub fn write_fixture(snapshot: &Snapshot, dir: &Path) {
    fitmap_core::ingest::write_snapshot(snapshot, dir).unwrap();
}
