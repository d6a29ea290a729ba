//! Projection, point clustering, choropleth classes and GeoJSON assembly.

mod cache;
mod cluster;
mod features;
mod kdindex;

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

pub use cache::SingleFlightCache;
pub use cluster::{cluster, ClusterIndex, ClusterKind, ClusterNode, ClusterOptions};
pub use features::{
    district_features, round6, school_features, school_layer, value_label, Bbox, MapQuery, SchoolLayer,
};
pub use kdindex::KdIndex;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("zoom {zoom} outside 0..={max_zoom}")]
    ZoomOutOfRange { zoom: i64, max_zoom: u8 },
    #[error("feature {0} is not a cluster")]
    NotACluster(usize),
    #[error("percentage {0} outside [0, 100]")]
    OutOfRange(f64),
    #[error("unknown county {0:?}")]
    UnknownCounty(String),
    #[error("bad bbox: {0}")]
    BadBbox(String),
    #[error("invalid clustering options: {0}")]
    BadOptions(String),
}

/// Latitude bound of the square Web Mercator world.
pub const MAX_LATITUDE: f64 = 85.051_128_78;

/// Position in the Web Mercator unit square; y grows southward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

pub fn project(lon: f64, lat: f64) -> WorldPoint {
    let phi = lat.clamp(-MAX_LATITUDE, MAX_LATITUDE).to_radians();
    let x = (lon + 180.0) / 360.0;
    let y = (1.0 - (PI / 4.0 + phi / 2.0).tan().ln() / PI) / 2.0;
    WorldPoint { x: x.clamp(0.0, 1.0), y: y.clamp(0.0, 1.0) }
}

/// Inverse of [`project`] (lon, lat in degrees).
pub fn unproject(p: WorldPoint) -> (f64, f64) {
    let lon = p.x * 360.0 - 180.0;
    let lat = (2.0 * (PI * (1.0 - 2.0 * p.y)).exp().atan() - PI / 2.0).to_degrees();
    (lon, lat)
}

/// Orange (low) to blue (high); index 0..=4.
pub const PALETTE: [&str; 5] = ["#d7641f", "#f2a35c", "#f7ecd9", "#8fbadd", "#2f6db3"];
pub const NO_DATA_FILL: &str = "#4a4a4a";
pub const CLASS_LABELS: [&str; 5] = ["0–20%", "20–40%", "40–60%", "60–80%", "80–100%"];

/// A choropleth class: one of five equal-width 20-point bins, or no data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ColorClass(Option<u8>);

impl ColorClass {
    pub const NO_DATA: ColorClass = ColorClass(None);

    pub fn index(self) -> Option<u8> {
        self.0
    }

    pub fn fill(self) -> &'static str {
        match self.0 {
            Some(i) => PALETTE[usize::from(i)],
            None => NO_DATA_FILL,
        }
    }

    pub fn label(self) -> &'static str {
        match self.0 {
            Some(i) => CLASS_LABELS[usize::from(i)],
            None => "No data",
        }
    }

    pub fn from_fill(hex: &str) -> Option<ColorClass> {
        if hex.eq_ignore_ascii_case(NO_DATA_FILL) {
            return Some(ColorClass::NO_DATA);
        }
        PALETTE.iter().position(|p| p.eq_ignore_ascii_case(hex)).map(|i| ColorClass(Some(i as u8)))
    }
}

/// Bins `[0,20) [20,40) [40,60) [60,80) [80,100]`; missing maps to no data.
pub fn classify(pct: Option<f64>) -> Result<ColorClass, GeoError> {
    let Some(p) = pct else {
        return Ok(ColorClass::NO_DATA);
    };
    if !(0.0..=100.0).contains(&p) {
        return Err(GeoError::OutOfRange(p));
    }
    let index = [20.0, 40.0, 60.0, 80.0].iter().take_while(|&&edge| p >= edge).count();
    Ok(ColorClass(Some(index as u8)))
}

/// Legend entries in class order followed by the no-data swatch.
pub fn legend() -> serde_json::Value {
    let mut entries: Vec<_> = (0..5u8)
        .map(|i| {
            let c = ColorClass(Some(i));
            serde_json::json!({ "class": i, "label": c.label(), "fill": c.fill() })
        })
        .collect();
    entries.push(serde_json::json!({ "class": null, "label": "No data", "fill": NO_DATA_FILL }));
    serde_json::Value::Array(entries)
}
