//! District boundary loading from GeoJSON.

use std::collections::HashMap;

use serde_json::{json, Map, Value};

use super::{clean_text, IngestError, IngestIssue, IssueKind};
use crate::model::CdsCode;

pub type Position = [f64; 2];
/// A closed ring: first position equals the last.
pub type Ring = Vec<Position>;

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Polygon(Vec<Ring>),
    MultiPolygon(Vec<Vec<Ring>>),
}

impl Geometry {
    pub fn to_geojson(&self) -> Value {
        match self {
            Geometry::Polygon(rings) => json!({ "type": "Polygon", "coordinates": rings }),
            Geometry::MultiPolygon(polys) => json!({ "type": "MultiPolygon", "coordinates": polys }),
        }
    }

    /// Parses a Polygon or MultiPolygon, closing any open ring.
    pub fn from_geojson(value: &Value) -> Result<Geometry, String> {
        let kind = value.get("type").and_then(Value::as_str).ok_or("geometry without type")?;
        let coords = value.get("coordinates").ok_or("geometry without coordinates")?;
        match kind {
            "Polygon" => Ok(Geometry::Polygon(parse_polygon(coords)?)),
            "MultiPolygon" => {
                let polys = coords.as_array().ok_or("MultiPolygon coordinates must be an array")?;
                if polys.is_empty() {
                    return Err("empty MultiPolygon".into());
                }
                Ok(Geometry::MultiPolygon(polys.iter().map(parse_polygon).collect::<Result<_, _>>()?))
            }
            other => Err(format!("unsupported geometry type {other:?}")),
        }
    }

    pub fn rings(&self) -> Box<dyn Iterator<Item = &Ring> + '_> {
        match self {
            Geometry::Polygon(r) => Box::new(r.iter()),
            Geometry::MultiPolygon(p) => Box::new(p.iter().flatten()),
        }
    }
}

fn parse_polygon(value: &Value) -> Result<Vec<Ring>, String> {
    let rings = value.as_array().ok_or("polygon must be an array of rings")?;
    if rings.is_empty() {
        return Err("polygon without rings".into());
    }
    rings.iter().map(parse_ring).collect()
}

fn parse_ring(value: &Value) -> Result<Ring, String> {
    let positions = value.as_array().ok_or("ring must be an array of positions")?;
    let mut ring: Ring = positions
        .iter()
        .map(|p| {
            let arr = p.as_array().filter(|a| a.len() >= 2).ok_or("position must have at least 2 numbers")?;
            let lon = arr[0].as_f64().ok_or("non-numeric coordinate")?;
            let lat = arr[1].as_f64().ok_or("non-numeric coordinate")?;
            if lon.abs() > 180.0 || lat.abs() > 90.0 {
                return Err(format!("coordinate ({lon}, {lat}) out of range"));
            }
            Ok([lon, lat])
        })
        .collect::<Result<_, String>>()?;
    if ring.first() != ring.last() {
        ring.push(ring[0]);
    }
    if ring.len() < 4 {
        return Err(format!("ring has {} positions; at least 4 required", ring.len()));
    }
    Ok(ring)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistrictBoundary {
    pub code: CdsCode,
    pub district_name: String,
    pub county_name: String,
    pub geometry: Geometry,
}

/// Feature property names read by [`load_boundaries`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryProperties {
    pub code: String,
    pub district_name: String,
    pub county_name: String,
}

impl Default for BoundaryProperties {
    fn default() -> Self {
        BoundaryProperties {
            code: "CDSCode".into(),
            district_name: "DistrictName".into(),
            county_name: "CountyName".into(),
        }
    }
}

/// Loads a FeatureCollection of district polygons.
///
/// Features without a parseable district-level code are skipped with a
/// `BadCode` issue; in issues, `line` is the 1-based feature ordinal. A
/// structurally invalid collection or geometry is fatal.
pub fn load_boundaries(
    bytes: &[u8],
    source: &str,
    props: &BoundaryProperties,
) -> Result<(Vec<DistrictBoundary>, Vec<IngestIssue>), IngestError> {
    let malformed = |d: String| IngestError::MalformedGeoJson(d);
    let root: Value = serde_json::from_slice(bytes).map_err(|e| malformed(e.to_string()))?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(malformed("root is not a FeatureCollection".into()));
    }
    let features =
        root.get("features").and_then(Value::as_array).ok_or_else(|| malformed("missing features array".into()))?;

    let mut out: Vec<DistrictBoundary> = Vec::new();
    let mut slots: HashMap<CdsCode, usize> = HashMap::new();
    let mut issues = Vec::new();
    for (i, feature) in features.iter().enumerate() {
        let line = i as u64 + 1;
        let mut issue =
            |kind, detail: String| issues.push(IngestIssue { source: source.to_string(), line, kind, detail });
        let empty = Map::new();
        let properties = feature.get("properties").and_then(Value::as_object).unwrap_or(&empty);
        let text = |key: &str| properties.get(key).and_then(Value::as_str).map(clean_text).unwrap_or_default();

        let code_text = text(&props.code);
        let code = match CdsCode::parse(&code_text) {
            Ok(c) if c.is_district() => c,
            Ok(c) => {
                issue(IssueKind::BadCode, format!("{c} is not a district-level code"));
                continue;
            }
            Err(e) => {
                issue(IssueKind::BadCode, format!("{} {code_text:?}: {e}", props.code));
                continue;
            }
        };
        let geometry = feature
            .get("geometry")
            .ok_or_else(|| format!("feature {line} has no geometry"))
            .and_then(|g| Geometry::from_geojson(g).map_err(|e| format!("feature {line}: {e}")))
            .map_err(malformed)?;
        let boundary = DistrictBoundary {
            code,
            district_name: text(&props.district_name),
            county_name: text(&props.county_name),
            geometry,
        };
        match slots.get(&code) {
            Some(&slot) => {
                issue(IssueKind::DuplicateKey, format!("{code}: replaced earlier feature"));
                out[slot] = boundary;
            }
            None => {
                slots.insert(code, out.len());
                out.push(boundary);
            }
        }
    }
    Ok((out, issues))
}

/// Serializes boundaries with the default property names.
pub fn boundaries_to_geojson<'a>(boundaries: impl IntoIterator<Item = &'a DistrictBoundary>) -> Value {
    let props = BoundaryProperties::default();
    let features: Vec<Value> = boundaries
        .into_iter()
        .map(|b| {
            let mut p = Map::new();
            p.insert(props.code.clone(), json!(b.code));
            p.insert(props.district_name.clone(), json!(b.district_name));
            p.insert(props.county_name.clone(), json!(b.county_name));
            json!({ "type": "Feature", "properties": p, "geometry": b.geometry.to_geojson() })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}
