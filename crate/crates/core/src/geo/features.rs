//! GeoJSON assembly for the district choropleth and the school point map.

use std::collections::BTreeSet;

use serde_json::{json, Map, Value};

use super::cluster::{ClusterIndex, ClusterKind, ClusterOptions};
use super::{classify, legend, project, unproject, GeoError};
use crate::ingest::{SchoolSite, Snapshot};
use crate::model::{Assessment, Grade};

/// Filter shared by both map endpoints. An empty county list means statewide.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MapQuery {
    pub year: u16,
    pub grade: Grade,
    pub assessment: Assessment,
    pub counties: Vec<String>,
}

impl MapQuery {
    pub fn new(year: u16, grade: Grade, assessment: Assessment) -> Self {
        MapQuery { year, grade, assessment, counties: Vec::new() }
    }

    pub fn with_counties<I, S>(mut self, counties: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.counties = counties.into_iter().map(Into::into).collect();
        self
    }

    /// Canonical county names, or `None` for statewide.
    fn resolve_counties(&self, snapshot: &Snapshot) -> Result<Option<BTreeSet<String>>, GeoError> {
        if self.counties.is_empty() {
            return Ok(None);
        }
        self.counties
            .iter()
            .map(|c| snapshot.resolve_county(c).map(str::to_string).ok_or_else(|| GeoError::UnknownCounty(c.clone())))
            .collect::<Result<BTreeSet<_>, _>>()
            .map(Some)
    }
}

/// Lon/lat viewport filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bbox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl Bbox {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self, GeoError> {
        let b = Bbox { min_lon, min_lat, max_lon, max_lat };
        if [min_lon, min_lat, max_lon, max_lat].iter().any(|v| !v.is_finite()) {
            return Err(GeoError::BadBbox("non-finite coordinate".into()));
        }
        if min_lon.abs() > 180.0 || max_lon.abs() > 180.0 || min_lat.abs() > 90.0 || max_lat.abs() > 90.0 {
            return Err(GeoError::BadBbox("coordinate out of range".into()));
        }
        if min_lon > max_lon || min_lat > max_lat {
            return Err(GeoError::BadBbox("min exceeds max".into()));
        }
        Ok(b)
    }

    /// Parses `minLon,minLat,maxLon,maxLat`.
    pub fn parse(text: &str) -> Result<Self, GeoError> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(GeoError::BadBbox(format!("expected 4 numbers, got {}", parts.len())));
        }
        let mut v = [0.0; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| GeoError::BadBbox(format!("{p:?} is not a number")))?;
        }
        Bbox::new(v[0], v[1], v[2], v[3])
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        (self.min_lon..=self.max_lon).contains(&lon) && (self.min_lat..=self.max_lat).contains(&lat)
    }
}

/// Rounds to 6 decimal places for serialization.
pub fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Popup text: one decimal with a percent sign, or "No data".
pub fn value_label(pct: Option<f64>) -> String {
    match pct {
        Some(v) => format!("{v:.1}%"),
        None => "No data".to_string(),
    }
}

fn num_or_null(v: Option<f64>) -> Value {
    v.map_or(Value::Null, |x| json!(round6(x)))
}

fn class_props(props: &mut Map<String, Value>, pct: Option<f64>) -> Result<(), GeoError> {
    let class = classify(pct)?;
    props.insert("pct_hfz".into(), num_or_null(pct));
    props.insert("value_label".into(), json!(value_label(pct)));
    props.insert("class".into(), class.index().map_or(Value::Null, |i| json!(i)));
    props.insert("fill".into(), json!(class.fill()));
    Ok(())
}

/// One polygon feature per district boundary passing the county filter;
/// districts without a matching record carry a null value.
pub fn district_features(snapshot: &Snapshot, query: &MapQuery) -> Result<Value, GeoError> {
    let counties = query.resolve_counties(snapshot)?;
    let mut features = Vec::new();
    for b in snapshot.boundaries() {
        if counties.as_ref().is_some_and(|set| !set.contains(&b.county_name)) {
            continue;
        }
        let record = snapshot.record(b.code, query.year, query.grade, query.assessment);
        let pct = record.and_then(|r| r.pct_hfz);
        let mut props = Map::new();
        props.insert("cdscode".into(), json!(b.code));
        props.insert("district_name".into(), json!(b.district_name));
        props.insert("county_name".into(), json!(b.county_name));
        props.insert("tested".into(), json!(record.and_then(|r| r.counts.tested)));
        class_props(&mut props, pct)?;
        features.push(json!({ "type": "Feature", "properties": props, "geometry": b.geometry.to_geojson() }));
    }
    Ok(json!({ "type": "FeatureCollection", "features": features, "legend": legend() }))
}

/// Sites joined to their records and filtered, with the cluster hierarchy
/// built over them. Independent of zoom, so it can be cached per query.
#[derive(Debug, Clone)]
pub struct SchoolLayer {
    leaves: Vec<(SchoolSite, Option<f64>)>,
    index: ClusterIndex,
}

pub fn school_layer(
    snapshot: &Snapshot,
    query: &MapQuery,
    bbox: Option<&Bbox>,
    options: ClusterOptions,
) -> Result<SchoolLayer, GeoError> {
    let counties = query.resolve_counties(snapshot)?;
    let leaves: Vec<(SchoolSite, Option<f64>)> = snapshot
        .sites()
        .filter(|s| counties.as_ref().is_none_or(|set| set.contains(&s.county_name)))
        .filter(|s| bbox.is_none_or(|b| b.contains(s.lon, s.lat)))
        .map(|s| {
            let pct = snapshot.record(s.code, query.year, query.grade, query.assessment).and_then(|r| r.pct_hfz);
            (s.clone(), pct)
        })
        .collect();
    let points: Vec<_> = leaves.iter().map(|(s, _)| project(s.lon, s.lat)).collect();
    let index = ClusterIndex::build(&points, options)?;
    Ok(SchoolLayer { leaves, index })
}

impl SchoolLayer {
    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn index(&self) -> &ClusterIndex {
        &self.index
    }

    pub fn features(&self, zoom: i64) -> Result<Value, GeoError> {
        let nodes = self.index.clusters(zoom)?;
        let mut features = Vec::with_capacity(nodes.len());
        for node in nodes {
            let (lon, lat) = unproject(node.position);
            let mut props = Map::new();
            let coords = match node.kind {
                ClusterKind::Leaf { index } => {
                    let (site, pct) = &self.leaves[index];
                    props.insert("kind".into(), json!("school"));
                    props.insert("cdscode".into(), json!(site.code));
                    props.insert("name".into(), json!(site.name));
                    props.insert("address".into(), json!(site.address));
                    props.insert("district_name".into(), json!(site.district_name));
                    props.insert("county_name".into(), json!(site.county_name));
                    props.insert("point_count".into(), json!(1));
                    class_props(&mut props, *pct)?;
                    // leaves keep their source coordinates
                    json!([site.lon, site.lat])
                }
                ClusterKind::Cluster { id, expansion_zoom } => {
                    props.insert("kind".into(), json!("cluster"));
                    props.insert("cluster".into(), json!(true));
                    props.insert("cluster_id".into(), json!(id));
                    props.insert("point_count".into(), json!(node.count));
                    props.insert("expansion_zoom".into(), json!(expansion_zoom));
                    json!([round6(lon), round6(lat)])
                }
            };
            features.push(json!({
                "type": "Feature",
                "properties": props,
                "geometry": { "type": "Point", "coordinates": coords },
            }));
        }
        Ok(json!({ "type": "FeatureCollection", "features": features }))
    }
}

/// Sites joined to records, filtered by county and bbox, clustered at `zoom`.
pub fn school_features(
    snapshot: &Snapshot,
    query: &MapQuery,
    zoom: i64,
    bbox: Option<&Bbox>,
    options: ClusterOptions,
) -> Result<Value, GeoError> {
    if zoom < 0 || zoom > i64::from(options.max_zoom) {
        return Err(GeoError::ZoomOutOfRange { zoom, max_zoom: options.max_zoom });
    }
    school_layer(snapshot, query, bbox, options)?.features(zoom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_snapshot, DistrictBoundary, Geometry};
    use crate::model::{CdsCode, FitnessRecord, ZoneCounts};

    fn code(s: &str) -> CdsCode {
        CdsCode::parse(s).unwrap()
    }

    fn square(x: f64, y: f64) -> Geometry {
        Geometry::Polygon(vec![vec![[x, y], [x + 0.1, y], [x + 0.1, y + 0.1], [x, y + 0.1], [x, y]]])
    }

    fn site(c: &str, county: &str, lon: f64, lat: f64) -> SchoolSite {
        SchoolSite {
            code: code(c),
            name: format!("School {c}"),
            address: "1 Main St".into(),
            district_name: "D".into(),
            county_name: county.into(),
            lon,
            lat,
        }
    }

    fn fixture() -> Snapshot {
        let boundaries = vec![
            DistrictBoundary {
                code: code("30664310000000"),
                district_name: "Irvine Unified".into(),
                county_name: "Orange".into(),
                geometry: square(-117.8, 33.6),
            },
            DistrictBoundary {
                code: code("30665970000000"),
                district_name: "Newport-Mesa".into(),
                county_name: "Orange".into(),
                geometry: square(-117.9, 33.6),
            },
            DistrictBoundary {
                code: code("19647330000000"),
                district_name: "Los Angeles Unified".into(),
                county_name: "Los Angeles".into(),
                geometry: square(-118.3, 34.0),
            },
        ];
        let y = 2019;
        let aer = Assessment::AerobicCapacity;
        let records = vec![
            FitnessRecord::new(code("30664310000000"), y, Grade::Five, aer, ZoneCounts::new(2000, 1500, 500, 0)),
            FitnessRecord::new(code("19647330000000"), y, Grade::Five, aer, ZoneCounts::new(521, 337, 184, 0)),
            FitnessRecord::new(code("30665970000000"), 2018, Grade::Five, aer, ZoneCounts::new(10, 1, 9, 0)),
            FitnessRecord::new(code("30664316000001"), y, Grade::Five, aer, ZoneCounts::new(100, 85, 15, 0)),
        ];
        let sites = vec![
            site("30664316000001", "Orange", -117.80, 33.65),
            site("30664316000002", "Orange", -117.801, 33.651),
            site("19647336000003", "Los Angeles", -118.25, 34.05),
        ];
        build_snapshot(records, sites, boundaries, vec![])
    }

    fn by_code<'a>(fc: &'a Value, c: &str) -> &'a Value {
        fc["features"]
            .as_array()
            .unwrap()
            .iter()
            .find(|f| f["properties"]["cdscode"] == c)
            .map(|f| &f["properties"])
            .unwrap()
    }

    #[test]
    fn district_values_match_hand_computed() {
        let s = fixture();
        let fc = district_features(&s, &MapQuery::new(2019, Grade::Five, Assessment::AerobicCapacity)).unwrap();
        assert_eq!(fc["features"].as_array().unwrap().len(), 3);
        // 1500/2000 = 75%; 337/521 = 64.683301...
        let irvine = by_code(&fc, "30664310000000");
        assert_eq!(irvine["pct_hfz"], json!(75.0));
        assert_eq!(irvine["class"], json!(3));
        assert_eq!(irvine["value_label"], json!("75.0%"));
        let la = by_code(&fc, "19647330000000");
        assert_eq!(la["pct_hfz"], json!(64.683301));
        assert_eq!(la["value_label"], json!("64.7%"));
        // only a 2018 record: present with null value
        let nm = by_code(&fc, "30665970000000");
        assert_eq!(nm["pct_hfz"], Value::Null);
        assert_eq!(nm["class"], Value::Null);
        assert_eq!(nm["fill"], json!("#4a4a4a"));
        assert_eq!(nm["value_label"], json!("No data"));
    }

    #[test]
    fn county_filter() {
        let s = fixture();
        let q = MapQuery::new(2019, Grade::Five, Assessment::AerobicCapacity).with_counties(["orange"]);
        let fc = district_features(&s, &q).unwrap();
        let feats = fc["features"].as_array().unwrap();
        assert_eq!(feats.len(), 2);
        assert!(feats.iter().all(|f| f["properties"]["county_name"] == "Orange"));
        let bad = MapQuery::new(2019, Grade::Five, Assessment::AerobicCapacity).with_counties(["Atlantis"]);
        assert_eq!(district_features(&s, &bad), Err(GeoError::UnknownCounty("Atlantis".into())));
    }

    #[test]
    fn schools_cluster_and_leaves() {
        let s = fixture();
        let q = MapQuery::new(2019, Grade::Five, Assessment::AerobicCapacity);
        let o = ClusterOptions::default();
        let z0 = school_features(&s, &q, 0, None, o).unwrap();
        let f0 = z0["features"].as_array().unwrap();
        assert_eq!(f0.len(), 1);
        assert_eq!(f0[0]["properties"]["point_count"], json!(3));
        let top = school_features(&s, &q, 16, None, o).unwrap();
        let leaves = top["features"].as_array().unwrap();
        assert_eq!(leaves.len(), 3);
        assert!(leaves.iter().all(|f| f["properties"]["kind"] == "school"));
        let p = by_code(&top, "30664316000001");
        assert_eq!(p["pct_hfz"], json!(85.0));
        assert_eq!(p["class"], json!(4));
        assert_eq!(p["name"], json!("School 30664316000001"));
        assert_eq!(by_code(&top, "30664316000002")["fill"], json!("#4a4a4a"));
    }

    #[test]
    fn schools_bbox_and_errors() {
        let s = fixture();
        let q = MapQuery::new(2019, Grade::Five, Assessment::AerobicCapacity);
        let o = ClusterOptions::default();
        let bbox = Bbox::parse("-118.5,33.9,-118.0,34.2").unwrap();
        let fc = school_features(&s, &q, 16, Some(&bbox), o).unwrap();
        assert_eq!(fc["features"].as_array().unwrap().len(), 1);
        assert!(matches!(school_features(&s, &q, 17, None, o), Err(GeoError::ZoomOutOfRange { .. })));
        assert!(matches!(Bbox::parse("1,2,0,3"), Err(GeoError::BadBbox(_))));
        assert!(matches!(Bbox::parse("1,2,3"), Err(GeoError::BadBbox(_))));
        assert!(matches!(Bbox::parse("a,2,3,4"), Err(GeoError::BadBbox(_))));
        assert!(matches!(Bbox::parse("0,0,200,1"), Err(GeoError::BadBbox(_))));
    }

    #[test]
    fn deterministic_bytes() {
        let s = fixture();
        let q = MapQuery::new(2019, Grade::Five, Assessment::AerobicCapacity);
        for z in [0, 5, 16] {
            let a = serde_json::to_vec(&school_features(&s, &q, z, None, ClusterOptions::default()).unwrap()).unwrap();
            let b = serde_json::to_vec(&school_features(&s, &q, z, None, ClusterOptions::default()).unwrap()).unwrap();
            assert_eq!(a, b);
        }
    }
}
