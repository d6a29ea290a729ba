//! Joining an uploaded table to district boundaries and rendering it.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::crosswalk::{to_cds, ConversionTable};
use super::table::{normalize_leaid, CodeKind, CustomTable};
use super::{UploadError, UploadErrorKind};
use crate::geo::{classify, round6, ColorClass, PALETTE};
use crate::ingest::DistrictBoundary;
use crate::model::{CdsCode, Leaid};

/// Outcome of joining rows to districts. Every parsed row lands in exactly
/// one of `matched`, `unmatched_codes` or `duplicate_rows`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinStats {
    pub rows: usize,
    pub matched: usize,
    pub unmatched_codes: Vec<String>,
    pub duplicate_rows: usize,
    pub skipped_values: usize,
    /// Rows whose `leaid` cell maps to a different district than `cdscode`.
    pub code_mismatches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomLayer {
    pub name: String,
    pub created_at: u64,
    pub join_stats: JoinStats,
    #[serde(skip)]
    pub values: BTreeMap<CdsCode, f64>,
}

/// Min–max rescaling onto 0–100 so the fixed five classes apply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerScale {
    pub min: f64,
    pub max: f64,
}

impl LayerScale {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<LayerScale> {
        values.into_iter().fold(None, |acc, v| match acc {
            None => Some(LayerScale { min: v, max: v }),
            Some(s) => Some(LayerScale { min: s.min.min(v), max: s.max.max(v) }),
        })
    }

    /// A constant layer maps to 50, the middle class.
    pub fn rescale(&self, v: f64) -> f64 {
        if self.max > self.min {
            (100.0 * (v - self.min) / (self.max - self.min)).clamp(0.0, 100.0)
        } else {
            50.0
        }
    }

    pub fn class_of(&self, v: f64) -> ColorClass {
        classify(Some(self.rescale(v))).unwrap_or(ColorClass::NO_DATA)
    }

    /// Legend entries in data units.
    pub fn legend(&self) -> Value {
        let step = (self.max - self.min) / 5.0;
        let entries: Vec<Value> = PALETTE
            .iter()
            .enumerate()
            .map(|(i, fill)| {
                let lo = self.min + step * i as f64;
                let hi = if i == 4 { self.max } else { self.min + step * (i + 1) as f64 };
                json!({"class": i, "fill": fill, "label": format!("{} – {}", short(lo), short(hi))})
            })
            .collect();
        Value::Array(entries)
    }
}

fn short(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        "0".into()
    } else {
        r.to_string()
    }
}

impl CustomLayer {
    pub fn scale(&self) -> Option<LayerScale> {
        LayerScale::of(self.values.values().copied())
    }

    /// Summary for listings, without per-district values.
    pub fn summary(&self) -> Value {
        json!({
            "name": self.name,
            "created_at": self.created_at,
            "join_stats": self.join_stats,
            "scale": self.scale(),
        })
    }
}

/// Joins parsed rows to `boundaries`. Rows whose code does not resolve to a
/// known district are unmatched; later rows for an already-matched district
/// replace the earlier value and are counted as duplicates.
pub fn build_layer(
    name: &str,
    table: &CustomTable,
    crosswalk: &ConversionTable,
    boundaries: &BTreeMap<CdsCode, DistrictBoundary>,
) -> Result<CustomLayer, UploadError> {
    if table.rows.is_empty() {
        return Err(UploadError::new(UploadErrorKind::EmptyFile, "no rows with a numeric data value"));
    }
    let mut stats = JoinStats { rows: table.rows.len(), skipped_values: table.skipped_values, ..JoinStats::default() };
    let mut values = BTreeMap::new();
    for row in &table.rows {
        let Some(code) = to_cds(crosswalk, row).filter(|c| boundaries.contains_key(c)) else {
            stats.unmatched_codes.push(row.code.clone());
            continue;
        };
        if row.kind == CodeKind::Cds {
            let via_leaid = row
                .alt_leaid
                .as_deref()
                .and_then(|l| Leaid::parse(&normalize_leaid(l)).ok())
                .and_then(|l| crosswalk.cds_for(l));
            if via_leaid.is_some_and(|c| c != code) {
                stats.code_mismatches += 1;
            }
        }
        if values.insert(code, row.value).is_some() {
            stats.duplicate_rows += 1;
        } else {
            stats.matched += 1;
        }
    }
    let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    Ok(CustomLayer { name: name.trim().to_string(), created_at, join_stats: stats, values })
}

/// One feature per boundary, coloured by the rescaled value.
pub fn layer_features(layer: &CustomLayer, boundaries: &BTreeMap<CdsCode, DistrictBoundary>) -> Value {
    let scale = layer.scale();
    let features: Vec<Value> = boundaries
        .values()
        .map(|b| {
            let v = layer.values.get(&b.code).copied();
            let class = match (v, scale) {
                (Some(v), Some(s)) => s.class_of(v),
                _ => ColorClass::NO_DATA,
            };
            json!({
                "type": "Feature",
                "geometry": b.geometry.to_geojson(),
                "properties": {
                    "cdscode": b.code,
                    "district_name": b.district_name,
                    "county_name": b.county_name,
                    "value": v.map(round6),
                    "value_label": v.map_or("No data".to_string(), |v| round6(v).to_string()),
                    "class": class.index(),
                    "fill": class.fill(),
                },
            })
        })
        .collect();
    json!({
        "type": "FeatureCollection",
        "layer": layer.summary(),
        "legend": scale.map_or(Value::Array(vec![]), |s| s.legend()),
        "features": features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::custom::parse_custom_table;
    use crate::geo::NO_DATA_FILL;
    use crate::ingest::Geometry;
    use proptest::prelude::*;

    fn boundaries(codes: &[&str]) -> BTreeMap<CdsCode, DistrictBoundary> {
        codes
            .iter()
            .map(|c| {
                let code = CdsCode::parse(c).unwrap();
                let ring = vec![[-122.0, 37.0], [-121.9, 37.0], [-121.9, 37.1], [-122.0, 37.0]];
                let b = DistrictBoundary {
                    code,
                    district_name: format!("D{c}"),
                    county_name: "Alameda".into(),
                    geometry: Geometry::Polygon(vec![ring]),
                };
                (code, b)
            })
            .collect()
    }

    const A: &str = "01611190000000";
    const B: &str = "01611270000000";

    #[test]
    fn join_counts() {
        let b = boundaries(&[A, B]);
        let csv = format!("cdscode,data\n{A},1\n{B},3\n{A},2\n19647330000000,9\n1611270000000,4\nx,1\n");
        let t = parse_custom_table(csv.as_bytes()).unwrap();
        let l = build_layer(" acs ", &t, &ConversionTable::empty(), &b).unwrap();
        assert_eq!(l.name, "acs");
        assert_eq!(l.join_stats.rows, 6);
        assert_eq!(l.join_stats.matched, 2);
        assert_eq!(l.join_stats.duplicate_rows, 2);
        assert_eq!(l.join_stats.unmatched_codes, vec!["19647330000000", "x"]);
        assert_eq!(l.values[&CdsCode::parse(A).unwrap()], 2.0);
        assert_eq!(l.values[&CdsCode::parse(B).unwrap()], 4.0);
    }

    #[test]
    fn leaid_join_and_mismatch() {
        let b = boundaries(&[A, B]);
        let cw = ConversionTable::from_csv(format!("leaid,cdscode\n0601620,{A}\n0602820,{B}\n").as_bytes()).unwrap();
        let t = parse_custom_table(b"leaid,data\n601620,5\n0602820,7\n0699999,1\n").unwrap();
        let l = build_layer("x", &t, &cw, &b).unwrap();
        assert_eq!(l.join_stats.matched, 2);
        assert_eq!(l.join_stats.unmatched_codes, vec!["0699999"]);
        let t = parse_custom_table(format!("cdscode,leaid,data\n{A},0602820,1\n{B},0602820,2\n").as_bytes()).unwrap();
        assert_eq!(build_layer("x", &t, &cw, &b).unwrap().join_stats.code_mismatches, 1);
    }

    #[test]
    fn empty_table_rejected() {
        let t = parse_custom_table(b"cdscode,data\n").unwrap();
        let e = build_layer("x", &t, &ConversionTable::empty(), &boundaries(&[A])).unwrap_err();
        assert_eq!(e.kind, UploadErrorKind::EmptyFile);
    }

    #[test]
    fn constant_layer_is_middle_class() {
        let s = LayerScale::of([7.0, 7.0]).unwrap();
        assert_eq!(s.rescale(7.0), 50.0);
        assert_eq!(s.class_of(7.0).index(), Some(2));
    }

    #[test]
    fn features_cover_all_boundaries() {
        let b = boundaries(&[A, B]);
        let t = parse_custom_table(format!("cdscode,data\n{A},10\n").as_bytes()).unwrap();
        let l = build_layer("x", &t, &ConversionTable::empty(), &b).unwrap();
        let fc = layer_features(&l, &b);
        let feats = fc["features"].as_array().unwrap();
        assert_eq!(feats.len(), 2);
        assert_eq!(feats[0]["properties"]["class"], 2);
        assert_eq!(feats[1]["properties"]["fill"], NO_DATA_FILL);
        assert_eq!(feats[1]["properties"]["value"], Value::Null);
        assert_eq!(fc["legend"].as_array().unwrap().len(), 5);
    }

    proptest! {
        #[test]
        fn rescale_bounds(vals in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
            let s = LayerScale::of(vals.iter().copied()).unwrap();
            for &v in &vals {
                let r = s.rescale(v);
                prop_assert!((0.0..=100.0).contains(&r));
                prop_assert!(s.class_of(v).index().is_some());
            }
            if s.max > s.min {
                prop_assert_eq!(s.class_of(s.max).index(), Some(4));
                prop_assert_eq!(s.class_of(s.min).index(), Some(0));
            }
        }

        #[test]
        fn join_partitions_rows(picks in proptest::collection::vec(0usize..4, 1..40)) {
            let b = boundaries(&[A, B]);
            let pool = [A, B, "19647330000000", "nope"];
            let mut csv = String::from("cdscode,data\n");
            for (i, p) in picks.iter().enumerate() {
                csv.push_str(&format!("{},{}\n", pool[*p], i));
            }
            let t = parse_custom_table(csv.as_bytes()).unwrap();
            let s = build_layer("x", &t, &ConversionTable::empty(), &b).unwrap().join_stats;
            prop_assert_eq!(s.matched + s.unmatched_codes.len() + s.duplicate_rows, s.rows);
        }
    }
}
