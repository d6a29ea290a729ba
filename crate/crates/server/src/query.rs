//! Strict query-string parsing for the map endpoints.

use std::str::FromStr;

use fitmap_core::geo::{Bbox, MapQuery};
use fitmap_core::model::{Assessment, Grade, FIRST_YEAR, LAST_YEAR};

use crate::error::ApiError;

/// Decoded `key=value` pairs. Unknown keys are ignored; a repeated known key
/// is rejected.
#[derive(Debug, Clone, Default)]
pub struct Params(Vec<(String, String)>);

impl Params {
    pub fn parse(raw: Option<&str>) -> Params {
        Params(form_urlencoded::parse(raw.unwrap_or("").as_bytes()).into_owned().collect())
    }

    pub fn get(&self, name: &str) -> Result<Option<&str>, ApiError> {
        let mut hits = self.0.iter().filter(|(k, _)| k == name);
        let first = hits.next().map(|(_, v)| v.as_str());
        if hits.next().is_some() {
            return Err(ApiError::bad_param(format!("parameter {name:?} given more than once")));
        }
        Ok(first)
    }

    pub fn required(&self, name: &str) -> Result<&str, ApiError> {
        self.get(name)?.ok_or_else(|| ApiError::missing_param(name))
    }
}

fn parse_year(v: &str) -> Result<u16, ApiError> {
    let year: u16 = v.trim().parse().map_err(|_| ApiError::bad_param(format!("year={v:?} is not a year")))?;
    if !(FIRST_YEAR..=LAST_YEAR).contains(&year) {
        return Err(ApiError::bad_param(format!("year {year} outside {FIRST_YEAR}..={LAST_YEAR}")));
    }
    Ok(year)
}

fn parse_grade(v: &str) -> Result<Grade, ApiError> {
    v.trim()
        .parse::<u8>()
        .ok()
        .and_then(|g| Grade::try_from(g).ok())
        .ok_or_else(|| ApiError::bad_enum("grade", v, "5, 7, 9"))
}

fn parse_assessment(v: &str) -> Result<Assessment, ApiError> {
    Assessment::from_str(v.trim()).map_err(|_| {
        let allowed: Vec<&str> = Assessment::ALL.iter().map(|a| a.token()).collect();
        ApiError::bad_enum("assessment", v, &allowed.join(", "))
    })
}

/// `year`, `grade`, `assessment` (required) and `counties` (optional,
/// comma-separated).
pub fn map_query(p: &Params) -> Result<MapQuery, ApiError> {
    // report every missing parameter before judging values
    for name in ["year", "grade", "assessment"] {
        p.required(name)?;
    }
    let query = MapQuery::new(
        parse_year(p.required("year")?)?,
        parse_grade(p.required("grade")?)?,
        parse_assessment(p.required("assessment")?)?,
    );
    let counties: Vec<String> = p
        .get("counties")?
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(str::to_string)
        .collect();
    Ok(query.with_counties(counties))
}

pub fn zoom(p: &Params) -> Result<i64, ApiError> {
    let v = p.required("zoom")?;
    v.trim().parse().map_err(|_| ApiError::bad_param(format!("zoom={v:?} is not an integer")))
}

pub fn bbox(p: &Params) -> Result<Option<Bbox>, ApiError> {
    p.get("bbox")?.map(|v| Bbox::parse(v).map_err(ApiError::from)).transpose()
}

/// Stable text form of a query: counties lowercased, sorted and deduplicated.
pub fn canonical(query: &MapQuery) -> String {
    let mut counties: Vec<String> = query.counties.iter().map(|c| c.to_lowercase()).collect();
    counties.sort();
    counties.dedup();
    format!(
        "year={}&grade={}&assessment={}&counties={}",
        query.year,
        query.grade.number(),
        query.assessment.token(),
        counties.join(",")
    )
}

pub fn canonical_bbox(bbox: Option<&Bbox>) -> String {
    bbox.map_or_else(String::new, |b| format!("{},{},{},{}", b.min_lon, b.min_lat, b.max_lon, b.max_lat))
}
