//! School-site directory loading.

use std::collections::HashMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{clean_text, header_index, IngestError, IngestIssue, IssueKind};
use crate::model::CdsCode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchoolSite {
    pub code: CdsCode,
    pub name: String,
    pub address: String,
    pub district_name: String,
    pub county_name: String,
    pub lon: f64,
    pub lat: f64,
}

pub const SITE_COLUMNS: [&str; 7] = ["cdscode", "name", "address", "district_name", "county_name", "lon", "lat"];

/// Loads the school directory. Rows with bad codes or out-of-range
/// coordinates are dropped with an issue; duplicate codes keep the last row.
pub fn load_school_sites<R: Read>(input: R, source: &str) -> Result<(Vec<SchoolSite>, Vec<IngestIssue>), IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = reader.headers().map_err(|e| IngestError::UnreadableStream(e.to_string()))?.clone();
    let idx: Vec<usize> = SITE_COLUMNS
        .iter()
        .map(|c| header_index(&header, c).ok_or_else(|| IngestError::HeaderMissingMappedColumn(c.to_string())))
        .collect::<Result<_, _>>()?;

    let mut sites: Vec<SchoolSite> = Vec::new();
    let mut slots: HashMap<CdsCode, usize> = HashMap::new();
    let mut issues = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| IngestError::UnreadableStream(e.to_string()))?;
        let line = row.position().map_or(1, |p| p.line());
        let cell = |i: usize| row.get(idx[i]).unwrap_or("").trim();
        let mut issue = |kind, detail: String| {
            issues.push(IngestIssue { source: source.to_string(), line, kind, detail });
        };

        let code = match CdsCode::parse(cell(0)) {
            Ok(c) if !c.is_district() => c,
            Ok(c) => {
                issue(IssueKind::BadCode, format!("{c} is a district code, not a school"));
                continue;
            }
            Err(e) => {
                issue(IssueKind::BadCode, format!("{:?}: {e}", cell(0)));
                continue;
            }
        };
        let coord = |i: usize, bound: f64| cell(i).parse::<f64>().ok().filter(|v| v.is_finite() && v.abs() <= bound);
        let (Some(lon), Some(lat)) = (coord(5, 180.0), coord(6, 90.0)) else {
            issue(IssueKind::BadNumber, format!("coordinates ({}, {}) invalid or out of range", cell(5), cell(6)));
            continue;
        };
        let site = SchoolSite {
            code,
            name: clean_text(cell(1)),
            address: clean_text(cell(2)),
            district_name: clean_text(cell(3)),
            county_name: clean_text(cell(4)),
            lon,
            lat,
        };
        match slots.get(&code) {
            Some(&slot) => {
                issue(IssueKind::DuplicateKey, format!("{code}: replaced earlier row"));
                sites[slot] = site;
            }
            None => {
                slots.insert(code, sites.len());
                sites.push(site);
            }
        }
    }
    Ok((sites, issues))
}

pub fn write_sites<'a, W: std::io::Write>(
    out: W,
    sites: impl IntoIterator<Item = &'a SchoolSite>,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SITE_COLUMNS)?;
    for s in sites {
        w.write_record([
            s.code.to_string(),
            s.name.clone(),
            s.address.clone(),
            s.district_name.clone(),
            s.county_name.clone(),
            s.lon.to_string(),
            s.lat.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
