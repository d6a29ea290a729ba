//! Source-file parsing, cleaning and the on-disk snapshot.

mod boundaries;
mod mapping;
mod records;
mod sites;
mod snapshot;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boundaries::{
    boundaries_to_geojson, load_boundaries, BoundaryProperties, DistrictBoundary, Geometry, Position, Ring,
};
pub use mapping::{CodeColumns, ColumnMapping, CountColumns, Layout, MappingError, YearSource, DEFAULT_SUPPRESSION};
pub use records::{explode_by_assessment, parse_records, write_canonical_records, ParsedRecords, RowTally, WideRow};
pub use sites::{load_school_sites, write_sites, SchoolSite, SITE_COLUMNS};
pub use snapshot::{
    build_snapshot, read_snapshot, sha256_hex, write_snapshot, Manifest, Snapshot, SourceDigest, SNAPSHOT_FILES,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unreadable input: {0}")]
    UnreadableStream(String),
    #[error("header is missing mapped column {0:?}")]
    HeaderMissingMappedColumn(String),
    #[error("malformed GeoJSON: {0}")]
    MalformedGeoJson(String),
    #[error("invalid column mapping: {0}")]
    Mapping(#[from] MappingError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no snapshot at {}", .0.display())]
    SnapshotMissing(PathBuf),
    #[error("malformed snapshot manifest: {0}")]
    MalformedManifest(String),
    #[error("checksum mismatch for {0}")]
    ChecksumMismatch(String),
}

impl PartialEq for IngestError {
    fn eq(&self, other: &Self) -> bool {
        use IngestError::*;
        match (self, other) {
            (UnreadableStream(a), UnreadableStream(b))
            | (HeaderMissingMappedColumn(a), HeaderMissingMappedColumn(b))
            | (MalformedGeoJson(a), MalformedGeoJson(b))
            | (MalformedManifest(a), MalformedManifest(b))
            | (ChecksumMismatch(a), ChecksumMismatch(b)) => a == b,
            (Mapping(a), Mapping(b)) => a == b,
            (SnapshotMissing(a), SnapshotMissing(b)) => a == b,
            (Io { path: a, source: x }, Io { path: b, source: y }) => a == b && x.kind() == y.kind(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IssueKind {
    SuppressedCell,
    BadNumber,
    BadCode,
    DuplicateKey,
    UnmatchedGeometry,
}

impl IssueKind {
    pub const ALL: [IssueKind; 5] = [
        IssueKind::SuppressedCell,
        IssueKind::BadNumber,
        IssueKind::BadCode,
        IssueKind::DuplicateKey,
        IssueKind::UnmatchedGeometry,
    ];
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A non-fatal problem found while ingesting. `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestIssue {
    pub source: String,
    pub line: u64,
    pub kind: IssueKind,
    pub detail: String,
}

impl fmt::Display for IngestIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.source, self.line, self.kind, self.detail)
    }
}

/// Trims and collapses internal whitespace runs to a single space.
pub fn clean_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Header lookup: trimmed, ASCII case-insensitive, tolerant of a UTF-8 BOM.
pub(crate) fn header_index(header: &csv::StringRecord, name: &str) -> Option<usize> {
    let want = name.trim();
    header.iter().position(|h| h.trim_start_matches('\u{feff}').trim().eq_ignore_ascii_case(want))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_text_collapses() {
        assert_eq!(clean_text("  Los   Angeles\tUnified \n"), "Los Angeles Unified");
        assert_eq!(clean_text(""), "");
    }

    #[test]
    fn header_lookup() {
        let h = csv::StringRecord::from(vec!["\u{feff}CDSCode", " Name "]);
        assert_eq!(header_index(&h, "cdscode"), Some(0));
        assert_eq!(header_index(&h, "name"), Some(1));
        assert_eq!(header_index(&h, "lat"), None);
    }
}
