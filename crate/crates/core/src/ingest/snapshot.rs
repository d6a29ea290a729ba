//! The immutable ingested database and its directory format.
//!
//! A snapshot directory holds `records.csv` (canonical long form),
//! `sites.csv`, `boundaries.geojson` and `manifest.json`. The manifest lists
//! the SHA-256 of each data file and a checksum over its own content, so any
//! edit to the directory is detected on read.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::boundaries::{boundaries_to_geojson, load_boundaries, BoundaryProperties, DistrictBoundary};
use super::mapping::ColumnMapping;
use super::records::{parse_records, write_canonical_records};
use super::sites::{load_school_sites, write_sites, SchoolSite};
use super::IngestError;
use crate::model::{pct_hfz, Assessment, CdsCode, FitnessRecord, Grade, Level, RecordKey};

pub const SNAPSHOT_FILES: [&str; 4] = ["records.csv", "sites.csv", "boundaries.geojson", "manifest.json"];
const FORMAT_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Name and SHA-256 of an input file that went into a snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDigest {
    pub name: String,
    pub sha256: String,
}

impl SourceDigest {
    pub fn of(name: impl Into<String>, bytes: &[u8]) -> Self {
        SourceDigest { name: name.into(), sha256: sha256_hex(bytes) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub years: Vec<u16>,
    pub counties: Vec<String>,
    pub record_count: usize,
    pub school_entities: usize,
    pub district_entities: usize,
    /// District codes that have records but no boundary.
    pub unmatched: Vec<CdsCode>,
    /// SHA-256 per data file.
    pub files: BTreeMap<String, String>,
    pub sources: Vec<SourceDigest>,
    /// SHA-256 of this manifest serialized with an empty `checksum`.
    pub checksum: String,
}

impl Manifest {
    fn seal(mut self) -> Self {
        self.checksum = String::new();
        let body = serde_json::to_vec(&self).expect("manifest serializes");
        self.checksum = sha256_hex(&body);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    records: BTreeMap<RecordKey, FitnessRecord>,
    sites: BTreeMap<CdsCode, SchoolSite>,
    boundaries: BTreeMap<CdsCode, DistrictBoundary>,
    manifest: Manifest,
}

/// Assembles a snapshot. Later duplicates win; each record's level and
/// percentage are re-derived from its code and counts.
pub fn build_snapshot(
    records: impl IntoIterator<Item = FitnessRecord>,
    sites: impl IntoIterator<Item = SchoolSite>,
    boundaries: impl IntoIterator<Item = DistrictBoundary>,
    sources: Vec<SourceDigest>,
) -> Snapshot {
    let records: BTreeMap<RecordKey, FitnessRecord> = records
        .into_iter()
        .map(|mut r| {
            r.level = r.entity.level();
            r.pct_hfz = pct_hfz(&r.counts);
            (r.key(), r)
        })
        .collect();
    let sites: BTreeMap<_, _> = sites.into_iter().map(|s| (s.code, s)).collect();
    let boundaries: BTreeMap<_, _> = boundaries.into_iter().map(|b| (b.code, b)).collect();

    let years: BTreeSet<u16> = records.keys().map(|k| k.school_year).collect();
    let counties: BTreeSet<String> =
        boundaries.values().map(|b| b.county_name.clone()).filter(|c| !c.is_empty()).collect();
    let entities: BTreeSet<CdsCode> = records.keys().map(|k| k.entity).collect();
    let unmatched: BTreeSet<CdsCode> =
        entities.iter().map(CdsCode::district_of).filter(|d| !boundaries.contains_key(d)).collect();

    let mut snapshot = Snapshot {
        records,
        sites,
        boundaries,
        manifest: Manifest {
            format: FORMAT_VERSION,
            years: years.into_iter().collect(),
            counties: counties.into_iter().collect(),
            record_count: 0,
            school_entities: entities.iter().filter(|e| e.level() == Level::School).count(),
            district_entities: entities.iter().filter(|e| e.level() == Level::District).count(),
            unmatched: unmatched.into_iter().collect(),
            files: BTreeMap::new(),
            sources,
            checksum: String::new(),
        },
    };
    snapshot.manifest.record_count = snapshot.records.len();
    snapshot.manifest.files =
        snapshot.data_files().into_iter().map(|(name, bytes)| (name.to_string(), sha256_hex(&bytes))).collect();
    snapshot.manifest = snapshot.manifest.clone().seal();
    snapshot
}

impl Snapshot {
    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Content checksum; changes whenever any data or manifest field does.
    pub fn checksum(&self) -> &str {
        &self.manifest.checksum
    }

    pub fn years(&self) -> &[u16] {
        &self.manifest.years
    }

    pub fn counties(&self) -> &[String] {
        &self.manifest.counties
    }

    /// Canonical spelling of a county name, matched case-insensitively.
    pub fn resolve_county(&self, name: &str) -> Option<&str> {
        let name = name.trim();
        self.manifest.counties.iter().find(|c| c.eq_ignore_ascii_case(name)).map(String::as_str)
    }

    pub fn record(
        &self,
        entity: CdsCode,
        school_year: u16,
        grade: Grade,
        assessment: Assessment,
    ) -> Option<&FitnessRecord> {
        self.records.get(&RecordKey { entity, school_year, grade, assessment })
    }

    pub fn records(&self) -> impl Iterator<Item = &FitnessRecord> {
        self.records.values()
    }

    pub fn sites(&self) -> impl Iterator<Item = &SchoolSite> {
        self.sites.values()
    }

    pub fn site(&self, code: CdsCode) -> Option<&SchoolSite> {
        self.sites.get(&code)
    }

    pub fn boundaries(&self) -> impl Iterator<Item = &DistrictBoundary> {
        self.boundaries.values()
    }

    pub fn boundary(&self, code: CdsCode) -> Option<&DistrictBoundary> {
        self.boundaries.get(&code)
    }

    pub fn boundary_map(&self) -> &BTreeMap<CdsCode, DistrictBoundary> {
        &self.boundaries
    }

    fn data_files(&self) -> [(&'static str, Vec<u8>); 3] {
        let mut records = Vec::new();
        write_canonical_records(&mut records, self.records.values()).expect("in-memory write");
        let mut sites = Vec::new();
        write_sites(&mut sites, self.sites.values()).expect("in-memory write");
        let mut boundaries = serde_json::to_vec_pretty(&boundaries_to_geojson(self.boundaries.values())).expect("json");
        boundaries.push(b'\n');
        [("records.csv", records), ("sites.csv", sites), ("boundaries.geojson", boundaries)]
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_path_buf(), source }
}

pub fn write_snapshot(snapshot: &Snapshot, dir: &Path) -> Result<(), IngestError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (name, bytes) in snapshot.data_files() {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    let path = dir.join("manifest.json");
    let mut manifest = serde_json::to_vec_pretty(&snapshot.manifest).expect("manifest serializes");
    manifest.push(b'\n');
    fs::write(&path, manifest).map_err(io_err(&path))
}

/// Reads and verifies a snapshot directory.
pub fn read_snapshot(dir: &Path) -> Result<Snapshot, IngestError> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.is_file() {
        return Err(IngestError::SnapshotMissing(dir.to_path_buf()));
    }
    let raw = fs::read(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest = serde_json::from_slice(&raw).map_err(|e| IngestError::MalformedManifest(e.to_string()))?;
    if manifest.clone().seal().checksum != manifest.checksum {
        return Err(IngestError::ChecksumMismatch("manifest.json".into()));
    }

    let mut contents = BTreeMap::new();
    for name in &SNAPSHOT_FILES[..3] {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if manifest.files.get(*name).map(String::as_str) != Some(sha256_hex(&bytes).as_str()) {
            return Err(IngestError::ChecksumMismatch(name.to_string()));
        }
        contents.insert(*name, bytes);
    }

    let parsed = parse_records(contents["records.csv"].as_slice(), "records.csv", &ColumnMapping::canonical())?;
    let (sites, _) = load_school_sites(contents["sites.csv"].as_slice(), "sites.csv")?;
    let (boundaries, _) =
        load_boundaries(&contents["boundaries.geojson"], "boundaries.geojson", &BoundaryProperties::default())?;
    let snapshot = build_snapshot(parsed.records, sites, boundaries, manifest.sources.clone());
    if snapshot.manifest != manifest {
        return Err(IngestError::ChecksumMismatch("manifest.json".into()));
    }
    Ok(snapshot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Geometry;
    use crate::model::ZoneCounts;

    fn code(s: &str) -> CdsCode {
        CdsCode::parse(s).unwrap()
    }

    fn fixture() -> Snapshot {
        let square = vec![vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]];
        let boundary = DistrictBoundary {
            code: code("01611190000000"),
            district_name: "Oakland Unified".into(),
            county_name: "Alameda".into(),
            geometry: Geometry::Polygon(square),
        };
        let site = SchoolSite {
            code: code("01611190130229"),
            name: "Lincoln".into(),
            address: "1 Main St".into(),
            district_name: "Oakland Unified".into(),
            county_name: "Alameda".into(),
            lon: 0.5,
            lat: 0.25,
        };
        let records = vec![
            FitnessRecord::new(
                code("01611190130229"),
                2019,
                Grade::Five,
                Assessment::AerobicCapacity,
                ZoneCounts::new(521, 337, 180, 4),
            ),
            FitnessRecord::new(
                code("01611190000000"),
                2019,
                Grade::Five,
                Assessment::AerobicCapacity,
                ZoneCounts::suppressed(),
            ),
            FitnessRecord::new(
                code("19647330000000"),
                2018,
                Grade::Seven,
                Assessment::TrunkLift,
                ZoneCounts::new(10, 3, 7, 0),
            ),
        ];
        build_snapshot(records, vec![site], vec![boundary], vec![SourceDigest::of("in.csv", b"abc")])
    }

    #[test]
    fn manifest_contents() {
        let s = fixture();
        let m = s.manifest();
        assert_eq!(m.years, vec![2018, 2019]);
        assert_eq!(m.counties, vec!["Alameda"]);
        assert_eq!(m.unmatched, vec![code("19647330000000")]);
        assert_eq!(m.school_entities, 1);
        assert_eq!(m.district_entities, 2);
        assert_eq!(m.record_count, 3);
        assert_eq!(s.resolve_county("ALAMEDA"), Some("Alameda"));
    }

    #[test]
    fn write_read_round_trip() {
        let s = fixture();
        let dir = tempfile::tempdir().unwrap();
        write_snapshot(&s, dir.path()).unwrap();
        for f in SNAPSHOT_FILES {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let back = read_snapshot(dir.path()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.checksum(), s.checksum());
    }

    #[test]
    fn tampering_detected() {
        let s = fixture();
        let dir = tempfile::tempdir().unwrap();
        write_snapshot(&s, dir.path()).unwrap();
        let sites = dir.path().join("sites.csv");
        let text = fs::read_to_string(&sites).unwrap().replace("Lincoln", "Lincon");
        fs::write(&sites, text).unwrap();
        assert_eq!(read_snapshot(dir.path()).unwrap_err(), IngestError::ChecksumMismatch("sites.csv".into()));

        write_snapshot(&s, dir.path()).unwrap();
        let manifest = dir.path().join("manifest.json");
        let text = fs::read_to_string(&manifest).unwrap().replace("2018", "2017");
        fs::write(&manifest, text).unwrap();
        assert_eq!(read_snapshot(dir.path()).unwrap_err(), IngestError::ChecksumMismatch("manifest.json".into()));

        fs::write(&manifest, "{ not json").unwrap();
        assert!(matches!(read_snapshot(dir.path()), Err(IngestError::MalformedManifest(_))));
    }

    #[test]
    fn missing_directory() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_snapshot(dir.path()), Err(IngestError::SnapshotMissing(_))));
    }

    #[test]
    fn inconsistent_percentages_recomputed() {
        let mut r = FitnessRecord::new(
            code("01611190130229"),
            2019,
            Grade::Five,
            Assessment::Flexibility,
            ZoneCounts::new(4, 1, 3, 0),
        );
        r.pct_hfz = Some(99.0);
        let s = build_snapshot(vec![r], vec![], vec![], vec![]);
        assert_eq!(s.records().next().unwrap().pct_hfz, Some(25.0));
    }
}
