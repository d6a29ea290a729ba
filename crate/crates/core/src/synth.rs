//! Seeded synthetic data: small statewide snapshots, raw ingest inputs in
//! the long layout, and case-study fixtures with planted coefficients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};

use crate::ingest::{
    boundaries_to_geojson, build_snapshot, write_canonical_records, write_sites, DistrictBoundary, Geometry,
    SchoolSite, Snapshot,
};
use crate::model::{Assessment, CdsCode, FitnessRecord, Grade, ZoneCounts};
use crate::stats::{default_predictors, CaseStudy};

/// County codes and names used for generated districts.
pub const COUNTIES: [(&str, &str); 10] = [
    ("01", "Alameda"),
    ("04", "Butte"),
    ("10", "Fresno"),
    ("15", "Kern"),
    ("19", "Los Angeles"),
    ("30", "Orange"),
    ("33", "Riverside"),
    ("34", "Sacramento"),
    ("37", "San Diego"),
    ("45", "Shasta"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub districts: usize,
    pub schools_per_district: usize,
    pub years: Vec<u16>,
    pub grades: Vec<Grade>,
    /// Probability that a school cell group is suppressed.
    pub suppression_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            districts: 12,
            schools_per_district: 4,
            years: vec![2018, 2019],
            grades: Grade::ALL.to_vec(),
            suppression_rate: 0.05,
        }
    }
}

fn district_code(i: usize) -> CdsCode {
    let (county, _) = COUNTIES[i % COUNTIES.len()];
    CdsCode::parse(&format!("{county}{:05}0000000", 10_000 + i)).expect("valid code")
}

fn school_code(district: usize, s: usize) -> CdsCode {
    let d = district_code(district);
    CdsCode::parse(&format!("{}{}{:07}", d.county(), d.district(), 6_000_000 + s)).expect("valid code")
}

/// Square cell `i` of a grid laid over California's bounding box.
fn cell(i: usize, n: usize) -> (f64, f64, f64) {
    let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
    let size = 8.0 / cols as f64;
    let lon = -123.5 + size * (i % cols) as f64;
    let lat = 33.0 + size * (i / cols) as f64;
    (lon, lat, size)
}

/// `n` square district boundaries, one per grid cell.
pub fn district_grid(n: usize) -> Vec<DistrictBoundary> {
    (0..n)
        .map(|i| {
            let (lon, lat, s) = cell(i, n);
            let ring = vec![[lon, lat], [lon + s, lat], [lon + s, lat + s], [lon, lat + s], [lon, lat]];
            DistrictBoundary {
                code: district_code(i),
                district_name: format!("District {}", i + 1),
                county_name: COUNTIES[i % COUNTIES.len()].1.to_string(),
                geometry: Geometry::Polygon(vec![ring]),
            }
        })
        .collect()
}

fn split(rng: &mut ChaCha8Rng, tested: u32, p: f64) -> ZoneCounts {
    let hfz = Binomial::new(u64::from(tested), p.clamp(0.0, 1.0)).expect("valid p").sample(rng) as u32;
    let rest = tested - hfz;
    let ni = rng.random_range(0..=rest);
    ZoneCounts::new(tested, hfz, ni, rest - ni)
}

/// School and district records for every year, grade and assessment. District
/// counts are the sums of their schools' unsuppressed counts.
pub fn synthetic_snapshot(cfg: &SynthConfig) -> Snapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let boundaries = district_grid(cfg.districts);
    let mut sites = Vec::new();
    let mut records = Vec::new();
    for (d, b) in boundaries.iter().enumerate() {
        let (lon, lat, size) = cell(d, cfg.districts);
        let base: f64 = rng.random_range(0.3..0.9);
        let schools: Vec<CdsCode> = (0..cfg.schools_per_district).map(|s| school_code(d, s)).collect();
        for (s, code) in schools.iter().enumerate() {
            sites.push(SchoolSite {
                code: *code,
                name: format!("School {}-{}", d + 1, s + 1),
                address: format!("{} Main St", 100 + s),
                district_name: b.district_name.clone(),
                county_name: b.county_name.clone(),
                lon: lon + rng.random_range(0.05..0.95) * size,
                lat: lat + rng.random_range(0.05..0.95) * size,
            });
        }
        for &year in &cfg.years {
            for &grade in &cfg.grades {
                for assessment in Assessment::ALL {
                    let mut total = [0u32; 4];
                    for code in &schools {
                        let tested = rng.random_range(15..200);
                        let p = base + rng.random_range(-0.15..0.15);
                        let counts = split(&mut rng, tested, p);
                        if rng.random_bool(cfg.suppression_rate) {
                            records.push(FitnessRecord::new(*code, year, grade, assessment, ZoneCounts::suppressed()));
                            continue;
                        }
                        for (t, c) in total.iter_mut().zip([
                            counts.tested,
                            counts.hfz,
                            counts.needs_improvement,
                            counts.high_risk,
                        ]) {
                            *t += c.unwrap_or(0);
                        }
                        records.push(FitnessRecord::new(*code, year, grade, assessment, counts));
                    }
                    let counts = ZoneCounts::new(total[0], total[1], total[2], total[3]);
                    records.push(FitnessRecord::new(b.code, year, grade, assessment, counts));
                }
            }
        }
    }
    build_snapshot(records, sites, boundaries, vec![])
}

/// Raw files accepted by the ingest pipeline: canonical long-layout records
/// with the matching mapping text, a sites table and boundary GeoJSON.
#[derive(Debug, Clone, PartialEq)]
pub struct RawInputs {
    pub records_csv: String,
    pub mapping: String,
    pub sites_csv: String,
    pub boundaries_geojson: String,
}

pub const LONG_MAPPING: &str = "\
layout = long
code = entity
level = level
year = year
grade = grade
assessment = assessment
tested = tested
hfz = hfz
ni = ni
ni_hr = ni_hr
";

pub fn raw_inputs(snapshot: &Snapshot) -> RawInputs {
    let mut records = Vec::new();
    write_canonical_records(&mut records, snapshot.records()).expect("in-memory write");
    let mut sites = Vec::new();
    write_sites(&mut sites, snapshot.sites()).expect("in-memory write");
    RawInputs {
        records_csv: String::from_utf8(records).expect("utf-8"),
        mapping: LONG_MAPPING.to_string(),
        sites_csv: String::from_utf8(sites).expect("utf-8"),
        boundaries_geojson: boundaries_to_geojson(snapshot.boundaries()).to_string(),
    }
}

/// District outcomes generated as `β0 + Σ βj xj + ε` over the default
/// predictors, and the covariate file that produced them.
#[derive(Debug, Clone)]
pub struct PlantedStudy {
    pub snapshot: Snapshot,
    pub covariates_csv: String,
    pub study: CaseStudy,
    /// Intercept first, per-$10,000 for income.
    pub beta: Vec<f64>,
}

/// Coefficients in the neighbourhood of published district estimates.
pub const PLANTED_BETA: [f64; 6] = [80.0, -0.02, -0.28, -0.35, -0.34, 0.67];

/// Each district tests 100,000 students so count rounding stays far below
/// `noise_sd`.
pub fn planted_case_study(seed: u64, districts: usize, beta: &[f64], noise_sd: f64) -> PlantedStudy {
    let predictors = default_predictors();
    assert_eq!(beta.len(), predictors.len() + 1, "one coefficient per predictor plus intercept");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd).expect("valid sd");
    let ranges = [(5.0, 60.0), (10.0, 50.0), (70.0, 98.0), (1.0, 15.0), (40_000.0, 200_000.0)];
    let study = CaseStudy::new(Assessment::AerobicCapacity, 2019, Grade::Five);
    let boundaries = district_grid(districts);

    let mut csv = String::from("cdscode,");
    csv.push_str(&predictors.iter().map(|p| p.column.as_str()).collect::<Vec<_>>().join(","));
    csv.push('\n');
    let mut records = Vec::new();
    for b in &boundaries {
        let raw: Vec<f64> = ranges.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect();
        let y = beta[0]
            + raw.iter().zip(&predictors).zip(&beta[1..]).map(|((x, p), b)| b * x / p.divisor).sum::<f64>()
            + noise.sample(&mut rng);
        let tested = 100_000u32;
        let hfz = (y.clamp(0.0, 100.0) / 100.0 * f64::from(tested)).round() as u32;
        let counts = ZoneCounts::new(tested, hfz, tested - hfz, 0);
        records.push(FitnessRecord::new(b.code, study.year, study.grade, study.dep, counts));
        let cells: Vec<String> = raw.iter().map(f64::to_string).collect();
        csv.push_str(&format!("{},{}\n", b.code, cells.join(",")));
    }
    PlantedStudy {
        snapshot: build_snapshot(records, vec![], boundaries, vec![]),
        covariates_csv: csv,
        study,
        beta: beta.to_vec(),
    }
}
