//! District fitness outcomes regressed on external socioeconomic covariates.

use std::collections::BTreeMap;

use super::{ols_fit, DesignMatrix, DesignRow, RegressionReport, StatsError};
use crate::custom::{resolve_code, CodeKind, ConversionTable};
use crate::ingest::{header_index, Snapshot};
use crate::model::{Assessment, CdsCode, Grade, Level};

/// A covariate column, its report label and a divisor applied on read.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub column: String,
    pub label: String,
    pub divisor: f64,
}

impl Predictor {
    pub fn new(column: impl Into<String>, label: impl Into<String>) -> Self {
        Predictor { column: column.into(), label: label.into(), divisor: 1.0 }
    }

    pub fn per(mut self, divisor: f64) -> Self {
        self.divisor = divisor;
        self
    }
}

/// The five default predictors. Income is read in dollars and reported per
/// $10,000.
pub fn default_predictors() -> Vec<Predictor> {
    vec![
        Predictor::new("pct_non_english", "% of Population Speaking a Language Other than English at Home"),
        Predictor::new("pct_public_insurance", "% of Noninstitutionalized Civilians with Public Health Insurance"),
        Predictor::new("pct_computer", "% of Households with a Computer"),
        Predictor::new("pct_no_vehicle", "% of Occupied Housing Units with No Vehicles"),
        Predictor::new("mean_family_income", "Mean Family Income (in 10000 dollars)").per(10_000.0),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudy {
    pub dep: Assessment,
    pub year: u16,
    pub grade: Grade,
    pub predictors: Vec<Predictor>,
}

impl CaseStudy {
    pub fn new(dep: Assessment, year: u16, grade: Grade) -> Self {
        CaseStudy { dep, year, grade, predictors: default_predictors() }
    }
}

fn cell(v: Option<&str>, divisor: f64) -> Option<f64> {
    let v: f64 = v?.trim().parse().ok()?;
    Some(v / divisor)
}

/// Inner-joins district percentages for `study` with the covariate rows.
/// Codes follow the upload rules: `cdscode` wins, else `leaid` through
/// `crosswalk`. Rows outside the join are ignored; joined rows with a missing
/// value are dropped and counted. A repeated district keeps its last row.
pub fn run_case_study(
    snapshot: &Snapshot,
    covariates: &[u8],
    study: &CaseStudy,
    crosswalk: &ConversionTable,
) -> Result<RegressionReport, StatsError> {
    let bad = |e: csv::Error| StatsError::Covariates(e.to_string());
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(covariates);
    let header = reader.headers().map_err(bad)?.clone();
    let (kind, code_idx) = match (header_index(&header, "cdscode"), header_index(&header, "leaid")) {
        (Some(i), _) => (CodeKind::Cds, i),
        (None, Some(i)) => (CodeKind::Leaid, i),
        (None, None) => return Err(StatsError::MissingColumn("cdscode".into())),
    };
    let columns = study
        .predictors
        .iter()
        .map(|p| header_index(&header, &p.column).ok_or_else(|| StatsError::MissingColumn(p.column.clone())))
        .collect::<Result<Vec<_>, _>>()?;

    let mut joined: BTreeMap<CdsCode, DesignRow> = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(bad)?;
        let Some(code) = resolve_code(crosswalk, kind, row.get(code_idx).unwrap_or("")) else {
            continue;
        };
        let Some(record) = snapshot.record(code, study.year, study.grade, study.dep) else {
            continue;
        };
        debug_assert_eq!(record.level, Level::District);
        let x = columns.iter().zip(&study.predictors).map(|(&i, p)| cell(row.get(i), p.divisor)).collect();
        joined.insert(code, DesignRow { id: code.to_string(), y: record.pct_hfz, x });
    }
    if joined.is_empty() {
        return Err(StatsError::NoOverlap);
    }
    let response =
        format!("% of students in HFZ, {} (grade {}, {})", study.dep.display_name(), study.grade.number(), study.year);
    let labels = study.predictors.iter().map(|p| p.label.clone()).collect();
    let design = DesignMatrix::new(response, labels, joined.into_values().collect())?;
    ols_fit(&design)
}
