//! Column mappings: which source columns feed which canonical fields.
//!
//! The research-file layout drifts from year to year, so parsing is driven by
//! a small `key = value` text file rather than by code. Lines starting with
//! `#` are comments.
//!
//! ```text
//! layout = wide
//! code.county = CO
//! code.district = DIST
//! code.school = SCHL
//! level = Level
//! year.fixed = 2019
//! grade = Grade
//! aerobic_capacity.tested = AC_Tested
//! aerobic_capacity.hfz = AC_HFZ
//! suppress = *, N/A
//! ```

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{Assessment, FIRST_YEAR, LAST_YEAR};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MappingError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?} mapped more than once")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value for {key:?}: {detail}")]
    BadValue { line: usize, key: String, detail: String },
    #[error("required field {0:?} is not mapped")]
    Missing(String),
    #[error("conflicting keys: {0}")]
    Conflict(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodeColumns {
    /// One column carrying the full 14-digit code.
    Full(String),
    /// Separate county / district / school columns; short numeric parts are
    /// left-padded with zeros.
    Parts { county: String, district: String, school: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum YearSource {
    Column(String),
    /// Every row of the file belongs to this school year.
    Fixed(u16),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountColumns {
    pub tested: String,
    pub hfz: String,
    pub needs_improvement: Option<String>,
    pub high_risk: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Layout {
    /// One row per (entity, year, grade, assessment).
    Long { assessment: String, counts: CountColumns },
    /// One row per (entity, year, grade) carrying a column group per
    /// assessment, in [`Assessment::ALL`] order.
    Wide(Vec<(Assessment, CountColumns)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMapping {
    pub code: CodeColumns,
    /// When absent the level is inferred from the code.
    pub level: Option<String>,
    pub year: YearSource,
    pub grade: String,
    pub layout: Layout,
    /// Non-empty cell values that mark a suppressed cell. Empty cells are
    /// always treated as missing.
    pub suppression: Vec<String>,
}

pub const DEFAULT_SUPPRESSION: [&str; 2] = ["*", "N/A"];

impl ColumnMapping {
    /// The long-form schema used for snapshot `records.csv` files:
    /// `entity,level,year,grade,assessment,tested,hfz,ni,ni_hr`.
    pub fn canonical() -> Self {
        ColumnMapping {
            code: CodeColumns::Full("entity".into()),
            level: Some("level".into()),
            year: YearSource::Column("year".into()),
            grade: "grade".into(),
            layout: Layout::Long {
                assessment: "assessment".into(),
                counts: CountColumns {
                    tested: "tested".into(),
                    hfz: "hfz".into(),
                    needs_improvement: Some("ni".into()),
                    high_risk: Some("ni_hr".into()),
                },
            },
            suppression: DEFAULT_SUPPRESSION.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn is_wide(&self) -> bool {
        matches!(self.layout, Layout::Wide(_))
    }

    /// Every source column name the mapping refers to.
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        match &self.code {
            CodeColumns::Full(c) => out.push(c.as_str()),
            CodeColumns::Parts { county, district, school } => {
                out.extend([county.as_str(), district.as_str(), school.as_str()])
            }
        }
        if let Some(level) = &self.level {
            out.push(level);
        }
        if let YearSource::Column(c) = &self.year {
            out.push(c);
        }
        out.push(&self.grade);
        match &self.layout {
            Layout::Long { assessment, counts } => {
                out.push(assessment);
                out.extend(counts.iter());
            }
            Layout::Wide(groups) => {
                for (_, counts) in groups {
                    out.extend(counts.iter());
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, MappingError> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or(MappingError::Syntax { line })?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(MappingError::Syntax { line });
            }
            if !is_known_key(&key) {
                return Err(MappingError::UnknownKey { line, key });
            }
            if entries.contains_key(&key) {
                return Err(MappingError::DuplicateKey { line, key });
            }
            entries.insert(key, (line, value.trim().to_string()));
        }
        Self::from_entries(entries)
    }

    fn from_entries(mut e: BTreeMap<String, (usize, String)>) -> Result<Self, MappingError> {
        // suppression list may legitimately be empty
        let suppression = match e.remove("suppress") {
            None => DEFAULT_SUPPRESSION.iter().map(|s| s.to_string()).collect(),
            Some((_, v)) => v.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::to_string).collect(),
        };
        let layout_kind = e.remove("layout");
        let fixed_year = e.remove("year.fixed");
        let mut take = |key: &str| -> Result<Option<String>, MappingError> {
            match e.remove(key) {
                None => Ok(None),
                Some((line, v)) if v.is_empty() => {
                    Err(MappingError::BadValue { line, key: key.to_string(), detail: "empty column name".into() })
                }
                Some((_, v)) => Ok(Some(v)),
            }
        };
        let required = |v: Option<String>, key: &str| v.ok_or_else(|| MappingError::Missing(key.to_string()));

        let full = take("code")?;
        let parts = (take("code.county")?, take("code.district")?, take("code.school")?);
        let code = match (full, parts) {
            (Some(c), (None, None, None)) => CodeColumns::Full(c),
            (None, (Some(county), Some(district), Some(school))) => CodeColumns::Parts { county, district, school },
            (None, (None, None, None)) => return Err(MappingError::Missing("code".into())),
            (Some(_), _) => return Err(MappingError::Conflict("`code` and `code.*` both mapped".into())),
            (None, _) => return Err(MappingError::Missing("code.county, code.district and code.school".into())),
        };

        let level = take("level")?;
        let year = match (take("year")?, fixed_year) {
            (Some(c), None) => YearSource::Column(c),
            (None, Some((line, v))) => {
                let y: u16 = v.parse().map_err(|_| MappingError::BadValue {
                    line,
                    key: "year.fixed".into(),
                    detail: format!("{v:?} is not a year"),
                })?;
                if !(FIRST_YEAR..=LAST_YEAR).contains(&y) {
                    return Err(MappingError::BadValue {
                        line,
                        key: "year.fixed".into(),
                        detail: format!("{y} outside {FIRST_YEAR}-{LAST_YEAR}"),
                    });
                }
                YearSource::Fixed(y)
            }
            (None, None) => return Err(MappingError::Missing("year".into())),
            (Some(_), Some(_)) => return Err(MappingError::Conflict("`year` and `year.fixed` both mapped".into())),
        };
        let grade = required(take("grade")?, "grade")?;

        let wide = match layout_kind {
            None => false,
            Some((_, v)) if v.eq_ignore_ascii_case("long") => false,
            Some((_, v)) if v.eq_ignore_ascii_case("wide") => true,
            Some((line, v)) => {
                return Err(MappingError::BadValue {
                    line,
                    key: "layout".into(),
                    detail: format!("{v:?}; expected long or wide"),
                })
            }
        };

        let layout = if wide {
            let mut groups = Vec::new();
            for a in Assessment::ALL {
                let t = a.token();
                let tested = take(&format!("{t}.tested"))?;
                let hfz = take(&format!("{t}.hfz"))?;
                let ni = take(&format!("{t}.ni"))?;
                let ni_hr = take(&format!("{t}.ni_hr"))?;
                match (tested, hfz) {
                    (Some(tested), Some(hfz)) => {
                        groups.push((a, CountColumns { tested, hfz, needs_improvement: ni, high_risk: ni_hr }))
                    }
                    (None, None) if ni.is_none() && ni_hr.is_none() => {}
                    _ => return Err(MappingError::Missing(format!("{t}.tested and {t}.hfz"))),
                }
            }
            if groups.is_empty() {
                return Err(MappingError::Missing("at least one <assessment>.tested/.hfz group".into()));
            }
            Layout::Wide(groups)
        } else {
            let assessment = required(take("assessment")?, "assessment")?;
            let counts = CountColumns {
                tested: required(take("tested")?, "tested")?,
                hfz: required(take("hfz")?, "hfz")?,
                needs_improvement: take("ni")?,
                high_risk: take("ni_hr")?,
            };
            Layout::Long { assessment, counts }
        };

        if let Some((key, (line, _))) = e.into_iter().next() {
            let detail = if wide { "not used by the wide layout" } else { "not used by the long layout" };
            return Err(MappingError::BadValue { line, key, detail: detail.into() });
        }

        Ok(ColumnMapping { code, level, year, grade, layout, suppression })
    }
}

impl CountColumns {
    fn iter(&self) -> impl Iterator<Item = &str> {
        [Some(&self.tested), Some(&self.hfz), self.needs_improvement.as_ref(), self.high_risk.as_ref()]
            .into_iter()
            .flatten()
            .map(String::as_str)
    }
}

fn is_known_key(key: &str) -> bool {
    const PLAIN: [&str; 15] = [
        "layout",
        "code",
        "code.county",
        "code.district",
        "code.school",
        "level",
        "year",
        "year.fixed",
        "grade",
        "assessment",
        "tested",
        "hfz",
        "ni",
        "ni_hr",
        "suppress",
    ];
    if PLAIN.contains(&key) {
        return true;
    }
    match key.split_once('.') {
        Some((a, field)) => {
            Assessment::ALL.iter().any(|x| x.token() == a) && matches!(field, "tested" | "hfz" | "ni" | "ni_hr")
        }
        None => false,
    }
}
