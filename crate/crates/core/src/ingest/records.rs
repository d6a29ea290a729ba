//! Fitness research-file parsing and restructuring.

use std::collections::HashMap;
use std::io::Read;

use super::mapping::{CodeColumns, ColumnMapping, CountColumns, Layout, YearSource};
use super::{clean_text, header_index, IngestError, IngestIssue, IssueKind};
use crate::model::{Assessment, CdsCode, FitnessRecord, Grade, Level, RecordKey, ZoneCounts, FIRST_YEAR, LAST_YEAR};

/// Outcome of parsing one research file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedRecords {
    pub records: Vec<FitnessRecord>,
    pub issues: Vec<IngestIssue>,
    pub tally: RowTally,
}

/// Accounting of the data rows of one file.
///
/// `accepted + rejected` equals the number of school- and district-level rows;
/// every rejected row carries exactly one `BadCode` or `BadNumber` issue.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RowTally {
    pub data_rows: usize,
    /// County- and state-level aggregate rows, ignored.
    pub aggregate_rows: usize,
    pub accepted: usize,
    pub rejected: usize,
}

/// A wide source row: one entity/year/grade with a count group per assessment.
#[derive(Debug, Clone, PartialEq)]
pub struct WideRow {
    pub entity: CdsCode,
    pub school_year: u16,
    pub grade: Grade,
    pub groups: Vec<(Assessment, ZoneCounts)>,
}

/// One record per mapped assessment group, in [`Assessment::ALL`] order.
pub fn explode_by_assessment(row: &WideRow) -> Vec<FitnessRecord> {
    let mut groups = row.groups.clone();
    groups.sort_by_key(|(a, _)| *a);
    groups
        .into_iter()
        .map(|(a, counts)| FitnessRecord::new(row.entity, row.school_year, row.grade, a, counts))
        .collect()
}

struct Columns {
    code: CodeIdx,
    level: Option<usize>,
    year: Option<usize>,
    grade: usize,
    layout: LayoutIdx,
}

enum CodeIdx {
    Full(usize),
    Parts(usize, usize, usize),
}

struct CountIdx {
    tested: usize,
    hfz: usize,
    ni: Option<usize>,
    ni_hr: Option<usize>,
}

enum LayoutIdx {
    Long(usize, CountIdx),
    Wide(Vec<(Assessment, CountIdx)>),
}

fn resolve(header: &csv::StringRecord, m: &ColumnMapping) -> Result<Columns, IngestError> {
    let find =
        |name: &str| header_index(header, name).ok_or_else(|| IngestError::HeaderMissingMappedColumn(name.to_string()));
    let counts = |c: &CountColumns| -> Result<CountIdx, IngestError> {
        Ok(CountIdx {
            tested: find(&c.tested)?,
            hfz: find(&c.hfz)?,
            ni: c.needs_improvement.as_deref().map(find).transpose()?,
            ni_hr: c.high_risk.as_deref().map(find).transpose()?,
        })
    };
    Ok(Columns {
        code: match &m.code {
            CodeColumns::Full(c) => CodeIdx::Full(find(c)?),
            CodeColumns::Parts { county, district, school } => {
                CodeIdx::Parts(find(county)?, find(district)?, find(school)?)
            }
        },
        level: m.level.as_deref().map(find).transpose()?,
        year: match &m.year {
            YearSource::Column(c) => Some(find(c)?),
            YearSource::Fixed(_) => None,
        },
        grade: find(&m.grade)?,
        layout: match &m.layout {
            Layout::Long { assessment, counts: c } => LayoutIdx::Long(find(assessment)?, counts(c)?),
            Layout::Wide(groups) => {
                LayoutIdx::Wide(groups.iter().map(|(a, c)| Ok((*a, counts(c)?))).collect::<Result<_, IngestError>>()?)
            }
        },
    })
}

enum Cell {
    Missing,
    Count(u32),
    Bad(String),
}

struct RowCtx<'a> {
    row: &'a csv::StringRecord,
    suppression: &'a [String],
}

impl RowCtx<'_> {
    fn text(&self, idx: usize) -> &str {
        self.row.get(idx).unwrap_or("").trim()
    }

    fn count(&self, idx: usize) -> Cell {
        let t = self.text(idx);
        if t.is_empty() || self.suppression.iter().any(|s| s == t) {
            return Cell::Missing;
        }
        match t.parse::<u32>() {
            Ok(n) => Cell::Count(n),
            Err(_) => Cell::Bad(t.to_string()),
        }
    }
}

enum RowError {
    Code(String),
    Number(String),
}

fn pad_part(text: &str, width: usize, what: &str) -> Result<String, RowError> {
    if text.is_empty() || text.len() > width || !text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(RowError::Code(format!("{what} part {text:?} is not 1-{width} digits")));
    }
    Ok(format!("{text:0>width$}"))
}

/// Parses `"2019"`, `"2018-19"` or `"2018-2019"` to the ending calendar year.
pub(crate) fn parse_school_year(text: &str) -> Option<u16> {
    let year = match text.split_once(['-', '/']) {
        None => text.trim().parse::<u16>().ok()?,
        Some((start, end)) => {
            let start: u16 = start.trim().parse().ok()?;
            let end = end.trim();
            let end_year = match end.len() {
                2 => (start / 100) * 100 + end.parse::<u16>().ok()?,
                4 => end.parse().ok()?,
                _ => return None,
            };
            let end_year = if end_year <= start && end.len() == 2 { end_year + 100 } else { end_year };
            if end_year != start + 1 {
                return None;
            }
            end_year
        }
    };
    (FIRST_YEAR..=LAST_YEAR).contains(&year).then_some(year)
}

/// Level from an explicit level cell. `Ok(None)` marks an aggregate row.
fn parse_level(text: &str) -> Result<Option<Level>, RowError> {
    match text.to_ascii_lowercase().as_str() {
        "school" | "s" => Ok(Some(Level::School)),
        "district" | "d" => Ok(Some(Level::District)),
        "county" | "c" | "state" | "t" => Ok(None),
        _ => Err(RowError::Code(format!("unknown level {text:?}"))),
    }
}

struct RowHead {
    entity: CdsCode,
    year: u16,
    grade: Grade,
}

fn parse_head(ctx: &RowCtx<'_>, cols: &Columns, mapping: &ColumnMapping) -> Result<Option<RowHead>, RowError> {
    let code_text = match cols.code {
        CodeIdx::Full(i) => ctx.text(i).to_string(),
        CodeIdx::Parts(c, d, s) => {
            let county = pad_part(ctx.text(c), 2, "county")?;
            let district = pad_part(ctx.text(d), 5, "district")?;
            let school = pad_part(ctx.text(s), 7, "school")?;
            format!("{county}{district}{school}")
        }
    };
    let entity = CdsCode::parse(&code_text).map_err(|e| RowError::Code(format!("{code_text:?}: {e}")))?;
    let level = match cols.level {
        Some(i) => match parse_level(ctx.text(i))? {
            Some(l) => l,
            None => return Ok(None),
        },
        None if entity.district() == "00000" => return Ok(None),
        None => entity.level(),
    };
    if level != entity.level() {
        return Err(RowError::Code(format!("{} level row has code {entity}", level.token())));
    }
    let year = match (&mapping.year, cols.year) {
        (YearSource::Fixed(y), _) => *y,
        (YearSource::Column(_), Some(i)) => {
            let t = ctx.text(i);
            parse_school_year(t).ok_or_else(|| RowError::Number(format!("bad school year {t:?}")))?
        }
        (YearSource::Column(_), None) => unreachable!("year column resolved with mapping"),
    };
    let grade_text = ctx.text(cols.grade);
    let grade = grade_text.parse::<Grade>().map_err(|_| RowError::Number(format!("bad grade {grade_text:?}")))?;
    Ok(Some(RowHead { entity, year, grade }))
}

/// Reads one count group. Missing cells are reported as `SuppressedCell`, bad
/// cells as `BadNumber`; zone sums exceeding `tested` blank the whole group.
fn read_group(ctx: &RowCtx<'_>, idx: &CountIdx, label: &str, mut issue: impl FnMut(IssueKind, String)) -> ZoneCounts {
    let mut suppressed = Vec::new();
    let mut bad = Vec::new();
    let mut get = |i: Option<usize>, name: &'static str| -> Option<u32> {
        match ctx.count(i?) {
            Cell::Count(n) => Some(n),
            Cell::Missing => {
                suppressed.push(name);
                None
            }
            Cell::Bad(t) => {
                bad.push(format!("{name}={t:?}"));
                None
            }
        }
    };
    let counts = ZoneCounts {
        tested: get(Some(idx.tested), "tested"),
        hfz: get(Some(idx.hfz), "hfz"),
        needs_improvement: get(idx.ni, "ni"),
        high_risk: get(idx.ni_hr, "ni_hr"),
    };
    if !bad.is_empty() {
        issue(IssueKind::BadNumber, format!("{label}: unparseable count {}", bad.join(", ")));
    }
    if !suppressed.is_empty() {
        issue(IssueKind::SuppressedCell, format!("{label}: missing {}", suppressed.join(", ")));
    }
    if !counts.is_consistent() {
        issue(IssueKind::BadNumber, format!("{label}: zone counts exceed tested"));
        return ZoneCounts::suppressed();
    }
    counts
}

/// Parses and cleans one research file under `mapping`.
///
/// Cells are trimmed; suppressed or empty count cells become missing counts;
/// duplicate keys keep the last row. The HFZ percentage is always recomputed
/// from the counts.
pub fn parse_records<R: Read>(input: R, source: &str, mapping: &ColumnMapping) -> Result<ParsedRecords, IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = reader.headers().map_err(|e| IngestError::UnreadableStream(e.to_string()))?.clone();
    let cols = resolve(&header, mapping)?;

    let mut out = ParsedRecords::default();
    let mut slots: HashMap<RecordKey, usize> = HashMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| IngestError::UnreadableStream(e.to_string()))?;
        let line = row.position().map_or(1, |p| p.line());
        out.tally.data_rows += 1;
        let ctx = RowCtx { row: &row, suppression: &mapping.suppression };
        let mut issue = |kind, detail| out.issues.push(IngestIssue { source: source.to_string(), line, kind, detail });

        let head = match parse_head(&ctx, &cols, mapping) {
            Ok(Some(h)) => h,
            Ok(None) => {
                out.tally.aggregate_rows += 1;
                continue;
            }
            Err(RowError::Code(d)) => {
                issue(IssueKind::BadCode, d);
                out.tally.rejected += 1;
                continue;
            }
            Err(RowError::Number(d)) => {
                issue(IssueKind::BadNumber, d);
                out.tally.rejected += 1;
                continue;
            }
        };

        let new_records = match &cols.layout {
            LayoutIdx::Long(a_idx, counts_idx) => {
                let token = ctx.text(*a_idx);
                let Ok(assessment) = token.parse::<Assessment>() else {
                    issue(IssueKind::BadCode, format!("unknown assessment {:?}", clean_text(token)));
                    out.tally.rejected += 1;
                    continue;
                };
                let counts = read_group(&ctx, counts_idx, assessment.token(), &mut issue);
                vec![FitnessRecord::new(head.entity, head.year, head.grade, assessment, counts)]
            }
            LayoutIdx::Wide(groups) => {
                let wide = WideRow {
                    entity: head.entity,
                    school_year: head.year,
                    grade: head.grade,
                    groups: groups.iter().map(|(a, idx)| (*a, read_group(&ctx, idx, a.token(), &mut issue))).collect(),
                };
                explode_by_assessment(&wide)
            }
        };
        out.tally.accepted += 1;

        for record in new_records {
            let key = record.key();
            match slots.get(&key) {
                Some(&slot) => {
                    issue(
                        IssueKind::DuplicateKey,
                        format!(
                            "{} {} grade {} {}: replaced earlier row",
                            key.entity, key.school_year, key.grade, key.assessment
                        ),
                    );
                    out.records[slot] = record;
                }
                None => {
                    slots.insert(key, out.records.len());
                    out.records.push(record);
                }
            }
        }
    }
    Ok(out)
}

/// Writes records in the canonical long form read by
/// [`ColumnMapping::canonical`]. Missing counts are written as empty cells.
pub fn write_canonical_records<'a, W: std::io::Write>(
    out: W,
    records: impl IntoIterator<Item = &'a FitnessRecord>,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["entity", "level", "year", "grade", "assessment", "tested", "hfz", "ni", "ni_hr"])?;
    let cell = |c: Option<u32>| c.map(|n| n.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.entity.to_string(),
            r.level.token().to_string(),
            r.school_year.to_string(),
            r.grade.to_string(),
            r.assessment.token().to_string(),
            cell(r.counts.tested),
            cell(r.counts.hfz),
            cell(r.counts.needs_improvement),
            cell(r.counts.high_risk),
        ])?;
    }
    w.flush()?;
    Ok(())
}
