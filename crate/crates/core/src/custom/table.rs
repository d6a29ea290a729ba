//! Parsing of uploaded `data` + `cdscode`/`leaid` tables.

use csv::StringRecord;

use super::{UploadError, UploadErrorKind};
use crate::ingest::header_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeKind {
    Cds,
    Leaid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomRow {
    pub kind: CodeKind,
    pub code: String,
    pub value: f64,
    /// LEAID cell of a file that carries both identifiers.
    pub alt_leaid: Option<String>,
    pub line: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CustomTable {
    pub rows: Vec<CustomRow>,
    /// Rows dropped because the value cell was not a finite number.
    pub skipped_values: usize,
    /// Rows dropped because the code cell was empty.
    pub skipped_codes: usize,
}

/// Left-pads an all-digit code that lost leading zeros (13 → 14 digits).
pub fn normalize_cds(text: &str) -> String {
    pad_digits(text.trim(), 14)
}

/// Left-pads an all-digit LEAID that lost leading zeros (6 → 7 digits).
pub fn normalize_leaid(text: &str) -> String {
    pad_digits(text.trim(), 7)
}

fn pad_digits(t: &str, width: usize) -> String {
    if t.len() + 1 == width && t.bytes().all(|b| b.is_ascii_digit()) {
        format!("0{t}")
    } else {
        t.to_string()
    }
}

/// Locates the `data` column and the code column (`cdscode` preferred over
/// `leaid`), case-insensitively. Other columns are ignored.
pub fn parse_custom_table(bytes: &[u8]) -> Result<CustomTable, UploadError> {
    let unreadable = |e: csv::Error| UploadError::new(UploadErrorKind::EmptyFile, format!("unreadable CSV: {e}"));
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(bytes);
    let header: StringRecord = reader.headers().map_err(unreadable)?.clone();
    if header.iter().all(|h| h.trim().is_empty()) {
        return Err(UploadError::new(UploadErrorKind::EmptyFile, "no header row"));
    }
    let data = header_index(&header, "data")
        .ok_or_else(|| UploadError::new(UploadErrorKind::MissingDataColumn, "no column named \"data\""))?;
    let cds = header_index(&header, "cdscode");
    let leaid = header_index(&header, "leaid");
    let (kind, code_idx) = match (cds, leaid) {
        (Some(i), _) => (CodeKind::Cds, i),
        (None, Some(i)) => (CodeKind::Leaid, i),
        (None, None) => {
            return Err(UploadError::new(
                UploadErrorKind::MissingCodeColumn,
                "no column named \"cdscode\" or \"leaid\"",
            ))
        }
    };
    let alt_idx = if kind == CodeKind::Cds { leaid } else { None };

    let mut table = CustomTable::default();
    for row in reader.records() {
        let row = row.map_err(unreadable)?;
        let line = row.position().map_or(1, |p| p.line());
        let cell = |i: usize| row.get(i).unwrap_or("").trim();
        if row.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let code = cell(code_idx);
        if code.is_empty() {
            table.skipped_codes += 1;
            continue;
        }
        let Some(value) = cell(data).parse::<f64>().ok().filter(|v| v.is_finite()) else {
            table.skipped_values += 1;
            continue;
        };
        table.rows.push(CustomRow {
            kind,
            code: code.to_string(),
            value,
            alt_leaid: alt_idx.map(|i| cell(i).to_string()).filter(|s| !s.is_empty()),
            line,
        });
    }
    Ok(table)
}
