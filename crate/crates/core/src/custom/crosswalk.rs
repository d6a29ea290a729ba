//! LEAID ↔ district CDS code conversion table.

use std::collections::HashMap;
use std::io::Read;

use thiserror::Error;

use super::table::{normalize_cds, normalize_leaid, CodeKind, CustomRow};
use crate::ingest::header_index;
use crate::model::{CdsCode, Leaid};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CrosswalkError {
    #[error("unreadable conversion table: {0}")]
    Unreadable(String),
    #[error("conversion table lacks column {0:?}")]
    MissingColumn(&'static str),
    #[error("line {line}: {detail}")]
    BadRow { line: u64, detail: String },
    #[error("line {line}: {detail}")]
    Conflict { line: u64, detail: String },
}

/// Bidirectional, single-valued mapping between LEAIDs and district codes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConversionTable {
    to_cds: HashMap<Leaid, CdsCode>,
    to_leaid: HashMap<CdsCode, Leaid>,
}

impl ConversionTable {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Reads a CSV with `leaid` and `cdscode` columns.
    pub fn from_csv<R: Read>(input: R) -> Result<Self, CrosswalkError> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
        let header = reader.headers().map_err(|e| CrosswalkError::Unreadable(e.to_string()))?.clone();
        let li = header_index(&header, "leaid").ok_or(CrosswalkError::MissingColumn("leaid"))?;
        let ci = header_index(&header, "cdscode").ok_or(CrosswalkError::MissingColumn("cdscode"))?;
        let mut table = ConversionTable::empty();
        for row in reader.records() {
            let row = row.map_err(|e| CrosswalkError::Unreadable(e.to_string()))?;
            let line = row.position().map_or(1, |p| p.line());
            let bad = |detail: String| CrosswalkError::BadRow { line, detail };
            let l = row.get(li).unwrap_or("").trim();
            let c = row.get(ci).unwrap_or("").trim();
            let leaid = Leaid::parse(l).map_err(|e| bad(format!("leaid {l:?}: {e}")))?;
            let cds = CdsCode::parse(c).map_err(|e| bad(format!("cdscode {c:?}: {e}")))?;
            if !cds.is_district() {
                return Err(bad(format!("{cds} is not a district-level code")));
            }
            table.insert(leaid, cds).map_err(|detail| CrosswalkError::Conflict { line, detail })?;
        }
        Ok(table)
    }

    pub fn insert(&mut self, leaid: Leaid, cds: CdsCode) -> Result<(), String> {
        match (self.to_cds.get(&leaid), self.to_leaid.get(&cds)) {
            (Some(&c), _) if c != cds => Err(format!("leaid {leaid} already maps to {c}")),
            (_, Some(&l)) if l != leaid => Err(format!("cdscode {cds} already maps to {l}")),
            _ => {
                self.to_cds.insert(leaid, cds);
                self.to_leaid.insert(cds, leaid);
                Ok(())
            }
        }
    }

    pub fn cds_for(&self, leaid: Leaid) -> Option<CdsCode> {
        self.to_cds.get(&leaid).copied()
    }

    pub fn leaid_for(&self, cds: CdsCode) -> Option<Leaid> {
        self.to_leaid.get(&cds.district_of()).copied()
    }

    pub fn len(&self) -> usize {
        self.to_cds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_cds.is_empty()
    }
}

/// District code for an uploaded row. CDS rows are normalized to district
/// level without consulting the table; LEAID rows are looked up. `None` means
/// unmatched.
pub fn to_cds(table: &ConversionTable, row: &CustomRow) -> Option<CdsCode> {
    resolve_code(table, row.kind, &row.code)
}

/// Same as [`to_cds`] for a bare code cell.
pub fn resolve_code(table: &ConversionTable, kind: CodeKind, text: &str) -> Option<CdsCode> {
    match kind {
        CodeKind::Cds => CdsCode::parse(&normalize_cds(text)).ok().map(|c| c.district_of()),
        CodeKind::Leaid => Leaid::parse(&normalize_leaid(text)).ok().and_then(|l| table.cds_for(l)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // rows mirror the public NCES/CDE crosswalk for two Alameda districts
    const TABLE: &str = "leaid,cdscode\n0601620,01611190000000\n0602820,01611270000000\n";

    fn row(kind: CodeKind, code: &str) -> CustomRow {
        CustomRow { kind, code: code.into(), value: 1.0, alt_leaid: None, line: 2 }
    }

    #[test]
    fn lookups() {
        let t = ConversionTable::from_csv(TABLE.as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(to_cds(&t, &row(CodeKind::Leaid, "0601620")).unwrap().to_string(), "01611190000000");
        assert_eq!(to_cds(&t, &row(CodeKind::Leaid, "601620")).unwrap().to_string(), "01611190000000");
        assert_eq!(to_cds(&t, &row(CodeKind::Leaid, "0699999")), None);
        assert_eq!(t.leaid_for(CdsCode::parse("01611270130229").unwrap()).unwrap().to_string(), "0602820");
    }

    #[test]
    fn cds_rows_bypass_table() {
        let empty = ConversionTable::empty();
        assert_eq!(to_cds(&empty, &row(CodeKind::Cds, "01611190000000")).unwrap().to_string(), "01611190000000");
        assert_eq!(to_cds(&empty, &row(CodeKind::Cds, "01611190130229")).unwrap().to_string(), "01611190000000");
        assert_eq!(to_cds(&empty, &row(CodeKind::Cds, "bogus")), None);
    }

    #[test]
    fn conflicts_and_bad_rows() {
        let conflict = format!("{TABLE}0601620,01611270000000\n");
        assert!(matches!(
            ConversionTable::from_csv(conflict.as_bytes()),
            Err(CrosswalkError::Conflict { line: 4, .. })
        ));
        let repeat = format!("{TABLE}0601620,01611190000000\n");
        assert_eq!(ConversionTable::from_csv(repeat.as_bytes()).unwrap().len(), 2);
        let school = "leaid,cdscode\n0601620,01611190130229\n";
        assert!(matches!(ConversionTable::from_csv(school.as_bytes()), Err(CrosswalkError::BadRow { .. })));
        assert_eq!(ConversionTable::from_csv("leaid\n".as_bytes()), Err(CrosswalkError::MissingColumn("cdscode")));
    }
}
