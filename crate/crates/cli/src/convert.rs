use std::fs::File;
use std::io::{self, Write};

use fitmap_core::custom::{normalize_cds, normalize_leaid, ConversionTable};
use fitmap_core::model::{CdsCode, Leaid};

use crate::{CodeColumn, ConvertArgs, Failure};

fn column_name(c: CodeColumn) -> &'static str {
    match c {
        CodeColumn::Leaid => "leaid",
        CodeColumn::Cdscode => "cdscode",
    }
}

fn convert(table: &ConversionTable, from: CodeColumn, text: &str) -> Option<String> {
    match from {
        CodeColumn::Leaid => {
            Leaid::parse(&normalize_leaid(text)).ok().and_then(|l| table.cds_for(l)).map(|c| c.to_string())
        }
        CodeColumn::Cdscode => {
            CdsCode::parse(&normalize_cds(text)).ok().and_then(|c| table.leaid_for(c)).map(|l| l.to_string())
        }
    }
}

/// Copies the input CSV, replacing the `from` column with a `to` column.
/// Rows without a match keep an empty cell.
pub fn run(args: ConvertArgs) -> Result<(), Failure> {
    if args.from == args.to {
        return Err(Failure::new(64, "--from and --to must differ"));
    }
    let table_file = File::open(&args.table).map_err(|e| Failure::input(format!("{}: {e}", args.table.display())))?;
    let table =
        ConversionTable::from_csv(table_file).map_err(|e| Failure::input(format!("{}: {e}", args.table.display())))?;

    let input_err = |e: csv::Error| Failure::input(format!("{}: {e}", args.input.display()));
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(&args.input).map_err(input_err)?;
    let mut header = reader.headers().map_err(input_err)?.clone();
    let from = column_name(args.from);
    let idx = header
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(from))
        .ok_or_else(|| Failure::input(format!("{}: no {from} column", args.input.display())))?;
    let renamed: Vec<String> = header
        .iter()
        .enumerate()
        .map(|(i, h)| if i == idx { column_name(args.to).to_string() } else { h.to_string() })
        .collect();
    header = csv::StringRecord::from(renamed);

    let sink: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?),
        None => Box::new(io::stdout().lock()),
    };
    let out_err = |e: csv::Error| Failure::new(1, e.to_string());
    let mut writer = csv::WriterBuilder::new().flexible(true).from_writer(sink);
    writer.write_record(&header).map_err(out_err)?;
    let (mut rows, mut unmatched) = (0usize, 0usize);
    for row in reader.records() {
        let row = row.map_err(input_err)?;
        rows += 1;
        let converted = convert(&table, args.from, row.get(idx).unwrap_or(""));
        if converted.is_none() {
            unmatched += 1;
        }
        let fields: Vec<&str> = row
            .iter()
            .enumerate()
            .map(|(i, v)| if i == idx { converted.as_deref().unwrap_or("") } else { v })
            .collect();
        writer.write_record(&fields).map_err(out_err)?;
    }
    writer.flush().map_err(|e| Failure::new(1, e.to_string()))?;
    if unmatched > 0 {
        eprintln!("warning: {unmatched} of {rows} rows had no match in {}", args.table.display());
    }
    eprintln!("converted {} of {rows} rows", rows - unmatched);
    Ok(())
}
