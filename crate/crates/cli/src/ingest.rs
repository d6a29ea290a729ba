use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fitmap_core::ingest::{
    build_snapshot, load_boundaries, load_school_sites, parse_records, write_snapshot, BoundaryProperties,
    ColumnMapping, IngestIssue, IssueKind, RowTally, SourceDigest,
};

use crate::{Failure, IngestArgs};

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn read_mapping(path: &Path) -> Result<ColumnMapping, Failure> {
    let text = String::from_utf8(read(path)?).map_err(|_| Failure::input(format!("{}: not UTF-8", path.display())))?;
    ColumnMapping::parse(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn expand(patterns: &[String]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for pattern in patterns {
        let matches = glob::glob(pattern).map_err(|e| Failure::input(format!("bad pattern {pattern:?}: {e}")))?;
        let before = files.len();
        for m in matches {
            files.push(m.map_err(|e| Failure::input(e.to_string()))?);
        }
        if files.len() == before {
            return Err(Failure::input(format!("no records file matches {pattern:?}")));
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}

fn sidecar(path: &Path) -> Option<PathBuf> {
    let candidate = path.with_extension("mapping");
    candidate.is_file().then_some(candidate)
}

fn display_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn write_issues(path: &Path, issues: &[IngestIssue]) -> Result<(), Failure> {
    let fail = |e: csv::Error| Failure::input(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    w.write_record(["source", "line", "kind", "detail"]).map_err(fail)?;
    for i in issues {
        w.write_record([i.source.clone(), i.line.to_string(), i.kind.to_string(), i.detail.clone()]).map_err(fail)?;
    }
    w.flush().map_err(|e| Failure::input(e.to_string()))
}

pub fn run(args: IngestArgs) -> Result<(), Failure> {
    let default_mapping = match &args.mapping {
        Some(p) => read_mapping(p)?,
        None => ColumnMapping::canonical(),
    };
    let files = expand(&args.records)?;

    let mut records = Vec::new();
    let mut issues = Vec::new();
    let mut sources = Vec::new();
    let mut tally = RowTally::default();
    for path in &files {
        let bytes = read(path)?;
        let name = display_name(path);
        let mapping = match sidecar(path) {
            Some(m) => read_mapping(&m)?,
            None => default_mapping.clone(),
        };
        let parsed =
            parse_records(bytes.as_slice(), &name, &mapping).map_err(|e| Failure::input(format!("{name}: {e}")))?;
        tally.data_rows += parsed.tally.data_rows;
        tally.aggregate_rows += parsed.tally.aggregate_rows;
        tally.accepted += parsed.tally.accepted;
        tally.rejected += parsed.tally.rejected;
        records.extend(parsed.records);
        issues.extend(parsed.issues);
        sources.push(SourceDigest::of(name, &bytes));
    }

    let site_bytes = read(&args.sites)?;
    let site_name = display_name(&args.sites);
    let (sites, site_issues) = load_school_sites(site_bytes.as_slice(), &site_name)
        .map_err(|e| Failure::input(format!("{site_name}: {e}")))?;
    issues.extend(site_issues);
    sources.push(SourceDigest::of(site_name, &site_bytes));

    let geo_bytes = read(&args.boundaries)?;
    let geo_name = display_name(&args.boundaries);
    let props = BoundaryProperties { code: args.code_property.clone(), ..BoundaryProperties::default() };
    let (boundaries, geo_issues) =
        load_boundaries(&geo_bytes, &geo_name, &props).map_err(|e| Failure::input(format!("{geo_name}: {e}")))?;
    issues.extend(geo_issues);
    sources.push(SourceDigest::of(geo_name, &geo_bytes));

    let snapshot = build_snapshot(records, sites, boundaries, sources);
    let with_value = snapshot.records().filter(|r| r.pct_hfz.is_some()).count();
    let m = snapshot.manifest();
    for entity in &m.unmatched {
        issues.push(IngestIssue {
            source: "boundaries".into(),
            line: 0,
            kind: IssueKind::UnmatchedGeometry,
            detail: format!("no boundary for district {entity}"),
        });
    }

    let mut counts: BTreeMap<IssueKind, usize> = IssueKind::ALL.iter().map(|k| (*k, 0)).collect();
    for i in &issues {
        *counts.entry(i.kind).or_default() += 1;
    }
    println!(
        "records: {} file(s), {} data rows, {} aggregate rows skipped, {} accepted, {} rejected",
        files.len(),
        tally.data_rows,
        tally.aggregate_rows,
        tally.accepted,
        tally.rejected
    );
    println!("issues:");
    for (kind, n) in &counts {
        println!("  {:<18} {n}", kind.to_string());
    }
    if let Some(path) = &args.issues_out {
        write_issues(path, &issues)?;
    }
    if with_value == 0 {
        return Err(Failure::new(3, "no record has a usable HFZ percentage; snapshot not written"));
    }
    write_snapshot(&snapshot, &args.out).map_err(|e| Failure::input(e.to_string()))?;
    println!(
        "snapshot: {} ({} records, {} schools, {} districts, {} unmatched)",
        args.out.display(),
        m.record_count,
        m.school_entities,
        m.district_entities,
        m.unmatched.len()
    );
    Ok(())
}
