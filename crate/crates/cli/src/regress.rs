use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use fitmap_core::custom::ConversionTable;
use fitmap_core::ingest::read_snapshot;
use fitmap_core::stats::{
    run_case_study, write_report_csv, write_report_text, write_residuals_csv, CaseStudy, Predictor, StatsError,
};

use crate::{Failure, RegressArgs};

fn predictors(args: &RegressArgs) -> Result<Vec<Predictor>, Failure> {
    let mut list = if args.predictors.is_empty() {
        CaseStudy::new(args.dep.into(), args.year, args.grade).predictors
    } else {
        args.predictors
            .iter()
            .map(|p| match p.split_once('=') {
                Some((column, label)) => Predictor::new(column.trim(), label.trim()),
                None => Predictor::new(p.trim(), p.trim()),
            })
            .collect()
    };
    for d in &args.divide {
        let (column, divisor) =
            d.split_once('=').ok_or_else(|| Failure::new(64, format!("--divide {d:?}: expected column=divisor")))?;
        let divisor: f64 = divisor
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v != 0.0)
            .ok_or_else(|| Failure::new(64, format!("--divide {d:?}: divisor must be a non-zero number")))?;
        let p = list
            .iter_mut()
            .find(|p| p.column == column.trim())
            .ok_or_else(|| Failure::new(64, format!("--divide {d:?}: no such predictor")))?;
        p.divisor = divisor;
    }
    Ok(list)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_with(path: &Path, f: impl FnOnce(BufWriter<File>) -> std::io::Result<()>) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    f(BufWriter::new(file)).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn run(args: RegressArgs) -> Result<(), Failure> {
    let snapshot = read_snapshot(&args.snapshot).map_err(|e| Failure::input(e.to_string()))?;
    let covariates =
        fs::read(&args.covariates).map_err(|e| Failure::input(format!("{}: {e}", args.covariates.display())))?;
    let crosswalk = match &args.crosswalk {
        Some(path) => {
            let file = File::open(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            ConversionTable::from_csv(file).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
        }
        None => ConversionTable::empty(),
    };
    let mut study = CaseStudy::new(args.dep.into(), args.year, args.grade);
    study.predictors = predictors(&args)?;

    let report = run_case_study(&snapshot, &covariates, &study, &crosswalk).map_err(|e| match e {
        StatsError::NoOverlap | StatsError::RankDeficient(_) | StatsError::TooFewRows { .. } => {
            Failure::new(5, e.to_string())
        }
        _ => Failure::input(e.to_string()),
    })?;

    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::input(format!("{}: {e}", parent.display())))?;
    }
    write_with(&with_suffix(&args.out, ".csv"), |w| write_report_csv(w, &report))?;
    write_with(&with_suffix(&args.out, ".txt"), |w| write_report_text(w, &report))?;
    write_with(&with_suffix(&args.out, "-residuals.csv"), |w| write_residuals_csv(w, &report))?;
    write_report_text(std::io::stdout().lock(), &report).map_err(|e| Failure::new(1, e.to_string()))?;
    Ok(())
}
