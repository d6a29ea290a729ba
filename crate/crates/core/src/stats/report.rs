//! CSV and aligned-text renderings of a [`RegressionReport`].

use std::io::{self, Write};

use super::RegressionReport;

/// `<0.001` below a thousandth, otherwise three significant digits.
pub fn format_p(p: f64) -> String {
    if p.is_nan() {
        return "NA".into();
    }
    if p < 0.001 {
        return "<0.001".into();
    }
    let decimals = (2 - p.log10().floor() as i32).max(0) as usize;
    format!("{p:.decimals$}")
}

fn vif_of<'a>(report: &'a RegressionReport, label: &str) -> Option<&'a f64> {
    report.vif.iter().find(|(l, _)| l == label).map(|(_, v)| v)
}

/// One row per term at full precision.
pub fn write_report_csv<W: Write>(out: W, report: &RegressionReport) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["term", "estimate", "std_error", "t_stat", "p_value", "stars", "vif"])?;
    for t in &report.terms {
        let vif = vif_of(report, &t.label).map(f64::to_string).unwrap_or_default();
        w.write_record([
            t.label.clone(),
            t.estimate.to_string(),
            t.std_error.to_string(),
            t.t_stat.to_string(),
            t.p_value.to_string(),
            t.stars.to_string(),
            vif,
        ])?;
    }
    w.flush()
}

pub fn write_residuals_csv<W: Write>(out: W, report: &RegressionReport) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "residual"])?;
    for (id, r) in report.ids.iter().zip(&report.residuals) {
        w.write_record([id.clone(), r.to_string()])?;
    }
    w.flush()
}

/// Table layout: estimate, p-value with stars, VIF.
pub fn write_report_text<W: Write>(mut out: W, report: &RegressionReport) -> io::Result<()> {
    let rows: Vec<[String; 5]> = report
        .terms
        .iter()
        .map(|t| {
            let p = format_p(t.p_value);
            [
                t.label.clone(),
                format!("{:.5}", t.estimate),
                format!("{:.5}", t.std_error),
                if t.stars.is_empty() { p } else { format!("{} {p}", t.stars) },
                vif_of(report, &t.label).map(|v| format!("{v:.3}")).unwrap_or_default(),
            ]
        })
        .collect();
    let head = ["Variable", "Coef. Estimate", "Std. Error", "P-value", "VIF"];
    let mut width = head.map(|h| h.chars().count());
    for r in &rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    writeln!(out, "Response: {}", report.response)?;
    writeln!(
        out,
        "n = {} (dropped {}), R² = {:.4}, adj. R² = {:.4}, residual SE = {:.4} on {} df",
        report.n_used, report.dropped_rows, report.r_squared, report.adj_r_squared, report.sigma, report.df_resid
    )?;
    writeln!(out)?;
    let line = |cells: &[String; 5]| {
        let mut s = format!("{:<w$}", cells[0], w = width[0]);
        for (c, w) in cells.iter().zip(width).skip(1) {
            s.push_str(&format!("  {c:>w$}"));
        }
        s.trim_end().to_string()
    };
    writeln!(out, "{}", line(&head.map(String::from)))?;
    for r in &rows {
        writeln!(out, "{}", line(r))?;
    }
    writeln!(out)?;
    writeln!(out, "Signif.: *** p<0.001, ** p<0.01, * p<0.05")
}
