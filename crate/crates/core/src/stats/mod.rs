//! Ordinary least squares with classical t-test inference, R² and variance
//! inflation factors, plus the district covariate case study.

mod case_study;
mod report;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::function::beta::beta_reg;
use thiserror::Error;

pub use case_study::{default_predictors, run_case_study, CaseStudy, Predictor};
pub use report::{format_p, write_report_csv, write_report_text, write_residuals_csv};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need more than {needed} complete rows, got {n}")]
    TooFewRows { n: usize, needed: usize },
    #[error("design matrix is rank deficient at column {0:?}")]
    RankDeficient(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("covariate file shares no district with the snapshot")]
    NoOverlap,
    #[error("covariate file lacks column {0:?}")]
    MissingColumn(String),
    #[error("unreadable covariate file: {0}")]
    Covariates(String),
}

/// One observation before listwise deletion.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub id: String,
    pub y: Option<f64>,
    pub x: Vec<Option<f64>>,
}

/// Response plus `k` predictor columns; the intercept is implicit. Rows with
/// any missing or non-finite cell are dropped at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    response: String,
    labels: Vec<String>,
    ids: Vec<String>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    dropped_rows: usize,
}

impl DesignMatrix {
    pub fn new(response: impl Into<String>, labels: Vec<String>, rows: Vec<DesignRow>) -> Result<Self, StatsError> {
        let k = labels.len();
        let mut m =
            DesignMatrix { response: response.into(), labels, ids: vec![], x: vec![], y: vec![], dropped_rows: 0 };
        for row in rows {
            if row.x.len() != k {
                return Err(StatsError::ShapeMismatch(format!(
                    "row {} has {} predictors, expected {k}",
                    row.id,
                    row.x.len()
                )));
            }
            let finite = |v: &Option<f64>| v.filter(|v| v.is_finite());
            match (finite(&row.y), row.x.iter().map(finite).collect::<Option<Vec<f64>>>()) {
                (Some(y), Some(x)) => {
                    m.ids.push(row.id);
                    m.y.push(y);
                    m.x.push(x);
                }
                _ => m.dropped_rows += 1,
            }
        }
        Ok(m)
    }

    /// Builds from complete predictor columns.
    pub fn from_columns(labels: Vec<String>, columns: &[Vec<f64>], y: Vec<f64>) -> Result<Self, StatsError> {
        if columns.len() != labels.len() || columns.iter().any(|c| c.len() != y.len()) {
            return Err(StatsError::ShapeMismatch("columns and labels disagree".into()));
        }
        let rows = (0..y.len())
            .map(|i| DesignRow {
                id: (i + 1).to_string(),
                y: Some(y[i]),
                x: columns.iter().map(|c| Some(c[i])).collect(),
            })
            .collect();
        DesignMatrix::new("y", labels, rows)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.iter().map(|r| r[j]).collect()
    }

    /// Copy with predictor `j` multiplied by `c`.
    pub fn scale_column(&self, j: usize, c: f64) -> DesignMatrix {
        let mut m = self.clone();
        for r in &mut m.x {
            r[j] *= c;
        }
        m
    }

    /// `n × (k+1)` matrix with a leading column of ones.
    fn with_intercept(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.k() + 1, |i, j| if j == 0 { 1.0 } else { self.x[i][j - 1] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub label: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub stars: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionReport {
    pub response: String,
    /// Intercept first, then predictors in design order.
    pub terms: Vec<Term>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub sigma: f64,
    pub df_resid: usize,
    pub n_used: usize,
    pub dropped_rows: usize,
    /// One entry per predictor.
    pub vif: Vec<(String, f64)>,
    pub ids: Vec<String>,
    pub residuals: Vec<f64>,
}

impl RegressionReport {
    pub fn term(&self, label: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.label == label)
    }
}

pub const INTERCEPT: &str = "(Intercept)";

/// Significance stars: `***` below 0.001, `**` below 0.01, `*` below 0.05.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Two-sided p-value of a t statistic: `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x.clamp(0.0, 1.0))
}

struct Fit {
    beta: DVector<f64>,
    rinv: DMatrix<f64>,
    residuals: DVector<f64>,
}

/// Least squares through a Householder QR. Rank is judged per column
/// relative to that column's own norm, so rescaling a column never changes
/// the verdict.
fn qr_fit(x: &DMatrix<f64>, y: &DVector<f64>, label: impl Fn(usize) -> String) -> Result<Fit, StatsError> {
    let p = x.ncols();
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..p {
        let norm = x.column(j).norm();
        if norm == 0.0 || r[(j, j)].abs() <= 1e-10 * norm {
            return Err(StatsError::RankDeficient(label(j)));
        }
    }
    let qty = qr.q().transpose() * y;
    let beta = r.solve_upper_triangular(&qty).ok_or_else(|| StatsError::RankDeficient(label(p - 1)))?;
    let rinv =
        r.solve_upper_triangular(&DMatrix::identity(p, p)).ok_or_else(|| StatsError::RankDeficient(label(p - 1)))?;
    let residuals = y - x * &beta;
    Ok(Fit { beta, rinv, residuals })
}

fn centered_ss(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean) * (x - mean)).sum()
}

fn check_rows(n: usize, k: usize) -> Result<(), StatsError> {
    if n <= k + 1 {
        return Err(StatsError::TooFewRows { n, needed: k + 1 });
    }
    Ok(())
}

/// Fits `y = b0 + Σ bj xj` and reports classical inference with
/// `n − k − 1` residual degrees of freedom.
pub fn ols_fit(design: &DesignMatrix) -> Result<RegressionReport, StatsError> {
    let (n, k) = (design.n(), design.k());
    check_rows(n, k)?;
    let label = |j: usize| if j == 0 { INTERCEPT.to_string() } else { design.labels[j - 1].clone() };
    let x = design.with_intercept();
    let y = DVector::from_column_slice(&design.y);
    let fit = qr_fit(&x, &y, label)?;

    let df = n - k - 1;
    let rss = fit.residuals.norm_squared();
    let s2 = rss / df as f64;
    let terms = (0..=k)
        .map(|j| {
            let estimate = fit.beta[j];
            let std_error = (s2 * fit.rinv.row(j).norm_squared()).sqrt();
            let t_stat = if std_error > 0.0 {
                estimate / std_error
            } else if estimate == 0.0 {
                0.0
            } else {
                estimate.signum() * f64::INFINITY
            };
            let p_value = t_two_sided_p(t_stat, df as f64);
            Term { label: label(j), estimate, std_error, t_stat, p_value, stars: stars(p_value) }
        })
        .collect();

    let tss = centered_ss(&design.y);
    let r_squared = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 1.0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) as f64 / df as f64;

    Ok(RegressionReport {
        response: design.response.clone(),
        terms,
        r_squared,
        adj_r_squared: adj_r_squared.min(r_squared),
        sigma: s2.sqrt(),
        df_resid: df,
        n_used: n,
        dropped_rows: design.dropped_rows,
        vif: design.labels.iter().cloned().zip(vif(design)?).collect(),
        ids: design.ids.clone(),
        residuals: fit.residuals.iter().copied().collect(),
    })
}

/// `1/(1 − R²_j)`, with `R²_j` from regressing predictor `j` on the other
/// predictors and an intercept. Evaluated as `TSS_j / RSS_j`.
pub fn vif(design: &DesignMatrix) -> Result<Vec<f64>, StatsError> {
    let (n, k) = (design.n(), design.k());
    check_rows(n, k)?;
    let full = design.with_intercept();
    (1..=k)
        .map(|j| {
            let target = DVector::from_iterator(n, full.column(j).iter().copied());
            let others = full.clone().remove_column(j);
            let label = |c: usize| {
                let c = if c >= j { c + 1 } else { c };
                if c == 0 {
                    INTERCEPT.to_string()
                } else {
                    design.labels[c - 1].clone()
                }
            };
            let fit = qr_fit(&others, &target, label)?;
            let tss = centered_ss(target.as_slice());
            let rss = fit.residuals.norm_squared();
            if rss <= 1e-20 * tss || tss == 0.0 {
                return Err(StatsError::RankDeficient(design.labels[j - 1].clone()));
            }
            Ok((tss / rss).max(1.0))
        })
        .collect()
}

#[cfg(test)]
mod tests;
