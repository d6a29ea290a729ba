use super::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn labels(k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("x{j}")).collect()
}

/// Normal-equations solve: (XᵀX)⁻¹Xᵀy, se from s²·diag((XᵀX)⁻¹).
struct Oracle {
    beta: Vec<f64>,
    se: Vec<f64>,
    r2: f64,
}

fn oracle(cols: &[Vec<f64>], y: &[f64]) -> Oracle {
    let n = y.len();
    let k = cols.len();
    let x = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] });
    let yv = DVector::from_column_slice(y);
    let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
    let beta = &xtx_inv * x.transpose() * &yv;
    let resid = &yv - &x * &beta;
    let s2 = resid.norm_squared() / (n - k - 1) as f64;
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    Oracle {
        beta: beta.iter().copied().collect(),
        se: (0..=k).map(|j| (s2 * xtx_inv[(j, j)]).sqrt()).collect(),
        r2: 1.0 - resid.norm_squared() / tss,
    }
}

fn oracle_vif(cols: &[Vec<f64>]) -> Vec<f64> {
    (0..cols.len())
        .map(|j| {
            let others: Vec<Vec<f64>> =
                cols.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, c)| c.clone()).collect();
            1.0 / (1.0 - oracle(&others, &cols[j]).r2)
        })
        .collect()
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = rng.random_range(1..=5);
    let n = rng.random_range(k + 5..=50);
    let cols: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
    let y = (0..n)
        .map(|i| {
            1.5 + cols.iter().enumerate().map(|(j, c)| (j as f64 - 1.0) * c[i]).sum::<f64>()
                + rng.random_range(-3.0..3.0)
        })
        .collect();
    (cols, y)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn exact_line() {
    let x: Vec<f64> = (0..10).map(f64::from).collect();
    let y = x.iter().map(|v| 3.0 + 2.0 * v).collect();
    let r = ols_fit(&DesignMatrix::from_columns(labels(1), &[x], y).unwrap()).unwrap();
    assert!(close(r.terms[0].estimate, 3.0, 1e-12));
    assert!(close(r.terms[1].estimate, 2.0, 1e-12));
    assert!(close(r.r_squared, 1.0, 1e-12));
}

#[test]
fn constant_response() {
    let x: Vec<f64> = (0..8).map(|v| f64::from(v * v % 5)).collect();
    let r = ols_fit(&DesignMatrix::from_columns(labels(1), &[x], vec![4.25; 8]).unwrap()).unwrap();
    assert!(close(r.terms[0].estimate, 4.25, 1e-12));
    assert!(r.terms[1].estimate.abs() < 1e-12);
}

#[test]
fn six_row_fixture_matches_normal_equations() {
    let x1 = vec![1.0, 2.0, 4.0, 3.0, 7.0, 5.0];
    let x2 = vec![0.5, -1.0, 2.0, 3.5, 1.0, 0.0];
    let y = vec![2.1, 1.9, 6.2, 7.9, 8.8, 5.1];
    let r = ols_fit(&DesignMatrix::from_columns(labels(2), &[x1.clone(), x2.clone()], y.clone()).unwrap()).unwrap();
    let o = oracle(&[x1, x2], &y);
    for (t, (b, se)) in r.terms.iter().zip(o.beta.iter().zip(&o.se)) {
        assert!(close(t.estimate, *b, 1e-8));
        assert!(close(t.std_error, *se, 1e-8));
    }
    assert!(close(r.r_squared, o.r2, 1e-8));
}

#[test]
fn random_instances_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (cols, y) = random_instance(&mut rng);
        let r = ols_fit(&DesignMatrix::from_columns(labels(cols.len()), &cols, y.clone()).unwrap()).unwrap();
        let o = oracle(&cols, &y);
        for (j, t) in r.terms.iter().enumerate() {
            assert!(close(t.estimate, o.beta[j], 1e-8), "beta {j}");
            assert!(close(t.std_error, o.se[j], 1e-8), "se {j}");
        }
        assert!(close(r.r_squared, o.r2, 1e-8));
        for ((_, v), w) in r.vif.iter().zip(oracle_vif(&cols)) {
            assert!(close(*v, w, 1e-8));
        }
    }
}

#[test]
fn cauchy_p() {
    assert!((t_two_sided_p(1.0, 1.0) - 0.5).abs() < 1e-9);
    let analytic = 2.0 * (1.0 - (0.5 + 3f64.atan() / std::f64::consts::PI));
    assert!((t_two_sided_p(3.0, 1.0) - analytic).abs() < 1e-9);
    assert_eq!(t_two_sided_p(0.0, 7.0), 1.0);
}

#[test]
fn large_df_approaches_normal() {
    // Simpson integration of the standard normal density over [0, 1.96]
    let f = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let m = 2000;
    let h = 1.96 / m as f64;
    let s: f64 = (0..=m)
        .map(|i| {
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * f(i as f64 * h)
        })
        .sum::<f64>()
        * h
        / 3.0;
    let normal_p = 1.0 - 2.0 * s;
    assert!((t_two_sided_p(1.96, 10_000.0) - normal_p).abs() < 5e-4);
    assert!((t_two_sided_p(1.96, 10_000.0) - 0.05).abs() < 5e-4);
}

#[test]
fn stars_bands() {
    assert_eq!(stars(0.0009), "***");
    assert_eq!(stars(0.001), "**");
    assert_eq!(stars(0.0105), "*");
    assert_eq!(stars(0.05), "");
    assert_eq!(format_p(0.0105), "0.0105");
    assert_eq!(format_p(0.251), "0.251");
    assert_eq!(format_p(0.00099), "<0.001");
    assert_eq!(format_p(1.0), "1.00");
}

#[test]
fn vif_cases() {
    let a = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
    let b = vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
    let y = vec![1.0, 2.0, 3.0, 1.0, 2.0, 5.0, 1.0, 0.0];
    let v = vif(&DesignMatrix::from_columns(labels(2), &[a.clone(), b], y.clone()).unwrap()).unwrap();
    assert!(close(v[0], 1.0, 1e-12) && close(v[1], 1.0, 1e-12));
    let near: Vec<f64> = a.iter().enumerate().map(|(i, x)| x + 1e-3 * (i as f64).sin()).collect();
    let v = vif(&DesignMatrix::from_columns(labels(2), &[a, near], y).unwrap()).unwrap();
    assert!(v.iter().all(|&x| x > 1000.0));
}

#[test]
fn vif_three_predictor_fixture() {
    let cols = vec![
        vec![2.0, 4.0, 1.0, 7.0, 3.0, 9.0, 5.0, 6.0],
        vec![1.0, 3.0, 0.0, 5.0, 4.0, 6.0, 2.0, 8.0],
        vec![9.0, 2.0, 7.0, 1.0, 5.0, 3.0, 8.0, 4.0],
    ];
    let y = vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
    let v = vif(&DesignMatrix::from_columns(labels(3), &cols, y).unwrap()).unwrap();
    for (a, b) in v.iter().zip(oracle_vif(&cols)) {
        assert!(close(*a, b, 1e-10));
    }
}

#[test]
fn errors() {
    let x = vec![1.0, 2.0, 3.0];
    let e = ols_fit(&DesignMatrix::from_columns(labels(2), &[x.clone(), x.clone()], vec![1.0, 2.0, 3.0]).unwrap());
    assert!(matches!(e, Err(StatsError::TooFewRows { n: 3, .. })));
    let x: Vec<f64> = (0..6).map(f64::from).collect();
    let x2: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    let e = ols_fit(&DesignMatrix::from_columns(labels(2), &[x, x2], vec![1.0, 3.0, 2.0, 5.0, 4.0, 6.0]).unwrap());
    assert_eq!(e, Err(StatsError::RankDeficient("x2".into())));
}

#[test]
fn listwise_deletion() {
    let rows = vec![
        DesignRow { id: "a".into(), y: Some(1.0), x: vec![Some(1.0)] },
        DesignRow { id: "b".into(), y: None, x: vec![Some(2.0)] },
        DesignRow { id: "c".into(), y: Some(3.0), x: vec![None] },
        DesignRow { id: "d".into(), y: Some(f64::NAN), x: vec![Some(2.0)] },
        DesignRow { id: "e".into(), y: Some(2.0), x: vec![Some(2.5)] },
        DesignRow { id: "f".into(), y: Some(4.0), x: vec![Some(3.0)] },
    ];
    let d = DesignMatrix::new("y", labels(1), rows).unwrap();
    assert_eq!((d.n(), d.dropped_rows()), (3, 3));
    assert_eq!(d.ids(), ["a", "e", "f"]);
    assert_eq!(ols_fit(&d).unwrap().dropped_rows, 3);
}

#[test]
fn text_report_layout() {
    let x: Vec<f64> = (0..10).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| 1.0 + 0.5 * v + (v * 7.0).sin()).collect();
    let r = ols_fit(&DesignMatrix::from_columns(labels(1), &[x], y).unwrap()).unwrap();
    let mut text = Vec::new();
    write_report_text(&mut text, &r).unwrap();
    let text = String::from_utf8(text).unwrap();
    assert!(text.contains("Coef. Estimate"));
    assert!(text.lines().any(|l| l.starts_with("x1")));
    let mut csv = Vec::new();
    write_report_csv(&mut csv, &r).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn invariants(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cols, y) = random_instance(&mut rng);
        let d = DesignMatrix::from_columns(labels(cols.len()), &cols, y.clone()).unwrap();
        let r = ols_fit(&d).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.r_squared));
        prop_assert!(r.adj_r_squared <= r.r_squared);
        prop_assert!(r.vif.iter().all(|(_, v)| *v >= 1.0));
        // Xᵀe = 0 relative to |X||y|
        let scale = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ones = vec![1.0; y.len()];
        for c in std::iter::once(&ones).chain(&cols) {
            let dot: f64 = c.iter().zip(&r.residuals).map(|(a, b)| a * b).sum();
            let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(dot.abs() <= 1e-8 * cn * scale);
        }
    }

    #[test]
    fn scale_equivariance_exact(seed in any::<u64>(), m in -8i32..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cols, y) = random_instance(&mut rng);
        let d = DesignMatrix::from_columns(labels(cols.len()), &cols, y).unwrap();
        let j = rng.random_range(0..cols.len());
        let c = 2f64.powi(m);
        let a = ols_fit(&d).unwrap();
        let b = ols_fit(&d.scale_column(j, c)).unwrap();
        prop_assert_eq!(b.terms[j + 1].estimate, a.terms[j + 1].estimate / c);
        for (ta, tb) in a.terms.iter().zip(&b.terms) {
            prop_assert_eq!(ta.t_stat, tb.t_stat);
            prop_assert_eq!(ta.p_value, tb.p_value);
        }
        prop_assert_eq!(&a.vif, &b.vif);
    }

    #[test]
    fn p_monotone(t in 0.0f64..8.0, dt in 1e-3f64..4.0, df in 1u32..200) {
        let df = f64::from(df);
        prop_assert!(t_two_sided_p(t, df) > t_two_sided_p(t + dt, df));
        let p = t_two_sided_p(t, df);
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert_eq!(p, t_two_sided_p(-t, df));
    }
}
