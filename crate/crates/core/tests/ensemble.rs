mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use windcast::ensemble::{
    default_grid, gpr_fit, gpr_predict, grid_search, ridge_fit, ridge_predict, svr_fit, svr_predict, BlendDataset,
    BlendMethod, GridConfig,
};

#[test]
fn ridge_matches_normal_equations() {
    let mut r = rng(11);
    for case in 0..50 {
        let n = r.random_range(4..=50);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| r.random_range(0.0..50.0)).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| r.random_range(0.0..50.0)).collect();
        let alpha = f64::from(r.random_range(1..=100));
        let d = BlendDataset::new(x.clone(), y.clone()).unwrap();
        let got = ridge_fit(&d, alpha).unwrap();
        let want = ridge_oracle(&x, &y, alpha);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-8, "case {case}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn gpr_matches_dense_solve() {
    let mut r = rng(12);
    for case in 0..20 {
        let n = r.random_range(1..=10);
        let d = random_blend(&mut r, n, 4, 20.0);
        let noise = f64::from(r.random_range(1..=10)) / 10.0;
        let m = gpr_fit(&d, noise, 1.0).unwrap();
        let q: Vec<Vec<f64>> = (0..5).map(|_| (0..4).map(|_| r.random_range(-25.0..25.0)).collect()).collect();
        let (mean, sd) = standardize(&d.features);
        let z = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|row| row.iter().zip(&mean).zip(&sd).map(|((v, m), s)| (v - m) / s).collect())
                .collect()
        };
        let want = gpr_oracle(&z(&d.features), &d.targets, noise, 1.0, &z(&q));
        let got = gpr_predict(&m, &q).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-8, "case {case}: {g} vs {w}");
        }
    }
}

#[test]
fn gpr_reversion_bound_holds() {
    let mut r = rng(13);
    for _ in 0..20 {
        let d = random_blend(&mut r, 10, 4, 10.0);
        let m = gpr_fit(&d, 0.5, 1.0).unwrap();
        let l1: f64 = m.dual_coef.iter().map(|c| c.abs()).sum();
        for _ in 0..10 {
            let q: Vec<f64> = (0..4).map(|_| r.random_range(-60.0..60.0)).collect();
            let z = m.standardize(&q);
            let dist = m
                .train
                .iter()
                .map(|t| t.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min);
            let mu = gpr_predict(&m, &[q]).unwrap()[0];
            let bound = (-dist * dist / 2.0).exp() * l1;
            assert!(mu.abs() <= bound * (1.0 + 1e-12) + 1e-300, "{mu} > {bound}");
        }
    }
}

#[test]
fn svr_objective_matches_brute_force() {
    let mut r = rng(14);
    for case in 0..6 {
        let n = if case < 3 { 4 } else { 5 };
        let d = random_blend(&mut r, n, 2, 1.5);
        let c = [0.5, 1.0, 3.0][case % 3];
        let m = svr_fit(&d, c, 0.1, 0.7).unwrap();
        let oracle = svr_brute_force(&d, c, 0.1, 0.7);
        assert!((m.objective - oracle).abs() <= 1e-3, "case {case}: smo {} vs oracle {oracle}", m.objective);
    }
}

#[test]
fn svr_duplicated_points_keep_predictions() {
    let x: Vec<Vec<f64>> = (0..12).map(|i| vec![f64::from(i) / 3.0]).collect();
    let y: Vec<f64> = x.iter().map(|r| (r[0] * 1.3).sin()).collect();
    let d = BlendDataset::new(x.clone(), y.clone()).unwrap();
    let dup = BlendDataset::new(x.iter().chain(&x).cloned().collect(), y.iter().chain(&y).copied().collect()).unwrap();
    let a = svr_fit(&d, 1000.0, 0.05, 0.8).unwrap();
    let b = svr_fit(&dup, 1000.0, 0.05, 0.8).unwrap();
    let q: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i) / 10.0]).collect();
    let pa = svr_predict(&a, &q).unwrap();
    let pb = svr_predict(&b, &q).unwrap();
    for (u, v) in pa.iter().zip(&pb) {
        assert!((u - v).abs() <= 1e-2, "{u} vs {v}");
    }
}

#[test]
fn ridge_grid_search_on_linear_targets() {
    let mut r = rng(15);
    let w = [0.4, 0.3, 0.2, 0.1];
    let x: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| r.random_range(0.0..50.0)).collect()).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|row| row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + r.random_range(-1e-3..1e-3))
        .collect();
    let d = BlendDataset::new(x, y).unwrap();
    let b = grid_search(BlendMethod::Rr, &d, &default_grid(BlendMethod::Rr), &GridConfig::default()).unwrap();
    assert!(b.cv_score < 0.05, "cv {}", b.cv_score);
    assert!(b.hyper <= 5.0, "alpha {}", b.hyper);
}

fn dataset_strategy() -> impl Strategy<Value = BlendDataset> {
    (3usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(0.0f64..50.0, 4), n),
            prop::collection::vec(0.0f64..50.0, n),
        )
            .prop_map(|(x, y)| BlendDataset::new(x, y).unwrap())
    })
}

proptest! {
    #[test]
    fn ridge_norm_non_increasing_in_alpha(d in dataset_strategy(), a in 1u32..100, step in 1u32..50) {
        let norm = |w: Vec<f64>| w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let lo = norm(ridge_fit(&d, f64::from(a)).unwrap());
        let hi = norm(ridge_fit(&d, f64::from(a + step)).unwrap());
        prop_assert!(hi <= lo * (1.0 + 1e-10));
    }

    #[test]
    fn ridge_prediction_scales_linearly(d in dataset_strategy(), c in -5.0f64..5.0) {
        let w = ridge_fit(&d, 1.0).unwrap();
        let base = ridge_predict(&w, &d.features).unwrap();
        let scaled: Vec<Vec<f64>> = d.features.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        let out = ridge_predict(&w, &scaled).unwrap();
        for (o, b) in out.iter().zip(&base) {
            prop_assert!((o - c * b).abs() <= 1e-9 * (1.0 + b.abs() * c.abs()));
        }
    }
}
