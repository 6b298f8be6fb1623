//! Property tests for the hull queries against exact test-side geometry.

mod common;

use mixshift::dataset::AffineMap;
use mixshift::hull::ConvexHullModel;
use mixshift::mat::Mat;
use proptest::prelude::*;

use common::{hull_2d, signed_distance_2d};

fn model_2d(points: &[[f64; 2]]) -> ConvexHullModel {
    let rows: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
    let maps = vec![AffineMap { min: 0.0, max: 1.0 }; 2];
    ConvexHullModel::from_standardized(Mat::from_rows(&rows).unwrap(), maps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn membership_matches_polygon_oracle(
        cloud in proptest::collection::vec((-1.0_f64..1.0, -1.0_f64..1.0), 4..24),
        queries in proptest::collection::vec((-1.5_f64..1.5, -1.5_f64..1.5), 20),
    ) {
        let points: Vec<[f64; 2]> = cloud.iter().map(|&(x, y)| [x, y]).collect();
        let hull = model_2d(&points);
        let polygon = hull_2d(&points);
        for &(qx, qy) in &queries {
            let margin = signed_distance_2d(&polygon, [qx, qy]);
            if margin.abs() < 1e-6 {
                continue; // boundary band: either answer is acceptable
            }
            let member = hull.membership(&[qx, qy]).unwrap();
            prop_assert_eq!(member, margin < 0.0, "margin {} at ({}, {})", margin, qx, qy);
        }
    }

    #[test]
    fn projection_distance_matches_polygon_oracle(
        cloud in proptest::collection::vec((-1.0_f64..1.0, -1.0_f64..1.0), 4..24),
        query in (-2.0_f64..2.0, -2.0_f64..2.0),
    ) {
        let points: Vec<[f64; 2]> = cloud.iter().map(|&(x, y)| [x, y]).collect();
        let hull = model_2d(&points);
        let polygon = hull_2d(&points);
        let margin = signed_distance_2d(&polygon, [query.0, query.1]);
        let proj = hull.project(&[query.0, query.1]).unwrap();
        let expected = margin.max(0.0);
        prop_assert!((proj.distance - expected).abs() < 1e-7,
            "qp distance {} vs oracle {}", proj.distance, expected);
    }

    #[test]
    fn r_ratio_is_at_most_one(
        cloud in proptest::collection::vec((-1.0_f64..1.0, -1.0_f64..1.0), 4..20),
        shifts in proptest::collection::vec((-1.0_f64..1.0, -1.0_f64..1.0), 1..8),
    ) {
        let points: Vec<[f64; 2]> = cloud.iter().map(|&(x, y)| [x, y]).collect();
        let hull = model_2d(&points);
        let k = shifts.len().min(points.len());
        let observed = Mat::from_rows(
            &points[..k].iter().map(|p| p.to_vec()).collect::<Vec<_>>(),
        ).unwrap();
        let shifted_rows: Vec<Vec<f64>> = points[..k]
            .iter()
            .zip(&shifts)
            .map(|(p, &(dx, dy))| vec![p[0] + dx, p[1] + dy])
            .collect();
        let shifted = Mat::from_rows(&shifted_rows).unwrap();
        let report = hull.extrapolation_report(&observed, &shifted, 0.1, 0.1).unwrap();
        for row in &report.rows {
            prop_assert!((0.0..=1.0).contains(&row.r_ratio));
            prop_assert!(row.abs_distance >= 0.0);
            if !row.outside {
                prop_assert_eq!(row.r_ratio, 0.0);
            }
        }
    }

    #[test]
    fn projection_is_idempotent(
        cloud in proptest::collection::vec((-1.0_f64..1.0, -1.0_f64..1.0), 3..16),
        query in (-3.0_f64..3.0, -3.0_f64..3.0),
    ) {
        let points: Vec<[f64; 2]> = cloud.iter().map(|&(x, y)| [x, y]).collect();
        let hull = model_2d(&points);
        let p1 = hull.project(&[query.0, query.1]).unwrap();
        let p2 = hull.project(&p1.point).unwrap();
        prop_assert!(p2.distance <= 1e-8, "reprojection distance {}", p2.distance);
    }
}

/// A two-component cloud dense along the diagonal, halving the first
/// component: the outside fraction is pinned by the exact polygon oracle and
/// frozen. Mirrors the situation where a single-component reduction leaves
/// the joint point unsupported.
#[test]
fn diagonal_cloud_halving_fraction_is_frozen() {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2024);
    let n = 120;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let t: f64 = rng.random::<f64>();
        let jitter = 0.08 * (rng.random::<f64>() - 0.5);
        let x = (t + jitter).clamp(0.0, 1.0);
        let y = (t - jitter).clamp(0.0, 1.0);
        points.push([x, y]);
    }
    let hull = model_2d(&points);
    let polygon = hull_2d(&points);

    let observed = Mat::from_rows(&points.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap();
    let shifted_rows: Vec<Vec<f64>> = points.iter().map(|p| vec![0.5 * p[0], p[1]]).collect();
    let shifted = Mat::from_rows(&shifted_rows).unwrap();
    let report = hull.extrapolation_report(&observed, &shifted, 0.1, 0.1).unwrap();

    let oracle_outside = shifted_rows
        .iter()
        .filter(|r| signed_distance_2d(&polygon, [r[0], r[1]]) > 1e-9)
        .count();
    let got_outside = report.rows.iter().filter(|r| r.outside).count();
    assert_eq!(got_outside, oracle_outside);
    // Frozen against the oracle for this seeded cloud.
    assert_eq!(got_outside, 106);
    assert!((report.fraction_outside - 106.0 / 120.0).abs() < 1e-12);
}

/// Batch reports warm-start across rows; results must match row-by-row cold
/// projections within the QP tolerance.
#[test]
fn warm_start_matches_cold_projections() {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
    let points: Vec<[f64; 2]> =
        (0..40).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let hull = model_2d(&points);
    let observed_rows: Vec<Vec<f64>> = points[..20].iter().map(|p| p.to_vec()).collect();
    let shifted_rows: Vec<Vec<f64>> = observed_rows
        .iter()
        .map(|p| vec![p[0] + 0.8, p[1] - 0.3])
        .collect();
    let observed = Mat::from_rows(&observed_rows).unwrap();
    let shifted = Mat::from_rows(&shifted_rows).unwrap();
    let report = hull.extrapolation_report(&observed, &shifted, 0.1, 0.1).unwrap();
    for (row, shifted_row) in report.rows.iter().zip(&shifted_rows) {
        let cold = hull.project(shifted_row).unwrap();
        assert!(
            (row.abs_distance - cold.distance).abs() < 1e-9,
            "warm {} vs cold {}",
            row.abs_distance,
            cold.distance
        );
    }
}
