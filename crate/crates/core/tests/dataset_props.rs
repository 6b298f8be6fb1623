//! Property tests for dataset standardization and rank correlations.

use mixshift::dataset::{ingest_csv_reader, CsvSchema, LongSchema};
use proptest::prelude::*;

fn one_time_csv(a: &[f64], b: &[f64]) -> (String, CsvSchema) {
    let mut csv = String::from("id,time,a1,a2,y\n");
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        csv.push_str(&format!("s{i},0,{x},{y},0\n"));
    }
    let schema = CsvSchema::Long(LongSchema {
        id: "id".into(),
        time: "time".into(),
        exposures: vec!["a1".into(), "a2".into()],
        covariates: vec![],
        censoring: None,
        outcome: "y".into(),
    });
    (csv, schema)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn standardize_then_invert_is_identity(
        values in proptest::collection::vec(-1e6_f64..1e6, 2..40),
    ) {
        let b = vec![0.0; values.len()];
        let (csv, schema) = one_time_csv(&values, &b);
        let ds = ingest_csv_reader(csv.as_bytes(), &schema).unwrap();
        let map = ds.standardize();
        let m = map.components(0)[0];
        let span = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - values.iter().cloned().fold(f64::INFINITY, f64::min);
        for &x in &values {
            let u = m.apply(x);
            prop_assert!((0.0..=1.0).contains(&u));
            prop_assert!((m.invert(u) - x).abs() <= 1e-12 * span.max(1.0));
        }
    }

    #[test]
    fn spearman_invariant_under_increasing_transform(
        values in proptest::collection::vec(-50.0_f64..50.0, 3..30),
        partner in proptest::collection::vec(-50.0_f64..50.0, 3..30),
    ) {
        let n = values.len().min(partner.len());
        let a = &values[..n];
        let b = &partner[..n];
        let (csv, schema) = one_time_csv(a, b);
        let ds = ingest_csv_reader(csv.as_bytes(), &schema).unwrap();
        let r = ds.spearman_matrix(0).unwrap().matrix.get(0, 1);

        // exp is strictly increasing, so the ranks cannot change
        let transformed: Vec<f64> = a.iter().map(|x| (x / 10.0).exp()).collect();
        let (csv2, schema2) = one_time_csv(&transformed, b);
        let ds2 = ingest_csv_reader(csv2.as_bytes(), &schema2).unwrap();
        let r2 = ds2.spearman_matrix(0).unwrap().matrix.get(0, 1);
        prop_assert!((r - r2).abs() < 1e-9, "{r} vs {r2}");
    }
}
