//! Influence-function arithmetic: contrasts of estimates, Wald intervals,
//! and the additive-scale interaction test.
//!
//! Estimates combine by adding or subtracting their per-subject influence
//! values, so the variance of any composite respects the joint dependence
//! across estimates computed on the same subjects.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::EstimandEstimate;
use crate::mat::sample_variance;

/// Wald summary of an estimate: normal-quantile 95% interval and two-sided
/// p-value for the zero null.
#[derive(Debug, Clone, Serialize)]
pub struct WaldResult {
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub z: f64,
    pub p_value: f64,
    /// True when the influence values have zero variance; the interval is a
    /// point and the p-value degenerates.
    pub degenerate: bool,
    /// Whether the 95% interval excludes zero.
    pub reject_at_05: bool,
}

/// Sum of two estimates with joint-variance propagation.
pub fn if_add(a: &EstimandEstimate, b: &EstimandEstimate) -> Result<EstimandEstimate> {
    a.checked_add(b)
}

/// Difference of two estimates with joint-variance propagation.
pub fn if_sub(a: &EstimandEstimate, b: &EstimandEstimate) -> Result<EstimandEstimate> {
    a.checked_sub(b)
}

/// Wald interval and test from the influence values.
pub fn wald(e: &EstimandEstimate) -> Result<WaldResult> {
    if e.n() < 2 {
        return Err(Error::Validation("Wald inference needs at least two subjects".into()));
    }
    let se = (sample_variance(&e.eif) / e.n() as f64).sqrt();
    let degenerate = se == 0.0;
    let z = if degenerate { 0.0 } else { e.value / se };
    let p_value = if degenerate {
        if e.value == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        2.0 * normal_cdf(-z.abs())
    };
    let ci_lo = e.value - 1.96 * se;
    let ci_hi = e.value + 1.96 * se;
    Ok(WaldResult {
        estimate: e.value,
        se,
        ci_lo,
        ci_hi,
        z,
        p_value,
        degenerate,
        reject_at_05: !(ci_lo <= 0.0 && 0.0 <= ci_hi),
    })
}

/// Additive-scale interaction test: the statistic
/// `joint - single_b - single_a + observed` with its variance taken from the
/// sample variance of the combined influence values. The null of no
/// interaction is rejected at the 5% level when the interval excludes zero.
pub fn interaction_test(
    joint: &EstimandEstimate,
    single_b: &EstimandEstimate,
    single_a: &EstimandEstimate,
    observed: &EstimandEstimate,
) -> Result<WaldResult> {
    let mut composite = joint
        .checked_sub(single_b)?
        .checked_sub(single_a)?
        .checked_add(observed)?;
    // When the four arms cancel exactly (identical policies), the composite
    // is pure floating-point dust; snap it to the exact null rather than
    // letting a dust ratio masquerade as a z-statistic.
    let input_scale = [joint, single_b, single_a, observed]
        .iter()
        .map(|e| sample_variance(&e.eif).sqrt() + e.value.abs())
        .fold(0.0_f64, f64::max);
    let dust = 1e-10 * input_scale.max(f64::MIN_POSITIVE);
    if composite.value.abs() <= dust && sample_variance(&composite.eif).sqrt() <= dust {
        composite.value = 0.0;
        composite.eif.iter_mut().for_each(|e| *e = 0.0);
    }
    wald(&composite)
}

/// Standard normal CDF via the Abramowitz-Stegun 26.2.17 rational
/// approximation (absolute error below 7.5e-8).
pub fn normal_cdf(z: f64) -> f64 {
    if z == 0.0 {
        return 0.5;
    }
    if z > 8.0 {
        return 1.0;
    }
    if z < -8.0 {
        return 0.0;
    }
    let x = z.abs();
    let t = 1.0 / (1.0 + 0.2316419 * x);
    let poly = t
        * (0.319381530
            + t * (-0.356563782 + t * (1.781477937 + t * (-1.821255978 + t * 1.330274429))));
    let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let upper = phi * poly;
    if z >= 0.0 {
        1.0 - upper
    } else {
        upper
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(value: f64, eif: Vec<f64>) -> EstimandEstimate {
        EstimandEstimate { value, eif, label: "test".into(), fingerprint: 42 }
    }

    #[test]
    fn self_subtraction_is_zero() {
        let a = est(1.5, vec![0.3, -0.2, 0.1, -0.2]);
        let d = if_sub(&a, &a).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(d.eif.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn group_law_round_trip() {
        let a = est(2.0, vec![0.5, -0.5, 0.25, -0.25]);
        let b = est(0.7, vec![0.1, 0.2, -0.3, 0.0]);
        let back = if_add(&if_sub(&a, &b).unwrap(), &b).unwrap();
        assert!((back.value - a.value).abs() < 1e-12);
        for (x, y) in back.eif.iter().zip(&a.eif) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_fingerprints_rejected() {
        let a = est(1.0, vec![0.0, 0.0]);
        let mut b = est(1.0, vec![0.0, 0.0]);
        b.fingerprint = 43;
        assert!(if_sub(&a, &b).is_err());
        let c = est(1.0, vec![0.0, 0.0, 0.0]);
        assert!(if_sub(&a, &c).is_err());
    }

    #[test]
    fn wald_degenerate_interval() {
        let e = est(0.0, vec![0.0; 10]);
        let w = wald(&e).unwrap();
        assert!(w.degenerate);
        assert_eq!(w.ci_lo, 0.0);
        assert_eq!(w.ci_hi, 0.0);
        assert_eq!(w.p_value, 1.0);
        assert!(!w.reject_at_05);
    }

    #[test]
    fn wald_se_scales_like_one_over_sqrt_n() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        let norm = Normal::new(0.0, 1.0).unwrap();
        let eif: Vec<f64> = (0..10_000).map(|_| norm.sample(&mut rng)).collect();
        let centered: Vec<f64> = {
            let m = crate::mat::mean(&eif);
            eif.iter().map(|e| e - m).collect()
        };
        let w = wald(&est(0.0, centered)).unwrap();
        assert!((w.se - 0.01).abs() / 0.01 < 0.1, "se {}", w.se);
        assert!((w.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linearity_of_wald_estimate() {
        let a = est(2.0, vec![0.5, -0.5, 0.25, -0.25]);
        let b = est(0.75, vec![0.1, 0.2, -0.3, 0.0]);
        let w = wald(&if_sub(&a, &b).unwrap()).unwrap();
        assert_eq!(w.estimate, a.value - b.value);
    }

    #[test]
    fn interaction_of_identical_estimates_is_null() {
        let e = est(1.0, vec![0.4, -0.4, 0.2, -0.2]);
        let w = interaction_test(&e, &e, &e, &e).unwrap();
        assert_eq!(w.estimate, 0.0);
        assert!(w.p_value > 0.99);
    }

    #[test]
    fn interaction_centering_invariance() {
        let base = vec![0.4, -0.4, 0.2, -0.2];
        let joint = est(1.0, base.clone());
        let b = est(0.4, base.iter().map(|v| v * 0.5).collect());
        let a = est(0.3, base.iter().map(|v| -v).collect());
        let obs = est(0.1, base.iter().map(|v| v * 0.25).collect());
        let w1 = interaction_test(&joint, &b, &a, &obs).unwrap();
        let shift = |e: &EstimandEstimate| {
            est(e.value, e.eif.iter().map(|v| v + 5.0).collect())
        };
        let w2 = interaction_test(&shift(&joint), &shift(&b), &shift(&a), &shift(&obs)).unwrap();
        assert!((w1.estimate - w2.estimate).abs() < 1e-12);
        assert!((w1.se - w2.se).abs() < 1e-12);
    }

    #[test]
    fn interaction_matches_manual_wald_path() {
        let joint = est(1.0, vec![0.4, -0.4, 0.2, -0.2]);
        let b = est(0.4, vec![0.2, -0.1, 0.0, -0.1]);
        let a = est(0.3, vec![-0.1, 0.3, -0.2, 0.0]);
        let obs = est(0.1, vec![0.05, -0.05, 0.05, -0.05]);
        let w1 = interaction_test(&joint, &b, &a, &obs).unwrap();
        let composite = if_add(&if_sub(&if_sub(&joint, &b).unwrap(), &a).unwrap(), &obs).unwrap();
        let w2 = wald(&composite).unwrap();
        assert_eq!(w1.p_value, w2.p_value);
        assert_eq!(w1.se, w2.se);
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-9);
        assert!((normal_cdf(1.96) - 0.975).abs() < 1e-3);
        assert!((normal_cdf(-1.96) - 0.025).abs() < 1e-3);
    }
}
