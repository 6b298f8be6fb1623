//! Scenario checks for the estimators beyond the per-module unit tests.

use mixshift::estimators::{contrast_vs_observed, sdr, tmle, FitConfig};
use mixshift::learners::LearnerKind;
use mixshift::policy::{ComponentShift, HullGuard, ShiftPolicy};
use mixshift::simulate::{
    counterfactual_truth, draw_observational, EquationSpec, Link, OutcomeKind, StructuralModel,
    Term, VarRef,
};

fn cov(t: usize, k: usize) -> VarRef {
    VarRef::Cov { t, k }
}

fn exp_(t: usize, j: usize) -> VarRef {
    VarRef::Exp { t, j }
}

fn lin(of: VarRef, c: f64) -> (Term, f64) {
    (Term::Linear { of }, c)
}

/// Two-period mixture with positive exposure levels and harmful (positive)
/// outcome coefficients: a longitudinal 20% all-component reduction must
/// produce a clearly negative contrast.
#[test]
fn longitudinal_reduction_of_harmful_mixture_is_negative() {
    let model = StructuralModel {
        exposure_names: vec!["a1".into(), "a2".into()],
        covariates: vec![
            vec![("l0".into(), EquationSpec::linear(vec![], 1.0))],
            vec![(
                "l1".into(),
                EquationSpec::linear(vec![lin(cov(0, 0), 0.4), lin(exp_(0, 0), 0.4)], 0.8),
            )],
        ],
        exposures: vec![
            vec![
                EquationSpec::linear(vec![(Term::Intercept, 1.5), lin(cov(0, 0), 0.4)], 0.8),
                EquationSpec::linear(vec![(Term::Intercept, 1.0), lin(cov(0, 0), 0.3)], 0.8),
            ],
            vec![
                EquationSpec::linear(
                    vec![(Term::Intercept, 1.0), lin(cov(1, 0), 0.3), lin(exp_(0, 0), 0.3)],
                    0.8,
                ),
                EquationSpec::linear(
                    vec![(Term::Intercept, 0.8), lin(cov(1, 0), 0.2), lin(exp_(0, 1), 0.3)],
                    0.8,
                ),
            ],
        ],
        censoring: vec![None, None],
        outcome: EquationSpec::linear(
            vec![
                lin(exp_(1, 0), 0.8),
                lin(exp_(1, 1), 0.6),
                lin(exp_(0, 0), 0.5),
                lin(exp_(0, 1), 0.4),
                lin(cov(1, 0), 0.5),
                lin(cov(0, 0), 0.3),
            ],
            1.0,
        ),
        outcome_kind: OutcomeKind::Continuous,
    };
    let reduce = ShiftPolicy::uniform(
        "times_0.8_all",
        vec![
            ComponentShift::Multiplicative { value: 0.8 },
            ComponentShift::Multiplicative { value: 0.8 },
        ],
        2,
        HullGuard::None,
    )
    .unwrap();

    // The simulator agrees on the sign.
    let shifted = counterfactual_truth(&model, &reduce, 200_000, 5, None).unwrap();
    let base = counterfactual_truth(&model, &ShiftPolicy::identity(2, 2), 200_000, 5, None).unwrap();
    assert!(
        shifted.value < base.value,
        "reducing a harmful mixture must lower the mean outcome"
    );

    let ds = draw_observational(&model, 3000, 88).unwrap();
    let mut cfg = FitConfig::new(12);
    cfg.roster = vec![LearnerKind::MeanOnly, LearnerKind::Linear];
    cfg.folds = 5;
    cfg.inner_folds = 5;
    for fit in [tmle(&ds, &reduce, &cfg).unwrap(), sdr(&ds, &reduce, &cfg).unwrap()] {
        let contrast = contrast_vs_observed(&fit.estimate, &ds, &cfg).unwrap();
        let se = contrast.se();
        assert!(
            contrast.value < 0.0 && contrast.value.abs() > 2.0 * se,
            "{}: contrast {} (se {se}) should be clearly negative",
            fit.estimate.label,
            contrast.value
        );
        // and it should agree with the simulator's truth within 3 SE
        let truth = shifted.value - base.value;
        assert!(
            (contrast.value - truth).abs() < 3.0 * se,
            "{}: contrast {} vs truth {truth}",
            fit.estimate.label,
            contrast.value
        );
    }
}

/// Log-normal exposures and a multiplicative reduction: the density ratio is
/// nonlinear in the raw exposure, so give the classifier boosted stumps and
/// check the estimate still lands on the simulator truth.
#[test]
fn lognormal_multiplicative_shift_with_boosted_ratio() {
    let model = StructuralModel {
        exposure_names: vec!["a1".into()],
        covariates: vec![vec![("l1".into(), EquationSpec::linear(vec![], 1.0))]],
        exposures: vec![vec![EquationSpec {
            terms: vec![lin(cov(0, 0), 0.4)],
            noise_sd: 0.6,
            link: Link::Exp,
        }]],
        censoring: vec![None],
        outcome: EquationSpec::linear(vec![lin(exp_(0, 0), 1.0), lin(cov(0, 0), 0.8)], 1.0),
        outcome_kind: OutcomeKind::Continuous,
    };
    let reduce = ShiftPolicy::uniform(
        "times_0.8",
        vec![ComponentShift::Multiplicative { value: 0.8 }],
        1,
        HullGuard::None,
    )
    .unwrap();
    let truth = counterfactual_truth(&model, &reduce, 400_000, 3, None).unwrap();
    let ds = draw_observational(&model, 4000, 21).unwrap();
    let mut cfg = FitConfig::new(4);
    cfg.roster = vec![LearnerKind::Linear];
    cfg.ratio_roster = Some(vec![vec![LearnerKind::BoostedStumps {
        rounds: 80,
        depth: 2,
        shrinkage: 0.1,
    }]]);
    cfg.folds = 5;
    let fit = sdr(&ds, &reduce, &cfg).unwrap();
    let se = fit.estimate.se();
    assert!(
        (fit.estimate.value - truth.value).abs() < 3.0 * se + 4.0 * truth.mc_se,
        "sdr {} vs truth {} (se {se})",
        fit.estimate.value,
        truth.value
    );
}
