//! Cross-fitted doubly robust estimation of shift-policy estimands.
//!
//! Both estimators run a backward recursion over exposure times with
//! cross-fitted outcome regressions, density ratios estimated by classifying
//! shifted against observed exposure rows, and censoring models fit with the
//! same stacking machinery:
//!
//! * [`tmle`] targets each stage's regression with an intercept-only
//!   weighted logistic fluctuation, so the influence-function score equation
//!   is solved exactly and the estimate stays within the outcome range.
//! * [`sdr`] runs the sequentially doubly robust one-step recursion; no
//!   fluctuation, and the estimate may leave the observed range. It stays
//!   consistent when, at every time, either the outcome regression or the
//!   exposure-and-censoring models are correct.

mod nuisance;

use serde::{Deserialize, Serialize};

use crate::dataset::LongitudinalDataset;
use crate::error::{Error, Result};
use crate::learners::{expit, logit, LearnerKind, Task};
use crate::mat::{mean, sample_variance};
use crate::policy::ShiftPolicy;

use nuisance::{crossfit_predict, derive_seed, Prepared};

/// Clip applied to outcome-regression predictions before the logistic
/// fluctuation (on the [0, 1] working scale).
const M_CLIP: f64 = 1e-4;

/// Configuration shared by the estimator entry points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    /// Cross-fitting folds V.
    pub folds: usize,
    /// Folds used inside the stacking ensemble.
    pub inner_folds: usize,
    pub seed: u64,
    pub roster: Vec<LearnerKind>,
    /// Per-time overrides, mainly for robustness experiments.
    pub outcome_roster: Option<Vec<Vec<LearnerKind>>>,
    pub ratio_roster: Option<Vec<Vec<LearnerKind>>>,
    pub censoring_roster: Option<Vec<Vec<LearnerKind>>>,
    /// Ratios are truncated at this empirical quantile of themselves.
    pub ratio_truncation_quantile: f64,
}

impl FitConfig {
    pub fn new(seed: u64) -> Self {
        FitConfig {
            folds: 10,
            inner_folds: 10,
            seed,
            roster: crate::learners::default_roster(),
            outcome_roster: None,
            ratio_roster: None,
            censoring_roster: None,
            ratio_truncation_quantile: 0.999,
        }
    }

    pub fn with_roster(mut self, roster: Vec<LearnerKind>) -> Self {
        self.roster = roster;
        self
    }

    pub fn with_folds(mut self, folds: usize) -> Self {
        self.folds = folds;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config("need at least 2 cross-fit folds".into()));
        }
        if self.roster.is_empty() {
            return Err(Error::Config("empty learner roster".into()));
        }
        if !(0.0..=1.0).contains(&self.ratio_truncation_quantile) {
            return Err(Error::Config("ratio truncation quantile must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn outcome_roster_for(&self, t: usize) -> &[LearnerKind] {
        match &self.outcome_roster {
            Some(per_time) => &per_time[t],
            None => &self.roster,
        }
    }

    fn ratio_roster_for(&self, t: usize) -> &[LearnerKind] {
        match &self.ratio_roster {
            Some(per_time) => &per_time[t],
            None => &self.roster,
        }
    }

    fn censoring_roster_for(&self, t: usize) -> &[LearnerKind] {
        match &self.censoring_roster {
            Some(per_time) => &per_time[t],
            None => &self.roster,
        }
    }
}

/// A point estimate with its per-subject efficient-influence values.
///
/// The influence values are kept in canonical subject order and carry the
/// dataset fingerprint; arithmetic across different datasets is refused.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimandEstimate {
    pub value: f64,
    pub eif: Vec<f64>,
    pub label: String,
    pub fingerprint: u64,
}

impl EstimandEstimate {
    pub fn n(&self) -> usize {
        self.eif.len()
    }

    pub(crate) fn check_compatible(&self, other: &EstimandEstimate) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::Dimension(format!(
                "estimates have different subject counts ({} vs {})",
                self.n(),
                other.n()
            )));
        }
        if self.fingerprint != other.fingerprint {
            return Err(Error::Validation(format!(
                "estimates '{}' and '{}' come from different datasets",
                self.label, other.label
            )));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &EstimandEstimate) -> Result<EstimandEstimate> {
        self.check_compatible(other)?;
        Ok(EstimandEstimate {
            value: self.value + other.value,
            eif: self.eif.iter().zip(&other.eif).map(|(a, b)| a + b).collect(),
            label: format!("({} + {})", self.label, other.label),
            fingerprint: self.fingerprint,
        })
    }

    pub fn checked_sub(&self, other: &EstimandEstimate) -> Result<EstimandEstimate> {
        self.check_compatible(other)?;
        Ok(EstimandEstimate {
            value: self.value - other.value,
            eif: self.eif.iter().zip(&other.eif).map(|(a, b)| a - b).collect(),
            label: format!("({} - {})", self.label, other.label),
            fingerprint: self.fingerprint,
        })
    }

    /// Influence-function standard error, sd(eif)/sqrt(n).
    pub fn se(&self) -> f64 {
        (sample_variance(&self.eif) / self.n() as f64).sqrt()
    }
}

/// Estimate plus run diagnostics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub estimate: EstimandEstimate,
    /// Ratio values pushed down to the truncation cap, summed over times.
    pub truncation_events: usize,
}

/// TMLE of E[Y(shifted)] under the policy. The outcome is min-max scaled to
/// [0, 1] for the logistic fluctuation and back-transformed for reporting.
pub fn tmle(ds: &LongitudinalDataset, policy: &ShiftPolicy, cfg: &FitConfig) -> Result<FitResult> {
    let prep = Prepared::run(ds, policy, cfg)?;
    let (y_scaled, y_min, y_range) = scale_outcome(ds, &prep.y);
    let n = prep.n;
    let times = prep.times;

    let mut pseudo = y_scaled;
    let mut eif = vec![0.0; n];
    let mut targeted_shift0 = vec![0.0; n];
    for t in (0..times).rev() {
        let roster = cfg.outcome_roster_for(t);
        let (m_obs_raw, m_shift_raw) = crossfit_predict(
            roster,
            cfg.inner_folds,
            Task::Regression,
            &prep.x_obs[t],
            Some(&prep.x_shift[t]),
            &pseudo,
            &prep.next_obs[t],
            &prep.at_risk[t],
            &prep.folds,
            derive_seed(cfg.seed, "outcome", t, 0),
        )?;
        let offsets: Vec<f64> = m_obs_raw
            .iter()
            .map(|&m| logit(m.clamp(M_CLIP, 1.0 - M_CLIP)))
            .collect();
        let eps = fluctuate(&offsets, &pseudo, &prep.cum_weight[t], &prep.next_obs[t])?;
        let targeted_obs: Vec<f64> = offsets.iter().map(|&o| expit(o + eps)).collect();
        let targeted_shift: Vec<f64> = m_shift_raw
            .iter()
            .map(|&m| expit(logit(m.clamp(M_CLIP, 1.0 - M_CLIP)) + eps))
            .collect();
        for i in 0..n {
            if prep.next_obs[t][i] {
                eif[i] += prep.cum_weight[t][i] * (pseudo[i] - targeted_obs[i]);
            }
        }
        for i in 0..n {
            pseudo[i] = if prep.at_risk[t][i] { targeted_shift[i] } else { 0.0 };
        }
        if t == 0 {
            targeted_shift0.copy_from_slice(&pseudo);
        }
    }
    let value_scaled = mean(&targeted_shift0);
    for i in 0..n {
        eif[i] += targeted_shift0[i] - value_scaled;
        eif[i] *= y_range;
    }
    let value = value_scaled * y_range + y_min;
    Ok(FitResult {
        estimate: EstimandEstimate {
            value,
            eif,
            label: format!("tmle:{}", policy.name()),
            fingerprint: ds.fingerprint(),
        },
        truncation_events: prep.truncation_events,
    })
}

/// Sequentially doubly robust one-step estimator of E[Y(shifted)].
pub fn sdr(ds: &LongitudinalDataset, policy: &ShiftPolicy, cfg: &FitConfig) -> Result<FitResult> {
    let prep = Prepared::run(ds, policy, cfg)?;
    let n = prep.n;
    let times = prep.times;

    let mut phi = prep.y.clone();
    for t in (0..times).rev() {
        let roster = cfg.outcome_roster_for(t);
        let (m_obs, m_shift) = crossfit_predict(
            roster,
            cfg.inner_folds,
            Task::Regression,
            &prep.x_obs[t],
            Some(&prep.x_shift[t]),
            &phi,
            &prep.next_obs[t],
            &prep.at_risk[t],
            &prep.folds,
            derive_seed(cfg.seed, "outcome", t, 0),
        )?;
        let mut next = vec![0.0; n];
        for i in 0..n {
            if !prep.at_risk[t][i] {
                continue;
            }
            let ind = prep.next_obs[t][i] as u8 as f64;
            let correction =
                prep.ratios[t][i] * ind / prep.censor_prob[t][i] * (phi[i] - m_obs[i]);
            next[i] = correction + m_shift[i];
        }
        phi = next;
    }
    let value = mean(&phi);
    let eif: Vec<f64> = phi.iter().map(|p| p - value).collect();
    if !value.is_finite() {
        return Err(Error::Numerical("SDR recursion produced a non-finite estimate".into()));
    }
    Ok(FitResult {
        estimate: EstimandEstimate {
            value,
            eif,
            label: format!("sdr:{}", policy.name()),
            fingerprint: ds.fingerprint(),
        },
        truncation_events: prep.truncation_events,
    })
}

/// Censoring-weighted mean of the observed outcome, with influence values
/// `W*Y - mean`; the Horvitz-Thompson weights use the same cross-fitted
/// censoring models as the estimators.
pub fn observed_mean(ds: &LongitudinalDataset, cfg: &FitConfig) -> Result<EstimandEstimate> {
    let y: Vec<f64> = ds.outcome().iter().map(|o| o.unwrap_or(0.0)).collect();
    let n = ds.n();
    if !ds.has_censoring() {
        let value = mean(&y);
        return Ok(EstimandEstimate {
            value,
            eif: y.iter().map(|v| v - value).collect(),
            label: "mean_observed".into(),
            fingerprint: ds.fingerprint(),
        });
    }
    // Identity policy: ratios are one, only censoring weights matter.
    let identity = ShiftPolicy::identity(ds.j(), ds.times());
    let prep = Prepared::run(ds, &identity, cfg)?;
    let last = prep.times - 1;
    let weighted: Vec<f64> = (0..n).map(|i| prep.cum_weight[last][i] * y[i]).collect();
    let value = mean(&weighted);
    Ok(EstimandEstimate {
        value,
        eif: weighted.iter().map(|v| v - value).collect(),
        label: "mean_observed".into(),
        fingerprint: ds.fingerprint(),
    })
}

/// Contrast of a shift estimate against the observed world:
/// `E[Y(shifted)] - E[Y]`, with influence values subtracted pairwise.
pub fn contrast_vs_observed(
    shift_estimate: &EstimandEstimate,
    ds: &LongitudinalDataset,
    cfg: &FitConfig,
) -> Result<EstimandEstimate> {
    if shift_estimate.fingerprint != ds.fingerprint() {
        return Err(Error::Validation(
            "shift estimate does not belong to this dataset".into(),
        ));
    }
    let obs = observed_mean(ds, cfg)?;
    let mut out = shift_estimate.checked_sub(&obs)?;
    out.label = format!("contrast:{}", shift_estimate.label);
    Ok(out)
}

/// Density-ratio estimates for one stage, exposed for diagnostics.
#[derive(Debug, Clone)]
pub struct RatioEstimate {
    /// Ratio per subject (1.0 for rows not under observation at t).
    pub values: Vec<f64>,
    pub truncation_events: usize,
}

/// Cross-fitted density ratio r_t for the policy at time t.
pub fn estimate_density_ratio(
    ds: &LongitudinalDataset,
    policy: &ShiftPolicy,
    t: usize,
    cfg: &FitConfig,
) -> Result<RatioEstimate> {
    if t >= ds.times() {
        return Err(Error::Dimension(format!("time {t} out of range")));
    }
    let prep = Prepared::run(ds, policy, cfg)?;
    Ok(RatioEstimate {
        values: prep.ratios[t].clone(),
        truncation_events: prep.truncation_events,
    })
}

/// Comparison operator for subpopulation threshold rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Ge,
    Gt,
    Le,
    Lt,
}

/// One baseline-exposure threshold rule, e.g. `component >= 25`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdRule {
    pub component: String,
    pub op: CmpOp,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    #[default]
    Any,
    All,
}

/// Predicate over baseline exposures defining a subpopulation. An empty rule
/// list selects everyone.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SubpopulationPredicate {
    #[serde(default)]
    pub combine: Combine,
    #[serde(default)]
    pub rules: Vec<ThresholdRule>,
}

impl SubpopulationPredicate {
    fn matches(&self, ds: &LongitudinalDataset, i: usize) -> Result<bool> {
        if self.rules.is_empty() {
            return Ok(true);
        }
        let mut any = false;
        let mut all = true;
        for rule in &self.rules {
            let j = ds.component_index(&rule.component)?;
            let v = ds.exposures(0).get(i, j);
            let hit = match rule.op {
                CmpOp::Ge => v >= rule.threshold,
                CmpOp::Gt => v > rule.threshold,
                CmpOp::Le => v <= rule.threshold,
                CmpOp::Lt => v < rule.threshold,
            };
            any |= hit;
            all &= hit;
        }
        Ok(match self.combine {
            Combine::Any => any,
            Combine::All => all,
        })
    }
}

/// A validated subpopulation of a single-timepoint dataset.
#[derive(Debug, Clone)]
pub struct Subpopulation {
    mask: Vec<bool>,
    fingerprint: u64,
    label: String,
}

/// Restrict estimation to the subjects whose baseline exposures satisfy the
/// predicate. Nuisances stay fit on the full data; [`Subpopulation::localize`]
/// re-averages an estimate over the subset.
pub fn restrict_subpopulation(
    ds: &LongitudinalDataset,
    predicate: &SubpopulationPredicate,
) -> Result<Subpopulation> {
    if ds.times() != 1 {
        return Err(Error::Validation(
            "subpopulation restriction is defined for single-timepoint exposures".into(),
        ));
    }
    let mut mask = Vec::with_capacity(ds.n());
    for i in 0..ds.n() {
        mask.push(predicate.matches(ds, i)?);
    }
    if !mask.iter().any(|&b| b) {
        return Err(Error::Validation("subpopulation predicate selects no subjects".into()));
    }
    let label = if predicate.rules.is_empty() {
        "all".to_string()
    } else {
        predicate
            .rules
            .iter()
            .map(|r| {
                let op = match r.op {
                    CmpOp::Ge => ">=",
                    CmpOp::Gt => ">",
                    CmpOp::Le => "<=",
                    CmpOp::Lt => "<",
                };
                format!("{}{op}{}", r.component, r.threshold)
            })
            .collect::<Vec<_>>()
            .join(match predicate.combine {
                Combine::Any => "|",
                Combine::All => "&",
            })
    };
    Ok(Subpopulation { mask, fingerprint: ds.fingerprint(), label })
}

impl Subpopulation {
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.mask.len() as f64
    }

    /// Localize an estimate to the subpopulation: the estimand becomes the
    /// average over the subset, and the influence values are restricted and
    /// rescaled by the subset probability.
    pub fn localize(&self, estimate: &EstimandEstimate) -> Result<EstimandEstimate> {
        if estimate.n() != self.mask.len() || estimate.fingerprint != self.fingerprint {
            return Err(Error::Validation(
                "estimate does not belong to the subpopulation's dataset".into(),
            ));
        }
        let p_hat = self.fraction();
        let phi: Vec<f64> = estimate.eif.iter().map(|e| e + estimate.value).collect();
        let selected: Vec<f64> = phi
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| *v)
            .collect();
        let value = mean(&selected);
        let eif: Vec<f64> = phi
            .iter()
            .zip(&self.mask)
            .map(|(v, &m)| if m { (v - value) / p_hat } else { 0.0 })
            .collect();
        Ok(EstimandEstimate {
            value,
            eif,
            label: format!("{} | {}", estimate.label, self.label),
            fingerprint: self.fingerprint,
        })
    }
}

fn scale_outcome(ds: &LongitudinalDataset, y: &[f64]) -> (Vec<f64>, f64, f64) {
    if ds.outcome_is_binary() {
        return (y.to_vec(), 0.0, 1.0);
    }
    let observed: Vec<f64> = ds.outcome().iter().flatten().copied().collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in &observed {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || hi <= lo {
        return (y.to_vec(), 0.0, 1.0);
    }
    let range = hi - lo;
    let final_obs = ds.censoring(ds.times() - 1);
    let scaled: Vec<f64> = y
        .iter()
        .zip(final_obs)
        .map(|(&v, &obs)| if obs { (v - lo) / range } else { 0.0 })
        .collect();
    (scaled, lo, range)
}

/// Solve the weighted intercept-only logistic fluctuation: find eps with
/// `sum_i w_i (y_i - expit(offset_i + eps)) = 0` over masked rows.
/// Newton iteration with a bisection bracket; errors after 100 steps.
fn fluctuate(offsets: &[f64], targets: &[f64], weights: &[f64], mask: &[bool]) -> Result<f64> {
    let total_w: f64 = weights
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(w, _)| *w)
        .sum();
    if total_w <= 0.0 {
        return Ok(0.0);
    }
    let score = |eps: f64| -> (f64, f64) {
        let mut s = 0.0;
        let mut d = 0.0;
        for i in 0..offsets.len() {
            if !mask[i] || weights[i] == 0.0 {
                continue;
            }
            let p = expit(offsets[i] + eps);
            s += weights[i] * (targets[i] - p);
            d += weights[i] * p * (1.0 - p);
        }
        (s, d)
    };
    let tol = 1e-12 * total_w.max(1.0);
    let (mut lo, mut hi) = (-30.0_f64, 30.0_f64);
    let mut eps = 0.0_f64;
    for _ in 0..100 {
        let (s, d) = score(eps);
        if s.abs() <= tol {
            return Ok(eps);
        }
        // score decreases in eps: keep the bracket tight
        if s > 0.0 {
            lo = eps;
        } else {
            hi = eps;
        }
        let newton = if d > 0.0 { eps + s / d } else { f64::NAN };
        eps = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    let (s, _) = score(eps);
    if s.abs() <= 1e-6 * total_w.max(1.0) {
        // good enough for inference even though the tight tolerance missed
        return Ok(eps);
    }
    Err(Error::Numerical(format!(
        "fluctuation did not converge after 100 steps (score {s:.3e})"
    )))
}
