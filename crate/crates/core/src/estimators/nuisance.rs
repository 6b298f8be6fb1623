//! Cross-fitted nuisance estimation shared by the TMLE and SDR paths:
//! history feature assembly, density ratios by the classification trick,
//! and censoring probabilities.

use crate::dataset::LongitudinalDataset;
use crate::error::{Error, Result};
use crate::hull::build_hull;
use crate::learners::{FoldPlan, LearnerEnsemble, LearnerKind, Task};
use crate::mat::Mat;
use crate::policy::{apply_shift, HullGuard, ShiftPolicy};

use super::FitConfig;

/// Lower clip for estimated censoring probabilities.
pub(super) const CENSOR_CLIP: f64 = 1e-5;

pub(super) fn derive_seed(base: u64, tag: &str, t: usize, fold: usize) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    let mut write = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    write(&base.to_le_bytes());
    write(tag.as_bytes());
    write(&(t as u64).to_le_bytes());
    write(&(fold as u64).to_le_bytes());
    h
}

/// Everything the backward recursions need, computed once per estimator run.
pub(super) struct Prepared {
    pub n: usize,
    pub times: usize,
    pub at_risk: Vec<Vec<bool>>,
    pub next_obs: Vec<Vec<bool>>,
    /// Features (H_t, A_t) with the observed exposure block.
    pub x_obs: Vec<Mat>,
    /// Same features with the current exposure block shifted by the policy.
    pub x_shift: Vec<Mat>,
    pub folds: FoldPlan,
    /// Density ratios r_t, truncated; 1.0 for rows not under observation.
    pub ratios: Vec<Vec<f64>>,
    /// Censoring probabilities c_t, clipped to [CENSOR_CLIP, 1].
    pub censor_prob: Vec<Vec<f64>>,
    /// Cumulative weight through stage t: prod_{s<=t} r_s 1{C_{s+1}=1}/c_s.
    pub cum_weight: Vec<Vec<f64>>,
    pub truncation_events: usize,
    /// Outcome with zeros where censored.
    pub y: Vec<f64>,
}

impl Prepared {
    pub(super) fn run(ds: &LongitudinalDataset, policy: &ShiftPolicy, cfg: &FitConfig) -> Result<Self> {
        if policy.j() != ds.j() || policy.times() != ds.times() {
            return Err(Error::Dimension(format!(
                "policy ({} components, {} times) does not match dataset ({}, {})",
                policy.j(),
                policy.times(),
                ds.j(),
                ds.times()
            )));
        }
        cfg.validate()?;
        let n = ds.n();
        let times = ds.times();
        let folds = FoldPlan::new(n, cfg.folds, cfg.seed)?;
        let at_risk: Vec<Vec<bool>> = (0..times).map(|t| ds.at_risk(t)).collect();
        let next_obs: Vec<Vec<bool>> = (0..times).map(|t| ds.censoring(t).to_vec()).collect();

        // Shifted exposures per time; guarded policies evaluate against the
        // hull of the standardized observed exposures at the same time.
        let needs_hull = !matches!(policy.guard(), HullGuard::None);
        let std_map = if needs_hull { Some(ds.standardize()) } else { None };
        let mut shifted_values = Vec::with_capacity(times);
        for t in 0..times {
            let hull = match &std_map {
                Some(map) => Some(build_hull(ds, t, map)?),
                None => None,
            };
            let shifted = apply_shift(policy, ds.exposures(t), t, hull.as_ref())?;
            shifted_values.push(shifted.values);
        }

        // History features: H_t = [L_0, A_0, ..., L_{t-1}, A_{t-1}, L_t].
        let mut x_obs = Vec::with_capacity(times);
        let mut x_shift = Vec::with_capacity(times);
        let mut history = Mat::zeros(n, 0);
        for t in 0..times {
            history = history.hcat(ds.covariates(t))?;
            x_obs.push(history.hcat(ds.exposures(t))?);
            x_shift.push(history.hcat(&shifted_values[t])?);
            history = history.hcat(ds.exposures(t))?;
        }

        // Censoring probabilities.
        let mut censor_prob = vec![vec![1.0; n]; times];
        for t in 0..times {
            if next_obs[t].iter().zip(&at_risk[t]).all(|(&obs, &risk)| !risk || obs) {
                continue; // nobody censored at this stage
            }
            let roster = cfg.censoring_roster_for(t);
            let target: Vec<f64> = next_obs[t].iter().map(|&b| b as u8 as f64).collect();
            let preds = crossfit_predict(
                roster,
                cfg.inner_folds,
                Task::Probability,
                &x_obs[t],
                None,
                &target,
                &at_risk[t],
                &at_risk[t],
                &folds,
                derive_seed(cfg.seed, "censoring", t, 0),
            )?;
            for i in 0..n {
                if at_risk[t][i] {
                    censor_prob[t][i] = preds.0[i].clamp(CENSOR_CLIP, 1.0);
                }
            }
        }

        // Density ratios by the classification trick.
        let mut ratios = vec![vec![1.0; n]; times];
        let mut truncation_events = 0usize;
        for t in 0..times {
            if policy_identity_at(policy, t, &shifted_values[t], ds.exposures(t)) {
                continue; // identical rows classify at one half exactly
            }
            let (r, events) = density_ratio_stage(ds, cfg, &folds, &x_obs[t], &x_shift[t], &at_risk[t], t)?;
            ratios[t] = r;
            truncation_events += events;
        }

        // Cumulative weights.
        let mut cum_weight = vec![vec![0.0; n]; times];
        for i in 0..n {
            let mut w = 1.0;
            for t in 0..times {
                if !at_risk[t][i] {
                    w = 0.0;
                }
                let ind = next_obs[t][i] as u8 as f64;
                w *= ratios[t][i] * ind / censor_prob[t][i];
                if !w.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite weight for subject {i} at stage {t}"
                    )));
                }
                cum_weight[t][i] = w;
            }
        }

        let y: Vec<f64> = ds.outcome().iter().map(|o| o.unwrap_or(0.0)).collect();
        Ok(Prepared {
            n,
            times,
            at_risk,
            next_obs,
            x_obs,
            x_shift,
            folds,
            ratios,
            censor_prob,
            cum_weight,
            truncation_events,
            y,
        })
    }
}

/// True when the policy leaves every observed row untouched at time t; the
/// stacked classifier is then exactly symmetric and the ratio is exactly one,
/// so the fit is skipped.
fn policy_identity_at(policy: &ShiftPolicy, t: usize, shifted: &Mat, observed: &Mat) -> bool {
    policy.shifts_at(t).iter().all(|s| s.is_identity()) || shifted == observed
}

/// Cross-fitted density ratio at one stage. Stacks observed rows (label 0)
/// and shifted rows (label 1) sharing the history, fits a probability
/// ensemble per outer fold with both copies of a subject kept together, and
/// evaluates p/(1-p) at the observed rows. Ratios are truncated at their
/// empirical `ratio_truncation_quantile`.
#[allow(clippy::too_many_arguments)]
fn density_ratio_stage(
    ds: &LongitudinalDataset,
    cfg: &FitConfig,
    folds: &FoldPlan,
    x_obs: &Mat,
    x_shift: &Mat,
    at_risk: &[bool],
    t: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = ds.n();
    let n_risk = at_risk.iter().filter(|&&b| b).count();
    if n_risk < 2 * folds.v() {
        return Err(Error::Validation(format!(
            "density ratio at time {t} needs at least {} observed subjects, got {n_risk}",
            2 * folds.v()
        )));
    }
    let roster = cfg.ratio_roster_for(t);
    let mut ratios = vec![1.0; n];
    for fold in 0..folds.v() {
        let train_subjects: Vec<usize> = (0..n)
            .filter(|&i| at_risk[i] && folds.fold_of(i) != fold)
            .collect();
        let eval_subjects: Vec<usize> = (0..n)
            .filter(|&i| at_risk[i] && folds.fold_of(i) == fold)
            .collect();
        if eval_subjects.is_empty() {
            continue;
        }
        let m = train_subjects.len();
        let mut rows = Vec::with_capacity(2 * m);
        let mut labels = Vec::with_capacity(2 * m);
        let mut groups = Vec::with_capacity(2 * m);
        for (g, &i) in train_subjects.iter().enumerate() {
            rows.push(x_obs.row(i).to_vec());
            labels.push(0.0);
            groups.push(g);
        }
        for (g, &i) in train_subjects.iter().enumerate() {
            rows.push(x_shift.row(i).to_vec());
            labels.push(1.0);
            groups.push(g);
        }
        let x_stack = Mat::from_rows(&rows)?;
        let ensemble = LearnerEnsemble::fit_grouped(
            roster,
            &x_stack,
            &labels,
            Task::Probability,
            cfg.inner_folds,
            derive_seed(cfg.seed, "ratio", t, fold),
            &groups,
        )?;
        let x_eval_rows: Vec<Vec<f64>> = eval_subjects.iter().map(|&i| x_obs.row(i).to_vec()).collect();
        let p = ensemble.predict(&Mat::from_rows(&x_eval_rows)?)?;
        for (pos, &i) in eval_subjects.iter().enumerate() {
            ratios[i] = p[pos] / (1.0 - p[pos]);
        }
    }
    let observed_ratios: Vec<f64> = (0..n).filter(|&i| at_risk[i]).map(|i| ratios[i]).collect();
    let cap = crate::mat::quantile(&observed_ratios, cfg.ratio_truncation_quantile);
    let mut events = 0usize;
    for (i, r) in ratios.iter_mut().enumerate() {
        if at_risk[i] && *r > cap {
            *r = cap;
            events += 1;
        }
    }
    Ok((ratios, events))
}

/// Cross-fitted prediction of `y` on `x_obs` among `train_mask` rows, with
/// out-of-fold predictions at both the observed and (optionally) shifted
/// feature rows for every `eval_mask` row.
#[allow(clippy::too_many_arguments)]
pub(super) fn crossfit_predict(
    roster: &[LearnerKind],
    inner_folds: usize,
    task: Task,
    x_obs: &Mat,
    x_shift: Option<&Mat>,
    y: &[f64],
    train_mask: &[bool],
    eval_mask: &[bool],
    folds: &FoldPlan,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x_obs.rows();
    let mut pred_obs = vec![0.0; n];
    let mut pred_shift = vec![0.0; n];
    for fold in 0..folds.v() {
        let train: Vec<usize> = (0..n)
            .filter(|&i| train_mask[i] && folds.fold_of(i) != fold)
            .collect();
        let eval: Vec<usize> = (0..n)
            .filter(|&i| eval_mask[i] && folds.fold_of(i) == fold)
            .collect();
        if eval.is_empty() {
            continue;
        }
        if train.len() < 2 {
            return Err(Error::Validation(format!(
                "cross-fit fold {fold} has {} training rows",
                train.len()
            )));
        }
        let x_train = Mat::from_rows(&train.iter().map(|&i| x_obs.row(i).to_vec()).collect::<Vec<_>>())?;
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let ensemble = LearnerEnsemble::fit(
            roster,
            &x_train,
            &y_train,
            task,
            inner_folds,
            derive_seed(seed, "inner", 0, fold),
        )?;
        let x_eval = Mat::from_rows(&eval.iter().map(|&i| x_obs.row(i).to_vec()).collect::<Vec<_>>())?;
        let p = ensemble.predict(&x_eval)?;
        for (pos, &i) in eval.iter().enumerate() {
            pred_obs[i] = p[pos];
        }
        if let Some(xs) = x_shift {
            let x_eval_s = Mat::from_rows(&eval.iter().map(|&i| xs.row(i).to_vec()).collect::<Vec<_>>())?;
            let ps = ensemble.predict(&x_eval_s)?;
            for (pos, &i) in eval.iter().enumerate() {
                pred_shift[i] = ps[pos];
            }
        }
    }
    Ok((pred_obs, pred_shift))
}
