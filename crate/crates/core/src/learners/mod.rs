//! Learner roster, cross-fitting fold plans, and super-learner stacking with
//! cross-validated convex weights.

mod boost;
mod candidates;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

pub(crate) use candidates::{expit, logit};

/// Prediction target type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    /// Targets in [0, 1]; predictions are probabilities clipped away from
    /// the boundary.
    Probability,
}

/// Probability predictions are clipped to [PROB_CLIP, 1 - PROB_CLIP].
pub const PROB_CLIP: f64 = 1e-5;

/// Candidate learner specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerKind {
    MeanOnly,
    /// Least squares for regression, logistic for the probability task.
    Linear,
    Ridge { lambda: f64 },
    Knn { k: usize },
    BoostedStumps { rounds: usize, depth: usize, shrinkage: f64 },
}

impl LearnerKind {
    pub fn label(&self) -> String {
        match self {
            LearnerKind::MeanOnly => "mean".into(),
            LearnerKind::Linear => "linear".into(),
            LearnerKind::Ridge { lambda } => format!("ridge_{lambda}"),
            LearnerKind::Knn { k } => format!("knn_{k}"),
            LearnerKind::BoostedStumps { rounds, depth, shrinkage } => {
                format!("boost_{rounds}x{depth}_{shrinkage}")
            }
        }
    }

    fn fit(&self, x: &Mat, y: &[f64], task: Task) -> Result<candidates::Fitted> {
        match self {
            LearnerKind::MeanOnly => Ok(candidates::fit_mean(y)),
            LearnerKind::Linear => candidates::fit_glm(x, y, task, 1e-8),
            LearnerKind::Ridge { lambda } => {
                if !(*lambda > 0.0) {
                    return Err(Error::Config("ridge lambda must be positive".into()));
                }
                candidates::fit_glm(x, y, task, *lambda)
            }
            LearnerKind::Knn { k } => candidates::fit_knn(x, y, *k),
            LearnerKind::BoostedStumps { rounds, depth, shrinkage } => {
                if *depth == 0 || *depth > 3 {
                    return Err(Error::Config("boosted stump depth must be 1..=3".into()));
                }
                if *rounds == 0 || *rounds > 200 {
                    return Err(Error::Config("boosted stump rounds must be 1..=200".into()));
                }
                Ok(candidates::Fitted::Boost(boost::fit_boost(
                    x, y, task, *rounds, *depth, *shrinkage,
                )))
            }
        }
    }
}

/// Parse one compact roster entry ("mean", "linear", "ridge", "ridge:0.1",
/// "knn", "knn:10", "boost", "boost:100:2:0.1"); bare "ridge" and "knn"
/// expand into their default grids.
pub fn parse_learner_spec(entry: &str) -> Result<Vec<LearnerKind>> {
    let parts: Vec<&str> = entry.split(':').collect();
    let bad = || Error::Config(format!("unknown learner spec '{entry}'"));
    match parts[0] {
        "mean" => Ok(vec![LearnerKind::MeanOnly]),
        "linear" => Ok(vec![LearnerKind::Linear]),
        "ridge" => match parts.len() {
            1 => Ok([0.01, 0.1, 1.0, 10.0]
                .iter()
                .map(|&lambda| LearnerKind::Ridge { lambda })
                .collect()),
            2 => {
                let lambda: f64 = parts[1].parse().map_err(|_| bad())?;
                Ok(vec![LearnerKind::Ridge { lambda }])
            }
            _ => Err(bad()),
        },
        "knn" => match parts.len() {
            1 => Ok([5usize, 20].iter().map(|&k| LearnerKind::Knn { k }).collect()),
            2 => {
                let k: usize = parts[1].parse().map_err(|_| bad())?;
                Ok(vec![LearnerKind::Knn { k }])
            }
            _ => Err(bad()),
        },
        "boost" | "boosted_stumps" => match parts.len() {
            1 => Ok(vec![LearnerKind::BoostedStumps { rounds: 100, depth: 2, shrinkage: 0.1 }]),
            4 => {
                let rounds: usize = parts[1].parse().map_err(|_| bad())?;
                let depth: usize = parts[2].parse().map_err(|_| bad())?;
                let shrinkage: f64 = parts[3].parse().map_err(|_| bad())?;
                Ok(vec![LearnerKind::BoostedStumps { rounds, depth, shrinkage }])
            }
            _ => Err(bad()),
        },
        _ => Err(bad()),
    }
}

/// Parse a whole roster, concatenating grid expansions.
pub fn parse_roster(entries: &[String]) -> Result<Vec<LearnerKind>> {
    let mut out = Vec::new();
    for e in entries {
        out.extend(parse_learner_spec(e)?);
    }
    if out.is_empty() {
        return Err(Error::Config("learner roster is empty".into()));
    }
    Ok(out)
}

/// Default roster spanning constant, linear, penalized, local, and boosted
/// complexity.
pub fn default_roster() -> Vec<LearnerKind> {
    vec![
        LearnerKind::MeanOnly,
        LearnerKind::Linear,
        LearnerKind::Ridge { lambda: 1.0 },
        LearnerKind::Ridge { lambda: 0.01 },
        LearnerKind::Knn { k: 20 },
        LearnerKind::BoostedStumps { rounds: 100, depth: 2, shrinkage: 0.1 },
    ]
}

/// Subject-level cross-validation fold assignment. All of a subject's rows
/// share a fold, and fold sizes differ by at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    assignment: Vec<usize>,
    v: usize,
    seed: u64,
}

impl FoldPlan {
    pub fn new(n_subjects: usize, v: usize, seed: u64) -> Result<Self> {
        if v < 2 {
            return Err(Error::Config("need at least 2 folds".into()));
        }
        if n_subjects < v {
            return Err(Error::Validation(format!(
                "cannot split {n_subjects} subjects into {v} folds"
            )));
        }
        let mut order: Vec<usize> = (0..n_subjects).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let mut assignment = vec![0usize; n_subjects];
        for (pos, &subject) in order.iter().enumerate() {
            assignment[subject] = pos % v;
        }
        Ok(FoldPlan { assignment, v, seed })
    }

    /// Fold plan over rows that share group labels: every row of a group
    /// lands in the same fold (e.g. both stacked copies of a subject).
    pub fn grouped(groups: &[usize], v: usize, seed: u64) -> Result<Self> {
        let mut index_of = std::collections::HashMap::new();
        let mut next = 0usize;
        let compact: Vec<usize> = groups
            .iter()
            .map(|&g| {
                *index_of.entry(g).or_insert_with(|| {
                    let i = next;
                    next += 1;
                    i
                })
            })
            .collect();
        let group_plan = FoldPlan::new(next, v, seed)?;
        let assignment: Vec<usize> = compact.iter().map(|&g| group_plan.fold_of(g)).collect();
        Ok(FoldPlan { assignment, v, seed })
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fold_of(&self, subject: usize) -> usize {
        self.assignment[subject]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }
}

/// A fitted stack: surviving candidates, convex weights, and CV risks.
#[derive(Debug, Clone)]
pub struct LearnerEnsemble {
    task: Task,
    n_features: usize,
    kinds: Vec<LearnerKind>,
    fitted: Vec<candidates::Fitted>,
    weights: Vec<f64>,
    cv_risks: Vec<f64>,
    ensemble_cv_risk: f64,
    dropped: Vec<(LearnerKind, String)>,
}

impl LearnerEnsemble {
    /// Fit candidates with V-fold cross-validation, choose convex weights by
    /// minimizing CV risk over the simplex, then refit survivors on all data.
    ///
    /// A candidate that fails on any fold is dropped with a warning; the fit
    /// errors only when every candidate fails.
    pub fn fit(
        roster: &[LearnerKind],
        x: &Mat,
        y: &[f64],
        task: Task,
        v: usize,
        seed: u64,
    ) -> Result<Self> {
        Self::fit_inner(roster, x, y, task, v, seed, None)
    }

    /// As [`fit`](Self::fit), with CV folds assigned by group label so rows
    /// sharing a group are never split across folds.
    pub fn fit_grouped(
        roster: &[LearnerKind],
        x: &Mat,
        y: &[f64],
        task: Task,
        v: usize,
        seed: u64,
        groups: &[usize],
    ) -> Result<Self> {
        Self::fit_inner(roster, x, y, task, v, seed, Some(groups))
    }

    fn fit_inner(
        roster: &[LearnerKind],
        x: &Mat,
        y: &[f64],
        task: Task,
        v: usize,
        seed: u64,
        groups: Option<&[usize]>,
    ) -> Result<Self> {
        let n = x.rows();
        if roster.is_empty() {
            return Err(Error::Config("empty learner roster".into()));
        }
        if n != y.len() {
            return Err(Error::Dimension("x and y must have the same rows".into()));
        }
        if let Task::Probability = task {
            if y.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
                return Err(Error::Validation("probability targets must lie in [0, 1]".into()));
            }
        }
        if !y.iter().all(|t| t.is_finite()) {
            return Err(Error::Validation("targets must be finite".into()));
        }
        let mut dropped = Vec::new();

        // Single-candidate rosters skip cross-validation entirely.
        if roster.len() == 1 {
            let fitted = roster[0].fit(x, y, task).map_err(|e| {
                Error::Numerical(format!("sole candidate {} failed: {e}", roster[0].label()))
            })?;
            return Ok(LearnerEnsemble {
                task,
                n_features: x.cols(),
                kinds: vec![roster[0].clone()],
                fitted: vec![fitted],
                weights: vec![1.0],
                cv_risks: vec![f64::NAN],
                ensemble_cv_risk: f64::NAN,
                dropped,
            });
        }

        if n < 2 * v {
            return Err(Error::Validation(format!(
                "stacking needs at least {} rows for {v}-fold CV, got {n}",
                2 * v
            )));
        }
        let folds = match groups {
            Some(g) => {
                if g.len() != n {
                    return Err(Error::Dimension("one group label per row required".into()));
                }
                FoldPlan::grouped(g, v, seed)?
            }
            None => FoldPlan::new(n, v, seed)?,
        };
        let mut oof: Vec<Vec<f64>> = Vec::new();
        let mut survivors: Vec<LearnerKind> = Vec::new();
        'candidates: for kind in roster {
            let mut preds = vec![0.0; n];
            for fold in 0..v {
                let train: Vec<bool> = (0..n).map(|i| folds.fold_of(i) != fold).collect();
                let x_train = x.filter_rows(&train);
                let y_train: Vec<f64> = (0..n).filter(|&i| train[i]).map(|i| y[i]).collect();
                let fit = match kind.fit(&x_train, &y_train, task) {
                    Ok(f) => f,
                    Err(e) => {
                        dropped.push((kind.clone(), format!("fold {fold}: {e}")));
                        continue 'candidates;
                    }
                };
                let eval_mask: Vec<bool> = train.iter().map(|&t| !t).collect();
                let x_eval = x.filter_rows(&eval_mask);
                let fold_pred = fit.predict(&x_eval);
                let mut pos = 0;
                for i in 0..n {
                    if !train[i] {
                        preds[i] = clip_task(fold_pred[pos], task);
                        pos += 1;
                    }
                }
            }
            survivors.push(kind.clone());
            oof.push(preds);
        }
        if survivors.is_empty() {
            return Err(Error::Numerical(format!(
                "all candidates failed: {}",
                dropped
                    .iter()
                    .map(|(k, e)| format!("{}: {e}", k.label()))
                    .collect::<Vec<_>>()
                    .join("; ")
            )));
        }

        let cv_risks: Vec<f64> = oof.iter().map(|z| risk(z, y, task)).collect();
        let weights = stack_weights(&oof, y, task, &cv_risks);
        let ensemble_cv_risk = risk(&combine(&oof, &weights, task), y, task);

        let mut fitted = Vec::new();
        let mut kinds = Vec::new();
        let mut kept_weights = Vec::new();
        let mut kept_risks = Vec::new();
        for (m, kind) in survivors.iter().enumerate() {
            match kind.fit(x, y, task) {
                Ok(f) => {
                    fitted.push(f);
                    kinds.push(kind.clone());
                    kept_weights.push(weights[m]);
                    kept_risks.push(cv_risks[m]);
                }
                Err(e) => dropped.push((kind.clone(), format!("refit: {e}"))),
            }
        }
        if fitted.is_empty() {
            return Err(Error::Numerical("all candidates failed at refit".into()));
        }
        let total: f64 = kept_weights.iter().sum();
        if total <= 0.0 {
            let uniform = 1.0 / kept_weights.len() as f64;
            kept_weights.iter_mut().for_each(|w| *w = uniform);
        } else {
            kept_weights.iter_mut().for_each(|w| *w /= total);
        }
        Ok(LearnerEnsemble {
            task,
            n_features: x.cols(),
            kinds,
            fitted,
            weights: kept_weights,
            cv_risks: kept_risks,
            ensemble_cv_risk,
            dropped,
        })
    }

    pub fn predict(&self, x: &Mat) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(Error::Dimension(format!(
                "ensemble was trained on {} features, got {}",
                self.n_features,
                x.cols()
            )));
        }
        let mut out = vec![0.0; x.rows()];
        for (fit, &w) in self.fitted.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(fit.predict(x)) {
                *o += w * p;
            }
        }
        if matches!(self.task, Task::Probability) {
            for o in out.iter_mut() {
                *o = o.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            }
        }
        Ok(out)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn candidate_labels(&self) -> Vec<String> {
        self.kinds.iter().map(|k| k.label()).collect()
    }

    pub fn cv_risks(&self) -> &[f64] {
        &self.cv_risks
    }

    pub fn ensemble_cv_risk(&self) -> f64 {
        self.ensemble_cv_risk
    }

    /// Candidates dropped during fitting, with the reason.
    pub fn dropped(&self) -> &[(LearnerKind, String)] {
        &self.dropped
    }
}

fn clip_task(p: f64, task: Task) -> f64 {
    match task {
        Task::Regression => p,
        Task::Probability => p.clamp(PROB_CLIP, 1.0 - PROB_CLIP),
    }
}

fn combine(oof: &[Vec<f64>], weights: &[f64], task: Task) -> Vec<f64> {
    let n = oof[0].len();
    let mut out = vec![0.0; n];
    for (z, &w) in oof.iter().zip(weights) {
        for i in 0..n {
            out[i] += w * z[i];
        }
    }
    if matches!(task, Task::Probability) {
        for o in out.iter_mut() {
            *o = o.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        }
    }
    out
}

/// CV risk: mean squared error for regression, mean negative log-likelihood
/// for the probability task.
fn risk(pred: &[f64], y: &[f64], task: Task) -> f64 {
    let n = pred.len() as f64;
    match task {
        Task::Regression => {
            pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n
        }
        Task::Probability => {
            pred.iter()
                .zip(y)
                .map(|(p, t)| {
                    let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
                    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
                })
                .sum::<f64>()
                / n
        }
    }
}

/// Convex stacking weights by projected gradient (500 iterations with
/// backtracking), safeguarded so the result never loses to the best single
/// candidate.
fn stack_weights(oof: &[Vec<f64>], y: &[f64], task: Task, cv_risks: &[f64]) -> Vec<f64> {
    let m = oof.len();
    if m == 1 {
        return vec![1.0];
    }
    let uniform = vec![1.0 / m as f64; m];
    let from_uniform = projected_gradient(oof, y, task, uniform);
    let best_vertex = cv_risks
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut vertex = vec![0.0; m];
    vertex[best_vertex] = 1.0;
    let from_vertex = projected_gradient(oof, y, task, vertex);
    let r_u = risk(&combine(oof, &from_uniform, task), y, task);
    let r_v = risk(&combine(oof, &from_vertex, task), y, task);
    if r_u <= r_v {
        from_uniform
    } else {
        from_vertex
    }
}

fn projected_gradient(oof: &[Vec<f64>], y: &[f64], task: Task, mut alpha: Vec<f64>) -> Vec<f64> {
    let m = oof.len();
    let n = y.len();
    let mut current = risk(&combine(oof, &alpha, task), y, task);
    let mut step = 1.0;
    for _ in 0..500 {
        let pred = combine(oof, &alpha, task);
        // gradient of the risk in the combined prediction, chained through Z
        let mut grad = vec![0.0; m];
        for i in 0..n {
            let g_pred = match task {
                Task::Regression => 2.0 * (pred[i] - y[i]) / n as f64,
                Task::Probability => {
                    let p = pred[i];
                    // d/dp of -[y ln p + (1-y) ln(1-p)]
                    ((p - y[i]) / (p * (1.0 - p))) / n as f64
                }
            };
            for (j, z) in oof.iter().enumerate() {
                grad[j] += g_pred * z[i];
            }
        }
        let mut improved = false;
        let mut local = step;
        for _ in 0..40 {
            let trial: Vec<f64> = alpha.iter().zip(&grad).map(|(a, g)| a - local * g).collect();
            let proj = project_simplex(&trial);
            let r = risk(&combine(oof, &proj, task), y, task);
            if r < current - 1e-15 {
                alpha = proj;
                current = r;
                improved = true;
                step = local * 1.5;
                break;
            }
            local *= 0.5;
        }
        if !improved {
            break;
        }
    }
    alpha
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn linear_data(n: usize, noise: f64, seed: u64) -> (Mat, Vec<f64>) {
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let norm = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let x1: f64 = norm.sample(&mut rng);
            let x2: f64 = norm.sample(&mut rng);
            rows.push(vec![x1, x2]);
            y.push(2.0 * x1 - x2 + 0.5 + noise * norm.sample(&mut rng));
        }
        (Mat::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn fold_plan_partitions_evenly() {
        let plan = FoldPlan::new(23, 5, 9).unwrap();
        let mut counts = vec![0usize; 5];
        for i in 0..23 {
            counts[plan.fold_of(i)] += 1;
        }
        let max = counts.iter().max().unwrap();
        let min = counts.iter().min().unwrap();
        assert!(max - min <= 1, "{counts:?}");
    }

    #[test]
    fn noiseless_linear_dgp_prefers_the_linear_learner() {
        let (x, y) = linear_data(200, 0.0, 1);
        let roster = vec![
            LearnerKind::MeanOnly,
            LearnerKind::Linear,
            LearnerKind::Knn { k: 10 },
        ];
        let e = LearnerEnsemble::fit(&roster, &x, &y, Task::Regression, 10, 42).unwrap();
        let labels = e.candidate_labels();
        let linear_idx = labels.iter().position(|l| l == "linear").unwrap();
        assert!(
            e.weights()[linear_idx] > 0.9,
            "linear weight {:?}",
            e.weights()
        );
        let min_candidate = e.cv_risks().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(e.ensemble_cv_risk() <= min_candidate + 1e-6);
    }

    #[test]
    fn constant_target_is_matched_by_the_mean_learner() {
        let (x, _) = linear_data(80, 0.0, 2);
        let y = vec![3.25; 80];
        let roster = vec![LearnerKind::MeanOnly, LearnerKind::Linear];
        let e = LearnerEnsemble::fit(&roster, &x, &y, Task::Regression, 5, 0).unwrap();
        let pred = e.predict(&x).unwrap();
        for p in pred {
            assert!((p - 3.25).abs() < 1e-9);
        }
    }

    #[test]
    fn pure_noise_does_not_lose_to_mean_only() {
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let norm = Normal::new(0.0, 1.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..150)
            .map(|_| vec![norm.sample(&mut rng), norm.sample(&mut rng)])
            .collect();
        let y: Vec<f64> = (0..150).map(|_| norm.sample(&mut rng)).collect();
        let x = Mat::from_rows(&rows).unwrap();
        let roster = vec![
            LearnerKind::MeanOnly,
            LearnerKind::Linear,
            LearnerKind::Knn { k: 10 },
        ];
        let e = LearnerEnsemble::fit(&roster, &x, &y, Task::Regression, 10, 11).unwrap();
        let labels = e.candidate_labels();
        let mean_idx = labels.iter().position(|l| l == "mean").unwrap();
        assert!(e.ensemble_cv_risk() <= e.cv_risks()[mean_idx] + 1e-9);
    }

    #[test]
    fn simplex_feasibility_and_determinism() {
        let (x, y) = linear_data(120, 0.5, 7);
        let roster = default_roster();
        let e1 = LearnerEnsemble::fit(&roster, &x, &y, Task::Regression, 10, 3).unwrap();
        let e2 = LearnerEnsemble::fit(&roster, &x, &y, Task::Regression, 10, 3).unwrap();
        assert_eq!(e1.weights(), e2.weights());
        assert_eq!(e1.predict(&x).unwrap(), e2.predict(&x).unwrap());
        let sum: f64 = e1.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
        assert!(e1.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn failing_candidate_is_dropped_with_warning() {
        let (x, y) = linear_data(30, 0.1, 9);
        // k = 50 exceeds every training fold size, so knn fails and is dropped.
        let roster = vec![LearnerKind::Linear, LearnerKind::Knn { k: 50 }];
        let e = LearnerEnsemble::fit(&roster, &x, &y, Task::Regression, 5, 1).unwrap();
        assert_eq!(e.candidate_labels(), vec!["linear".to_string()]);
        assert_eq!(e.dropped().len(), 1);
        assert!((e.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_candidates_failing_is_an_error() {
        let (x, y) = linear_data(30, 0.1, 9);
        let roster = vec![LearnerKind::Knn { k: 50 }, LearnerKind::Knn { k: 60 }];
        assert!(LearnerEnsemble::fit(&roster, &x, &y, Task::Regression, 5, 1).is_err());
    }

    #[test]
    fn probability_predictions_are_clipped() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let rows: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.random::<f64>()]).collect();
        let x = Mat::from_rows(&rows).unwrap();
        // Constant zero target drives the mean candidate to 0, which must clip.
        let y = vec![0.0; 100];
        let e = LearnerEnsemble::fit(&[LearnerKind::MeanOnly], &x, &y, Task::Probability, 5, 1)
            .unwrap();
        let p = e.predict(&x).unwrap();
        for v in p {
            assert_eq!(v, PROB_CLIP);
        }
    }

    #[test]
    fn single_and_two_constant_candidates_average() {
        let x = Mat::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let y = vec![1.0, 1.0, 3.0, 3.0];
        let single = LearnerEnsemble::fit(&[LearnerKind::MeanOnly], &x, &y, Task::Regression, 2, 0)
            .unwrap();
        assert_eq!(single.predict(&x).unwrap(), vec![2.0; 4]);
        assert_eq!(single.weights(), &[1.0]);
    }

    #[test]
    fn arity_mismatch_rejected() {
        let (x, y) = linear_data(40, 0.1, 3);
        let e = LearnerEnsemble::fit(&[LearnerKind::Linear], &x, &y, Task::Regression, 5, 1)
            .unwrap();
        let bad = Mat::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(e.predict(&bad).is_err());
    }

    #[test]
    fn project_simplex_basics() {
        let p = project_simplex(&[0.5, 0.5]);
        assert!((p[0] - 0.5).abs() < 1e-12);
        let p = project_simplex(&[2.0, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!((p[1] - 0.0).abs() < 1e-12);
        let p = project_simplex(&[-1.0, -2.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
