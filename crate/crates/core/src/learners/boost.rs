//! Gradient-boosted shallow regression trees (stumps up to depth 3).
//!
//! Squared-error boosting for regression; log-loss boosting with one Newton
//! step per leaf for the probability task. Splits are exact (all midpoints
//! between distinct feature values), with a minimum leaf size of 5, so fits
//! are deterministic.

use crate::mat::Mat;

use super::candidates::expit;
use super::Task;

const MIN_LEAF: usize = 5;
const MAX_LEAF_VALUE: f64 = 4.0;

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

impl Node {
    fn value(&self, row: &[f64]) -> f64 {
        match self {
            Node::Leaf(v) => *v,
            Node::Split { feature, threshold, left, right } => {
                if row[*feature] <= *threshold {
                    left.value(row)
                } else {
                    right.value(row)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(super) struct BoostFit {
    init: f64,
    trees: Vec<Node>,
    shrinkage: f64,
    logistic: bool,
}

impl BoostFit {
    pub(super) fn predict(&self, x: &Mat) -> Vec<f64> {
        (0..x.rows())
            .map(|r| {
                let row = x.row(r);
                let mut f = self.init;
                for tree in &self.trees {
                    f += self.shrinkage * tree.value(row);
                }
                if self.logistic {
                    expit(f)
                } else {
                    f
                }
            })
            .collect()
    }
}

pub(super) fn fit_boost(
    x: &Mat,
    y: &[f64],
    task: Task,
    rounds: usize,
    depth: usize,
    shrinkage: f64,
) -> BoostFit {
    let n = x.rows();
    let logistic = matches!(task, Task::Probability);
    let init = match task {
        Task::Regression => crate::mat::mean(y),
        Task::Probability => {
            let m = crate::mat::mean(y).clamp(1e-6, 1.0 - 1e-6);
            (m / (1.0 - m)).ln()
        }
    };
    let mut f = vec![init; n];
    let mut trees = Vec::with_capacity(rounds);
    let mut grad = vec![0.0; n];
    let mut hess = vec![1.0; n];
    for _ in 0..rounds {
        match task {
            Task::Regression => {
                for i in 0..n {
                    grad[i] = y[i] - f[i];
                }
            }
            Task::Probability => {
                for i in 0..n {
                    let p = expit(f[i]);
                    grad[i] = y[i] - p;
                    hess[i] = (p * (1.0 - p)).max(1e-10);
                }
            }
        }
        let idx: Vec<usize> = (0..n).collect();
        let tree = grow(x, &grad, &hess, &idx, depth);
        let mut any_update = false;
        for i in 0..n {
            let v = tree.value(x.row(i));
            if v != 0.0 {
                any_update = true;
            }
            f[i] += shrinkage * v;
        }
        trees.push(tree);
        if !any_update {
            break; // all-zero tree: residual structure exhausted
        }
    }
    BoostFit { init, trees, shrinkage, logistic }
}

/// Grow a tree greedily; leaf value is the Newton step sum(grad)/sum(hess).
fn grow(x: &Mat, grad: &[f64], hess: &[f64], idx: &[usize], depth: usize) -> Node {
    let g: f64 = idx.iter().map(|&i| grad[i]).sum();
    let h: f64 = idx.iter().map(|&i| hess[i]).sum();
    let leaf = || Node::Leaf((g / h.max(1e-10)).clamp(-MAX_LEAF_VALUE, MAX_LEAF_VALUE));
    if depth == 0 || idx.len() < 2 * MIN_LEAF {
        return leaf();
    }
    let parent_score = g * g / h.max(1e-10);
    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    let mut order = idx.to_vec();
    for feature in 0..x.cols() {
        order.sort_by(|&a, &b| {
            x.get(a, feature)
                .partial_cmp(&x.get(b, feature))
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut gl = 0.0;
        let mut hl = 0.0;
        for pos in 0..order.len() - 1 {
            let i = order[pos];
            gl += grad[i];
            hl += hess[i];
            let xa = x.get(i, feature);
            let xb = x.get(order[pos + 1], feature);
            if xa == xb {
                continue;
            }
            let nl = pos + 1;
            let nr = order.len() - nl;
            if nl < MIN_LEAF || nr < MIN_LEAF {
                continue;
            }
            let gr = g - gl;
            let hr = h - hl;
            let gain = gl * gl / hl.max(1e-10) + gr * gr / hr.max(1e-10) - parent_score;
            if gain > 1e-12 && best.map_or(true, |(bg, _, _)| gain > bg) {
                best = Some((gain, feature, 0.5 * (xa + xb)));
            }
        }
    }
    match best {
        None => leaf(),
        Some((_, feature, threshold)) => {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| x.get(i, feature) <= threshold);
            Node::Split {
                feature,
                threshold,
                left: Box::new(grow(x, grad, hess, &left_idx, depth - 1)),
                right: Box::new(grow(x, grad, hess, &right_idx, depth - 1)),
            }
        }
    }
}
