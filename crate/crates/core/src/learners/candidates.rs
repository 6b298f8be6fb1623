//! Individual learner fits: mean-only, (penalized) linear and logistic
//! regression, and tie-inclusive k-nearest-neighbors.
//!
//! All fits standardize features internally and are fully deterministic.
//! Logistic fits start from the zero coefficient vector and check the
//! gradient before stepping, so exactly symmetric training sets (for example
//! the stacked classification problem under an identity shift) stay at
//! probability one half to machine precision.

use crate::error::{Error, Result};
use crate::mat::{solve_dense, Mat};

use super::Task;

const LOGISTIC_MAX_ITER: usize = 60;

#[derive(Debug, Clone)]
pub(super) struct Standardizer {
    centers: Vec<f64>,
    scales: Vec<f64>,
}

impl Standardizer {
    pub(super) fn fit(x: &Mat) -> Self {
        let n = x.rows().max(1) as f64;
        let p = x.cols();
        let mut centers = vec![0.0; p];
        let mut scales = vec![0.0; p];
        for r in 0..x.rows() {
            for c in 0..p {
                centers[c] += x.get(r, c);
            }
        }
        for c in 0..p {
            centers[c] /= n;
        }
        for r in 0..x.rows() {
            for c in 0..p {
                let d = x.get(r, c) - centers[c];
                scales[c] += d * d;
            }
        }
        for c in 0..p {
            scales[c] = (scales[c] / n).sqrt();
            if scales[c] <= 0.0 {
                scales[c] = 1.0;
            }
        }
        Standardizer { centers, scales }
    }

    pub(super) fn apply_row(&self, row: &[f64], out: &mut [f64]) {
        for (c, &v) in row.iter().enumerate() {
            out[c] = (v - self.centers[c]) / self.scales[c];
        }
    }
}

/// A fitted candidate ready to predict.
#[derive(Debug, Clone)]
pub(super) enum Fitted {
    Mean {
        value: f64,
    },
    /// Linear predictor on standardized features; `logistic` selects the
    /// link. `beta[0]` is the intercept.
    Glm {
        std: Standardizer,
        beta: Vec<f64>,
        logistic: bool,
    },
    Knn {
        std: Standardizer,
        x: Mat,
        y: Vec<f64>,
        k: usize,
    },
    Boost(super::boost::BoostFit),
}

impl Fitted {
    pub(super) fn predict(&self, x: &Mat) -> Vec<f64> {
        match self {
            Fitted::Mean { value } => vec![*value; x.rows()],
            Fitted::Glm { std, beta, logistic } => {
                let p = x.cols();
                let mut z = vec![0.0; p];
                (0..x.rows())
                    .map(|r| {
                        std.apply_row(x.row(r), &mut z);
                        let mut eta = beta[0];
                        for c in 0..p {
                            eta += beta[c + 1] * z[c];
                        }
                        if *logistic {
                            expit(eta)
                        } else {
                            eta
                        }
                    })
                    .collect()
            }
            Fitted::Knn { std, x: train, y, k } => {
                let p = train.cols();
                let mut z = vec![0.0; p];
                (0..x.rows())
                    .map(|r| {
                        std.apply_row(x.row(r), &mut z);
                        knn_predict(train, y, &z, *k)
                    })
                    .collect()
            }
            Fitted::Boost(fit) => fit.predict(x),
        }
    }
}

pub(super) fn fit_mean(y: &[f64]) -> Fitted {
    Fitted::Mean { value: crate::mat::mean(y) }
}

/// Least squares / logistic fit with an L2 penalty (excluding the intercept).
pub(super) fn fit_glm(x: &Mat, y: &[f64], task: Task, lambda: f64) -> Result<Fitted> {
    let std = Standardizer::fit(x);
    let n = x.rows();
    let p = x.cols();
    if n == 0 {
        return Err(Error::Validation("glm needs at least one row".into()));
    }
    let mut xs = Mat::zeros(n, p);
    let mut z = vec![0.0; p];
    for r in 0..n {
        std.apply_row(x.row(r), &mut z);
        for c in 0..p {
            xs.set(r, c, z[c]);
        }
    }
    let beta = match task {
        Task::Regression => least_squares(&xs, y, lambda)?,
        Task::Probability => logistic_irls(&xs, y, lambda)?,
    };
    Ok(Fitted::Glm { std, beta, logistic: matches!(task, Task::Probability) })
}

pub(super) fn fit_knn(x: &Mat, y: &[f64], k: usize) -> Result<Fitted> {
    if k == 0 {
        return Err(Error::Config("knn needs k >= 1".into()));
    }
    if x.rows() < k {
        return Err(Error::Validation(format!(
            "knn with k = {k} needs at least {k} training rows, got {}",
            x.rows()
        )));
    }
    let std = Standardizer::fit(x);
    let n = x.rows();
    let p = x.cols();
    let mut xs = Mat::zeros(n, p);
    let mut z = vec![0.0; p];
    for r in 0..n {
        std.apply_row(x.row(r), &mut z);
        for c in 0..p {
            xs.set(r, c, z[c]);
        }
    }
    Ok(Fitted::Knn { std, x: xs, y: y.to_vec(), k })
}

/// Mean target over the k nearest training rows, including every row tied
/// with the k-th distance. Tie inclusion keeps exactly symmetric training
/// sets exactly symmetric in prediction.
fn knn_predict(train: &Mat, y: &[f64], z: &[f64], k: usize) -> f64 {
    let n = train.rows();
    let mut dist: Vec<(f64, usize)> = (0..n)
        .map(|r| {
            let d: f64 = train
                .row(r)
                .iter()
                .zip(z)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d, r)
        })
        .collect();
    dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let cutoff = dist[k - 1].0;
    let mut sum = 0.0;
    let mut count = 0usize;
    for &(d, r) in &dist {
        if d <= cutoff {
            sum += y[r];
            count += 1;
        } else {
            break;
        }
    }
    sum / count as f64
}

fn least_squares(x: &Mat, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n = x.rows();
    let p = x.cols() + 1; // intercept first
    let mut g = vec![0.0; p * p];
    let mut b = vec![0.0; p];
    for r in 0..n {
        let row = x.row(r);
        // accumulate [1, row] outer products
        g[0] += 1.0;
        for c in 0..row.len() {
            g[c + 1] += row[c];
            g[(c + 1) * p] += row[c];
            for c2 in c..row.len() {
                g[(c + 1) * p + (c2 + 1)] += row[c] * row[c2];
            }
        }
        b[0] += y[r];
        for c in 0..row.len() {
            b[c + 1] += row[c] * y[r];
        }
    }
    // mirror the upper triangle
    for c in 1..p {
        for c2 in (c + 1)..p {
            g[c2 * p + c] = g[c * p + c2];
        }
    }
    for c in 1..p {
        g[c * p + c] += lambda.max(1e-10) * n as f64;
    }
    solve_dense(&mut g, &mut b, p)?;
    Ok(b)
}

/// IRLS with step halving. Convergence is checked before stepping so a zero
/// gradient at the origin returns the null model untouched.
fn logistic_irls(x: &Mat, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n = x.rows();
    let p = x.cols() + 1;
    let mut beta = vec![0.0; p];
    let lam = lambda.max(1e-10) * n as f64;
    let tol = 1e-9 * (n as f64).max(1.0);
    let mut eta = vec![0.0; n];
    let mut nll = nll_logistic(x, y, &beta, lam, &mut eta);
    for _ in 0..LOGISTIC_MAX_ITER {
        // gradient and Hessian at the current beta
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        for r in 0..n {
            let pr = expit(eta[r]);
            let w = (pr * (1.0 - pr)).max(1e-10);
            let resid = y[r] - pr;
            let row = x.row(r);
            grad[0] += resid;
            hess[0] += w;
            for c in 0..row.len() {
                grad[c + 1] += resid * row[c];
                hess[c + 1] += w * row[c];
                hess[(c + 1) * p] += w * row[c];
                for c2 in c..row.len() {
                    hess[(c + 1) * p + (c2 + 1)] += w * row[c] * row[c2];
                }
            }
        }
        for c in 1..p {
            grad[c] -= lam * beta[c];
            hess[c * p + c] += lam;
            for c2 in (c + 1)..p {
                hess[c2 * p + c] = hess[c * p + c2];
            }
        }
        let gmax = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if gmax <= tol {
            break;
        }
        let mut step = grad.clone();
        solve_dense(&mut hess, &mut step, p)?;
        // step halving on the penalized NLL
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let cand_nll = nll_logistic(x, y, &cand, lam, &mut eta);
            if cand_nll <= nll {
                beta = cand;
                nll = cand_nll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(beta)
}

fn nll_logistic(x: &Mat, y: &[f64], beta: &[f64], lam: f64, eta_out: &mut [f64]) -> f64 {
    let mut nll = 0.0;
    for r in 0..x.rows() {
        let row = x.row(r);
        let mut eta = beta[0];
        for c in 0..row.len() {
            eta += beta[c + 1] * row[c];
        }
        eta_out[r] = eta;
        // log(1 + exp(eta)) - y*eta, stably
        let softplus = if eta > 30.0 {
            eta
        } else if eta < -30.0 {
            0.0
        } else {
            (1.0 + eta.exp()).ln()
        };
        nll += softplus - y[r] * eta;
    }
    let pen: f64 = beta[1..].iter().map(|b| b * b).sum();
    nll + 0.5 * lam * pen
}

#[inline]
pub(crate) fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
