//! Convex-hull support diagnostics.
//!
//! The hull of the standardized observed exposures at a timepoint stands in
//! for the support of the mixture. Membership and projection both reduce to
//! one simplex-constrained least-squares problem over combination weights,
//!
//! ```text
//!   minimize  || X' w - p ||^2   subject to  w >= 0,  sum(w) = 1,
//! ```
//!
//! solved by Frank-Wolfe with away steps. No facet enumeration is performed;
//! in seven dimensions that is combinatorially hopeless, while the weight QP
//! handles affinely degenerate clouds as well. An active-set polish step
//! (exact affine minimization over the current support) runs periodically so
//! interior queries reach machine-precision distances quickly.

use crate::dataset::{AffineMap, LongitudinalDataset, StandardizationMap};
use crate::error::{Error, Result};
use crate::mat::Mat;

/// Default membership tolerance in standardized units.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-8;
/// Default duality-gap stop for the projection QP.
pub const DEFAULT_QP_TOL: f64 = 1e-10;
/// Iteration cap factor: the solver runs at most `50 * n` iterations.
pub const ITER_CAP_FACTOR: usize = 50;

const POLISH_EVERY: usize = 8;

/// Observed exposure point cloud at one timepoint, standardized to [0, 1]
/// coordinates, with the affine maps kept so raw-unit queries can be taken.
#[derive(Debug, Clone)]
pub struct ConvexHullModel {
    points: Mat,
    maps: Vec<AffineMap>,
    tol_membership: f64,
    tol_qp: f64,
}

/// Result of a projection query.
#[derive(Debug, Clone)]
pub struct Projection {
    /// Closest point of the hull (standardized coordinates).
    pub point: Vec<f64>,
    /// Euclidean distance from the query to the hull.
    pub distance: f64,
    /// Combination weights over the cloud rows attaining the projection.
    pub weights: Vec<f64>,
}

/// Per-row extrapolation metrics for a shifted exposure matrix.
#[derive(Debug, Clone)]
pub struct RowExtrapolation {
    pub outside: bool,
    /// Share of the shift distance lying outside the hull, in [0, 1];
    /// 0 for rows inside the hull or with a zero-length shift.
    pub r_ratio: f64,
    /// Distance from the shifted point to the hull, standardized units.
    pub abs_distance: f64,
    pub projection: Vec<f64>,
    /// projection - shifted, per component.
    pub projection_delta: Vec<f64>,
}

/// Extrapolation report over all rows plus the headline aggregates.
#[derive(Debug, Clone)]
pub struct ExtrapolationReport {
    pub rows: Vec<RowExtrapolation>,
    pub theta_r: f64,
    pub theta_abs: f64,
    pub fraction_outside: f64,
    /// Fraction of rows with r_ratio > theta_r.
    pub fraction_r_gt: f64,
    /// Fraction of rows with abs_distance > theta_abs.
    pub fraction_abs_gt: f64,
    /// Per component: fraction of rows whose projection moves that component
    /// up relative to the shifted value (delta above the membership tolerance).
    pub component_increased: Vec<f64>,
}

impl ConvexHullModel {
    /// Wrap a standardized point cloud directly (rows are points).
    pub fn from_standardized(points: Mat, maps: Vec<AffineMap>) -> Result<Self> {
        if points.rows() == 0 {
            return Err(Error::Validation("hull needs at least one point".into()));
        }
        if maps.len() != points.cols() {
            return Err(Error::Dimension("one affine map per component required".into()));
        }
        if !points.all_finite() {
            return Err(Error::Validation("hull points must be finite".into()));
        }
        Ok(ConvexHullModel {
            points,
            maps,
            tol_membership: DEFAULT_MEMBERSHIP_TOL,
            tol_qp: DEFAULT_QP_TOL,
        })
    }

    pub fn with_tolerances(mut self, membership: f64, qp: f64) -> Self {
        self.tol_membership = membership;
        self.tol_qp = qp;
        self
    }

    pub fn n_points(&self) -> usize {
        self.points.rows()
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn membership_tol(&self) -> f64 {
        self.tol_membership
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    /// Standardize a raw-unit exposure row into hull coordinates.
    pub fn standardize_row(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().zip(&self.maps).map(|(&x, m)| m.apply(x)).collect()
    }

    /// Whether `p` (standardized coordinates) lies in the hull, i.e. the
    /// optimal combination residual is at most the membership tolerance.
    pub fn membership(&self, p: &[f64]) -> Result<bool> {
        self.check_query(p)?;
        let member_f = 0.5 * self.tol_membership * self.tol_membership;
        let sol = self.solve(p, None, Some(member_f));
        match sol.certificate {
            Certificate::Member => Ok(true),
            Certificate::NonMember => Ok(false),
            Certificate::Converged | Certificate::IterCap => Ok(sol.distance() <= self.tol_membership),
        }
    }

    /// Closest hull point to `p` (standardized coordinates) and its distance.
    pub fn project(&self, p: &[f64]) -> Result<Projection> {
        self.project_warm(p, None)
    }

    /// Projection with a warm-start weight vector from a previous query of
    /// the same hull. Results agree with the cold start within the QP
    /// tolerance.
    pub fn project_warm(&self, p: &[f64], warm: Option<&[f64]>) -> Result<Projection> {
        self.check_query(p)?;
        let sol = self.solve(p, warm, None);
        if matches!(sol.certificate, Certificate::IterCap) {
            return Err(Error::Numerical(format!(
                "projection did not converge within {} iterations (best residual {:.3e})",
                ITER_CAP_FACTOR * self.n_points(),
                sol.distance()
            )));
        }
        Ok(Projection { point: sol.q, distance: (2.0 * sol.f.max(0.0)).sqrt(), weights: sol.w })
    }

    fn check_query(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "query has {} components, hull is {}-dimensional",
                p.len(),
                self.dim()
            )));
        }
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation("query point must be finite".into()));
        }
        Ok(())
    }

    /// Away-step Frank-Wolfe on the weight simplex with exact line search,
    /// periodic active-set polish, and early membership certificates.
    fn solve(&self, p: &[f64], warm: Option<&[f64]>, member_f: Option<f64>) -> Solution {
        let n = self.n_points();
        let d = self.dim();
        let x = &self.points;
        let cap = ITER_CAP_FACTOR * n;

        let mut w = match warm {
            Some(prev) if prev.len() == n && prev.iter().all(|v| *v >= 0.0) => {
                let s: f64 = prev.iter().sum();
                if s > 0.0 {
                    prev.iter().map(|v| v / s).collect()
                } else {
                    init_weights(x, p)
                }
            }
            _ => init_weights(x, p),
        };
        let mut q = combine(x, &w);
        let mut g = vec![0.0; n];
        let mut resid = vec![0.0; d];

        let member_stop = member_f.map(|f| f * 0.01);
        let nonmember_stop = member_f;

        let mut certificate = Certificate::IterCap;
        let mut iter = 0;
        while iter < cap {
            iter += 1;
            for k in 0..d {
                resid[k] = q[k] - p[k];
            }
            let f = 0.5 * resid.iter().map(|r| r * r).sum::<f64>();
            // gradient over weights: g_i = x_i . (q - p)
            let mut min_g = f64::INFINITY;
            let mut s_idx = 0;
            let mut max_g_active = f64::NEG_INFINITY;
            let mut v_idx = 0;
            for i in 0..n {
                let xi = x.row(i);
                let mut gi = 0.0;
                for k in 0..d {
                    gi += xi[k] * resid[k];
                }
                g[i] = gi;
                if gi < min_g {
                    min_g = gi;
                    s_idx = i;
                }
                if w[i] > 0.0 && gi > max_g_active {
                    max_g_active = gi;
                    v_idx = i;
                }
            }
            let gw: f64 = q.iter().zip(&resid).map(|(a, b)| a * b).sum();
            let gap = gw - min_g;

            if let Some(stop) = member_stop {
                if f <= stop {
                    certificate = Certificate::Member;
                    break;
                }
            }
            if let Some(thresh) = nonmember_stop {
                if f - gap > thresh {
                    certificate = Certificate::NonMember;
                    break;
                }
            }
            if gap <= self.tol_qp || f <= 1e-28 {
                certificate = Certificate::Converged;
                break;
            }

            let away_gain = max_g_active - gw;
            if gap >= away_gain || w[v_idx] >= 1.0 {
                // Frank-Wolfe step toward vertex s.
                let xs = x.row(s_idx);
                let mut dir_norm2 = 0.0;
                let mut dir_dot = 0.0;
                for k in 0..d {
                    let dk = xs[k] - q[k];
                    dir_norm2 += dk * dk;
                    dir_dot += resid[k] * dk;
                }
                if dir_norm2 <= 0.0 {
                    certificate = Certificate::Converged;
                    break;
                }
                let gamma = (-dir_dot / dir_norm2).clamp(0.0, 1.0);
                if gamma <= 0.0 {
                    certificate = Certificate::Converged;
                    break;
                }
                for wi in w.iter_mut() {
                    *wi *= 1.0 - gamma;
                }
                w[s_idx] += gamma;
                for k in 0..d {
                    q[k] = (1.0 - gamma) * q[k] + gamma * xs[k];
                }
            } else {
                // Away step from the worst active vertex.
                let xv = x.row(v_idx);
                let gamma_max = w[v_idx] / (1.0 - w[v_idx]);
                let mut dir_norm2 = 0.0;
                let mut dir_dot = 0.0;
                for k in 0..d {
                    let dk = q[k] - xv[k];
                    dir_norm2 += dk * dk;
                    dir_dot += resid[k] * dk;
                }
                if dir_norm2 <= 0.0 {
                    certificate = Certificate::Converged;
                    break;
                }
                let gamma = (-dir_dot / dir_norm2).clamp(0.0, gamma_max);
                let drop = gamma >= gamma_max;
                for wi in w.iter_mut() {
                    *wi *= 1.0 + gamma;
                }
                w[v_idx] -= gamma;
                if drop {
                    w[v_idx] = 0.0;
                }
                for k in 0..d {
                    q[k] = (1.0 + gamma) * q[k] - gamma * xv[k];
                }
            }

            if iter % POLISH_EVERY == 0 {
                self.polish(&mut w, &mut q, p);
            }
        }
        self.polish(&mut w, &mut q, p);
        let f = 0.5 * q.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        if matches!(certificate, Certificate::IterCap) {
            // The polish may have pushed us below the gap after the cap.
            let gap = self.fw_gap(&q, p);
            if gap <= self.tol_qp || f <= 1e-28 {
                certificate = Certificate::Converged;
            }
        }
        Solution { w, q, f, certificate }
    }

    fn fw_gap(&self, q: &[f64], p: &[f64]) -> f64 {
        let d = self.dim();
        let resid: Vec<f64> = (0..d).map(|k| q[k] - p[k]).collect();
        let mut min_g = f64::INFINITY;
        for i in 0..self.n_points() {
            let xi = self.points.row(i);
            let gi: f64 = (0..d).map(|k| xi[k] * resid[k]).sum();
            if gi < min_g {
                min_g = gi;
            }
        }
        let gw: f64 = q.iter().zip(&resid).map(|(a, b)| a * b).sum();
        gw - min_g
    }

    /// Exact affine minimization over the active support, dropping vertices
    /// whose weight would turn negative (finite inner loop). Keeps f
    /// non-increasing; a no-op when the KKT system is degenerate.
    fn polish(&self, w: &mut [f64], q: &mut [f64], p: &[f64]) {
        let d = self.dim();
        loop {
            let active: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 1e-14).collect();
            let m = active.len();
            if m == 0 || m > 64 {
                break;
            }
            if m == 1 {
                let i = active[0];
                for wi in w.iter_mut() {
                    *wi = 0.0;
                }
                w[i] = 1.0;
                q.copy_from_slice(self.points.row(i));
                break;
            }
            // KKT system for min ||X_S' u - p||^2 s.t. sum(u) = 1.
            let dim = m + 1;
            let mut a = vec![0.0; dim * dim];
            let mut b = vec![0.0; dim];
            for (ai, &i) in active.iter().enumerate() {
                let xi = self.points.row(i);
                for (aj, &jj) in active.iter().enumerate().skip(ai) {
                    let xj = self.points.row(jj);
                    let mut dot = 0.0;
                    for k in 0..d {
                        dot += xi[k] * xj[k];
                    }
                    if ai == aj {
                        dot += 1e-12; // keep degenerate clouds solvable
                    }
                    a[ai * dim + aj] = dot;
                    a[aj * dim + ai] = dot;
                }
                a[ai * dim + m] = 1.0;
                a[m * dim + ai] = 1.0;
                let mut dot = 0.0;
                for k in 0..d {
                    dot += xi[k] * p[k];
                }
                b[ai] = dot;
            }
            b[m] = 1.0;
            if crate::mat::solve_dense(&mut a, &mut b, dim).is_err() {
                break;
            }
            let u = &b[..m];
            if u.iter().any(|v| !v.is_finite()) {
                break;
            }
            if u.iter().all(|&v| v >= -1e-12) {
                let total: f64 = u.iter().map(|&v| v.max(0.0)).sum();
                if total <= 0.0 {
                    break;
                }
                let current_f = 0.5
                    * q.iter()
                        .zip(p)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                let mut q_new = vec![0.0; d];
                for (ai, &i) in active.iter().enumerate() {
                    let xi = self.points.row(i);
                    let wi = u[ai].max(0.0) / total;
                    for k in 0..d {
                        q_new[k] += wi * xi[k];
                    }
                }
                let new_f = 0.5
                    * q_new
                        .iter()
                        .zip(p)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                if new_f <= current_f {
                    for wi in w.iter_mut() {
                        *wi = 0.0;
                    }
                    for (ai, &i) in active.iter().enumerate() {
                        w[i] = u[ai].max(0.0) / total;
                    }
                    q.copy_from_slice(&q_new);
                }
                break;
            }
            // Move toward u until the first weight hits zero, drop it, retry.
            let mut theta = 1.0_f64;
            for (ai, &i) in active.iter().enumerate() {
                if u[ai] < 0.0 {
                    let t = w[i] / (w[i] - u[ai]);
                    if t < theta {
                        theta = t;
                    }
                }
            }
            if !(0.0..=1.0).contains(&theta) {
                break;
            }
            for (ai, &i) in active.iter().enumerate() {
                w[i] = (1.0 - theta) * w[i] + theta * u[ai];
                if w[i] < 1e-14 {
                    w[i] = 0.0;
                }
            }
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                break;
            }
            for wi in w.iter_mut() {
                *wi /= total;
            }
            let mut q_new = vec![0.0; d];
            for i in 0..w.len() {
                if w[i] > 0.0 {
                    let xi = self.points.row(i);
                    for k in 0..d {
                        q_new[k] += w[i] * xi[k];
                    }
                }
            }
            q.copy_from_slice(&q_new);
        }
    }

    /// Per-row extrapolation metrics for shifted exposures. `observed` and
    /// `shifted` are standardized n x J matrices over the same rows.
    pub fn extrapolation_report(
        &self,
        observed: &Mat,
        shifted: &Mat,
        theta_r: f64,
        theta_abs: f64,
    ) -> Result<ExtrapolationReport> {
        if observed.rows() != shifted.rows()
            || observed.cols() != shifted.cols()
            || observed.cols() != self.dim()
        {
            return Err(Error::Dimension("observed and shifted must be conformable n x J matrices".into()));
        }
        let n = shifted.rows();
        let j = shifted.cols();
        let mut rows = Vec::with_capacity(n);
        let mut warm: Option<Vec<f64>> = None;
        let mut n_outside = 0usize;
        let mut n_r = 0usize;
        let mut n_abs = 0usize;
        let mut comp_up = vec![0usize; j];
        for r in 0..n {
            let p = shifted.row(r);
            let proj = self.project_warm(p, warm.as_deref())?;
            warm = Some(proj.weights.clone());
            let outside = proj.distance > self.tol_membership;
            let shift_len = observed
                .row(r)
                .iter()
                .zip(p)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let r_ratio = if !outside || shift_len == 0.0 {
                0.0
            } else {
                (proj.distance / shift_len).clamp(0.0, 1.0)
            };
            let delta: Vec<f64> = proj.point.iter().zip(p).map(|(a, b)| a - b).collect();
            if outside {
                n_outside += 1;
            }
            if r_ratio > theta_r {
                n_r += 1;
            }
            if proj.distance > theta_abs {
                n_abs += 1;
            }
            for (k, &dv) in delta.iter().enumerate() {
                if dv > self.tol_membership {
                    comp_up[k] += 1;
                }
            }
            rows.push(RowExtrapolation {
                outside,
                r_ratio,
                abs_distance: proj.distance,
                projection: proj.point,
                projection_delta: delta,
            });
        }
        let nf = n.max(1) as f64;
        Ok(ExtrapolationReport {
            rows,
            theta_r,
            theta_abs,
            fraction_outside: n_outside as f64 / nf,
            fraction_r_gt: n_r as f64 / nf,
            fraction_abs_gt: n_abs as f64 / nf,
            component_increased: comp_up.into_iter().map(|c| c as f64 / nf).collect(),
        })
    }
}

enum Certificate {
    Member,
    NonMember,
    Converged,
    IterCap,
}

struct Solution {
    w: Vec<f64>,
    q: Vec<f64>,
    f: f64,
    certificate: Certificate,
}

impl Solution {
    fn distance(&self) -> f64 {
        (2.0 * self.f.max(0.0)).sqrt()
    }
}

fn init_weights(x: &Mat, p: &[f64]) -> Vec<f64> {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for i in 0..x.rows() {
        let d: f64 = x.row(i).iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    let mut w = vec![0.0; x.rows()];
    w[best] = 1.0;
    w
}

fn combine(x: &Mat, w: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; x.cols()];
    for i in 0..x.rows() {
        if w[i] != 0.0 {
            let xi = x.row(i);
            for k in 0..x.cols() {
                q[k] += w[i] * xi[k];
            }
        }
    }
    q
}

/// Build the hull of the standardized observed exposures at time `t`.
/// Rows that are censored before `t` are excluded.
pub fn build_hull(
    ds: &LongitudinalDataset,
    t: usize,
    map: &StandardizationMap,
) -> Result<ConvexHullModel> {
    if t >= ds.times() {
        return Err(Error::Dimension(format!("time {t} out of range")));
    }
    let at_risk = ds.at_risk(t);
    let std = map.apply_matrix(t, ds.exposures(t));
    let cloud = std.filter_rows(&at_risk);
    if cloud.rows() == 0 {
        return Err(Error::Validation(format!("no observed exposures at time {t}")));
    }
    ConvexHullModel::from_standardized(cloud, map.components(t).to_vec())
}
