//! Shift-intervention analysis for multi-component continuous exposures.
//!
//! The crate covers the full workflow for quantifying the effect of shifting
//! one or more components of a continuous exposure mixture, at a single
//! timepoint or longitudinally:
//!
//! * [`dataset`] — ingestion, validation, and standardization of longitudinal
//!   mixture data, plus descriptive summaries.
//! * [`policy`] — declarative shift policies (additive, multiplicative,
//!   per-component, per-time), optionally guarded by support diagnostics.
//! * [`hull`] — convex-hull support diagnostics: membership, projection,
//!   extrapolation ratios, and projection-delta reports.
//! * [`density`] — kernel-density low-support diagnostics inside the hull.
//! * [`learners`] — cross-validated stacking of regression/classification
//!   learners with convex weights, and cross-fitting fold management.
//! * [`estimators`] — cross-fitted TMLE and SDR estimation of shift-policy
//!   estimands with censoring weights and subpopulation restriction.
//! * [`inference`] — influence-function arithmetic, Wald intervals, and the
//!   additive-scale interaction test.
//! * [`simulate`] — structural-equation data generators with Monte Carlo
//!   counterfactual ground truth.

pub mod dataset;
pub mod density;
pub mod error;
pub mod estimators;
pub mod hull;
pub mod inference;
pub mod learners;
pub mod mat;
pub mod policy;
pub mod simulate;

pub use error::{Error, Result};
pub use mat::Mat;
