//! Shift policies: declarative per-component, per-time interventions on the
//! exposure mixture, optionally guarded by a convex-hull support check.
//!
//! A guard never blends or projects: each row is either the fully shifted
//! value or the observed value, flagged accordingly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hull::ConvexHullModel;
use crate::mat::Mat;

/// Shift applied to one component at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComponentShift {
    Identity,
    /// x -> x + value
    Additive { value: f64 },
    /// x -> value * x
    Multiplicative { value: f64 },
}

impl ComponentShift {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            ComponentShift::Identity => x,
            ComponentShift::Additive { value } => x + value,
            ComponentShift::Multiplicative { value } => value * x,
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            ComponentShift::Identity => true,
            ComponentShift::Additive { value } => *value == 0.0,
            ComponentShift::Multiplicative { value } => *value == 1.0,
        }
    }
}

/// Support guard applied to the shifted point, in standardized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum HullGuard {
    None,
    /// Shift only when the shifted point stays inside the hull.
    InHull,
    /// Shift only when the hull projection distance is at most epsilon.
    MaxExtrapolation { epsilon: f64 },
}

/// A shift policy over all components and times, with an optional guard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftPolicy {
    name: String,
    /// `per_time[t][j]` is the shift for component j at time t.
    per_time: Vec<Vec<ComponentShift>>,
    guard: HullGuard,
}

impl ShiftPolicy {
    pub fn new(name: impl Into<String>, per_time: Vec<Vec<ComponentShift>>, guard: HullGuard) -> Result<Self> {
        if per_time.is_empty() {
            return Err(Error::Validation("policy needs at least one time".into()));
        }
        let j = per_time[0].len();
        if j == 0 {
            return Err(Error::Validation("policy needs at least one component".into()));
        }
        if per_time.iter().any(|row| row.len() != j) {
            return Err(Error::Dimension("each time must shift the same J components".into()));
        }
        if let HullGuard::MaxExtrapolation { epsilon } = guard {
            if !(epsilon >= 0.0) {
                return Err(Error::Validation("guard epsilon must be nonnegative".into()));
            }
        }
        Ok(ShiftPolicy { name: name.into(), per_time, guard })
    }

    /// Same per-component shifts at every time.
    pub fn uniform(
        name: impl Into<String>,
        shifts: Vec<ComponentShift>,
        times: usize,
        guard: HullGuard,
    ) -> Result<Self> {
        Self::new(name, vec![shifts; times.max(1)], guard)
    }

    /// The do-nothing policy.
    pub fn identity(j: usize, times: usize) -> Self {
        ShiftPolicy {
            name: "identity".into(),
            per_time: vec![vec![ComponentShift::Identity; j]; times.max(1)],
            guard: HullGuard::None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn times(&self) -> usize {
        self.per_time.len()
    }

    pub fn j(&self) -> usize {
        self.per_time[0].len()
    }

    pub fn guard(&self) -> HullGuard {
        self.guard
    }

    pub fn shifts_at(&self, t: usize) -> &[ComponentShift] {
        &self.per_time[t]
    }

    pub fn is_identity(&self) -> bool {
        self.per_time.iter().flatten().all(|s| s.is_identity())
    }

    /// Shift one exposure row (raw units) at time t, ignoring the guard.
    pub fn shift_row(&self, row: &[f64], t: usize) -> Vec<f64> {
        row.iter()
            .zip(&self.per_time[t])
            .map(|(&x, s)| s.apply(x))
            .collect()
    }
}

/// Post-shift exposures at one time, with per-row guard outcomes.
#[derive(Debug, Clone)]
pub struct ShiftedExposures {
    /// n x J matrix of post-shift values.
    pub values: Mat,
    /// True where the shift was applied, false where the guard left the row
    /// at its observed value.
    pub shifted: Vec<bool>,
}

/// Apply a policy to the exposure rows at time t. A hull for the same time
/// must be supplied whenever the policy carries a guard; guard decisions are
/// taken on the shifted point in standardized coordinates.
pub fn apply_shift(
    policy: &ShiftPolicy,
    exposures: &Mat,
    t: usize,
    hull: Option<&ConvexHullModel>,
) -> Result<ShiftedExposures> {
    if exposures.cols() != policy.j() {
        return Err(Error::Dimension(format!(
            "policy shifts {} components but exposures have {}",
            policy.j(),
            exposures.cols()
        )));
    }
    if t >= policy.times() {
        return Err(Error::Dimension(format!(
            "time {t} out of range for policy '{}' with {} times",
            policy.name,
            policy.times()
        )));
    }
    let guard = policy.guard();
    if !matches!(guard, HullGuard::None) && hull.is_none() {
        return Err(Error::Validation(format!(
            "policy '{}' carries a guard but no hull was supplied",
            policy.name
        )));
    }
    let n = exposures.rows();
    let mut values = Mat::zeros(n, policy.j());
    let mut flags = vec![true; n];
    let mut warm: Option<Vec<f64>> = None;
    for i in 0..n {
        let observed = exposures.row(i);
        let shifted = policy.shift_row(observed, t);
        let keep_shift = match guard {
            HullGuard::None => true,
            HullGuard::InHull => {
                let h = hull.unwrap();
                h.membership(&h.standardize_row(&shifted))?
            }
            HullGuard::MaxExtrapolation { epsilon } => {
                let h = hull.unwrap();
                let proj = h.project_warm(&h.standardize_row(&shifted), warm.as_deref())?;
                warm = Some(proj.weights.clone());
                proj.distance <= epsilon
            }
        };
        let row_out: &[f64] = if keep_shift { &shifted } else { observed };
        flags[i] = keep_shift;
        for (jj, &v) in row_out.iter().enumerate() {
            values.set(i, jj, v);
        }
    }
    Ok(ShiftedExposures { values, shifted: flags })
}

/// Ordered policy tuple for the additive-scale interaction contrast:
/// the joint shift, each single shift, and the implicit observed term.
#[derive(Debug, Clone)]
pub struct ContrastDescriptor {
    policies: Vec<ShiftPolicy>,
}

impl ContrastDescriptor {
    pub fn policies(&self) -> &[ShiftPolicy] {
        &self.policies
    }

    /// Number of terms including the implicit observed term.
    pub fn terms(&self) -> usize {
        self.policies.len() + 1
    }
}

/// Validate and order a list of policies into a contrast descriptor.
pub fn compose_contrast(policies: &[ShiftPolicy]) -> Result<ContrastDescriptor> {
    if policies.is_empty() {
        return Err(Error::Validation("a contrast needs at least one policy".into()));
    }
    let j = policies[0].j();
    let times = policies[0].times();
    for p in policies {
        if p.j() != j || p.times() != times {
            return Err(Error::Dimension(format!(
                "policy '{}' does not match the contrast dimensions (J={j}, times={times})",
                p.name()
            )));
        }
    }
    Ok(ContrastDescriptor { policies: policies.to_vec() })
}

/// Declarative policy description as found in config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub name: String,
    #[serde(default)]
    pub guard: Option<HullGuard>,
    pub shifts: Vec<ShiftBlock>,
}

/// One block of per-component shifts applying to some times.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftBlock {
    #[serde(default)]
    pub times: TimesSpec,
    /// Component label -> shift. Unnamed components stay at identity.
    pub components: BTreeMap<String, ComponentShift>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(untagged)]
pub enum TimesSpec {
    #[default]
    All,
    List(Vec<usize>),
}

impl PolicySpec {
    /// Resolve component labels and time indices into a concrete policy.
    /// Assigning two shifts to the same (component, time) is rejected.
    pub fn compile(&self, exposure_names: &[String], times: usize) -> Result<ShiftPolicy> {
        let j = exposure_names.len();
        let mut per_time = vec![vec![ComponentShift::Identity; j]; times];
        let mut assigned = vec![vec![false; j]; times];
        for block in &self.shifts {
            let block_times: Vec<usize> = match &block.times {
                TimesSpec::All => (0..times).collect(),
                TimesSpec::List(list) => list.clone(),
            };
            for &t in &block_times {
                if t >= times {
                    return Err(Error::Config(format!(
                        "policy '{}': time {t} out of range (dataset has {times} times)",
                        self.name
                    )));
                }
                for (label, shift) in &block.components {
                    let jj = exposure_names
                        .iter()
                        .position(|x| x == label)
                        .ok_or_else(|| {
                            Error::Config(format!(
                                "policy '{}': unknown component '{label}'",
                                self.name
                            ))
                        })?;
                    if assigned[t][jj] {
                        return Err(Error::Config(format!(
                            "policy '{}': component '{label}' shifted twice at time {t}",
                            self.name
                        )));
                    }
                    assigned[t][jj] = true;
                    per_time[t][jj] = *shift;
                }
            }
        }
        ShiftPolicy::new(self.name.clone(), per_time, self.guard.unwrap_or(HullGuard::None))
    }
}
