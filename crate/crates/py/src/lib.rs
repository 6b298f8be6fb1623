//! Python bindings: datasets, shift policies, hull diagnostics, and the
//! doubly robust estimators, with policies and schemas passed as TOML
//! snippets so the Python surface stays small.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mixshift::dataset::{ingest_csv, CsvSchema, LongitudinalDataset};
use mixshift::density::{flag_low_density, kde_pair};
use mixshift::error::Error;
use mixshift::estimators::{
    contrast_vs_observed, observed_mean, restrict_subpopulation, EstimandEstimate, FitConfig,
    SubpopulationPredicate,
};
use mixshift::hull::{build_hull, ConvexHullModel};
use mixshift::inference::{interaction_test, wald};
use mixshift::mat::Mat;
use mixshift::policy::{apply_shift, PolicySpec, ShiftPolicy};
use mixshift::simulate::{counterfactual_truth, draw_observational, reference_dgp, reference_dgps};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Longitudinal mixture dataset.
#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: LongitudinalDataset,
}

#[pymethods]
impl PyDataset {
    /// Load a CSV file; `schema_toml` is the same schema block the CLI uses.
    #[staticmethod]
    fn from_csv(path: &str, schema_toml: &str) -> PyResult<Self> {
        let schema: CsvSchema =
            toml::from_str(schema_toml).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let inner = ingest_csv(std::path::Path::new(path), &schema).map_err(py_err)?;
        Ok(PyDataset { inner })
    }

    /// Draw from a named reference data-generating process.
    #[staticmethod]
    fn simulate(dgp: &str, n: usize, seed: u64) -> PyResult<Self> {
        let model = reference_dgp(dgp).map_err(py_err)?.model;
        Ok(PyDataset { inner: draw_observational(&model, n, seed).map_err(py_err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn times(&self) -> usize {
        self.inner.times()
    }

    #[getter]
    fn exposure_names(&self) -> Vec<String> {
        self.inner.exposure_names().to_vec()
    }

    fn outcome(&self) -> Vec<Option<f64>> {
        self.inner.outcome().to_vec()
    }

    fn exposures(&self, t: usize) -> PyResult<Vec<Vec<f64>>> {
        if t >= self.inner.times() {
            return Err(PyValueError::new_err(format!("time {t} out of range")));
        }
        Ok(self.inner.exposures(t).iter_rows().map(|r| r.to_vec()).collect())
    }

    /// Spearman correlation matrix among components at time t.
    fn spearman(&self, t: usize) -> PyResult<Vec<Vec<f64>>> {
        let sp = self.inner.spearman_matrix(t).map_err(py_err)?;
        Ok((0..self.inner.j())
            .map(|a| (0..self.inner.j()).map(|b| sp.matrix.get(a, b)).collect())
            .collect())
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path)?;
        self.inner.write_long_csv(file).map_err(py_err)
    }

    /// Convex hull of the standardized observed exposures at time t.
    fn hull(&self, t: usize) -> PyResult<PyHull> {
        let map = self.inner.standardize();
        Ok(PyHull { inner: build_hull(&self.inner, t, &map).map_err(py_err)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, times={}, components={})",
            self.inner.n(),
            self.inner.times(),
            self.inner.j()
        )
    }
}

/// A shift policy parsed from TOML and bound to a dataset's components.
#[pyclass(name = "Policy", skip_from_py_object)]
#[derive(Clone)]
struct PyPolicy {
    spec: Option<PolicySpec>,
}

#[pymethods]
impl PyPolicy {
    /// Parse the same policy TOML the CLI accepts.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let spec: PolicySpec =
            toml::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyPolicy { spec: Some(spec) })
    }

    /// The do-nothing policy.
    #[staticmethod]
    fn identity() -> Self {
        PyPolicy { spec: None }
    }

    fn __repr__(&self) -> String {
        match &self.spec {
            Some(s) => format!("Policy({})", s.name),
            None => "Policy(identity)".into(),
        }
    }
}

impl PyPolicy {
    fn compile(&self, ds: &LongitudinalDataset) -> PyResult<ShiftPolicy> {
        match &self.spec {
            Some(spec) => spec.compile(ds.exposure_names(), ds.times()).map_err(py_err),
            None => Ok(ShiftPolicy::identity(ds.j(), ds.times())),
        }
    }
}

/// Convex hull supporting membership and projection queries.
#[pyclass(name = "Hull")]
struct PyHull {
    inner: ConvexHullModel,
}

#[pymethods]
impl PyHull {
    #[getter]
    fn n_points(&self) -> usize {
        self.inner.n_points()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Membership of a point in standardized coordinates.
    fn membership(&self, point: Vec<f64>) -> PyResult<bool> {
        self.inner.membership(&point).map_err(py_err)
    }

    /// Membership of a raw-unit exposure row.
    fn membership_raw(&self, row: Vec<f64>) -> PyResult<bool> {
        self.inner
            .membership(&self.inner.standardize_row(&row))
            .map_err(py_err)
    }

    /// Closest hull point and distance, standardized coordinates.
    fn project(&self, point: Vec<f64>) -> PyResult<(Vec<f64>, f64)> {
        let p = self.inner.project(&point).map_err(py_err)?;
        Ok((p.point, p.distance))
    }
}

/// Point estimate with per-subject influence values.
#[pyclass(name = "Estimate", skip_from_py_object)]
#[derive(Clone)]
struct PyEstimate {
    inner: EstimandEstimate,
}

#[pymethods]
impl PyEstimate {
    #[getter]
    fn value(&self) -> f64 {
        self.inner.value
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label.clone()
    }

    #[getter]
    fn se(&self) -> f64 {
        self.inner.se()
    }

    fn eif(&self) -> Vec<f64> {
        self.inner.eif.clone()
    }

    /// (estimate, se, ci_lo, ci_hi, p_value)
    fn wald(&self) -> PyResult<(f64, f64, f64, f64, f64)> {
        let w = wald(&self.inner).map_err(py_err)?;
        Ok((w.estimate, w.se, w.ci_lo, w.ci_hi, w.p_value))
    }

    fn __sub__(&self, other: &PyEstimate) -> PyResult<PyEstimate> {
        Ok(PyEstimate { inner: self.inner.checked_sub(&other.inner).map_err(py_err)? })
    }

    fn __add__(&self, other: &PyEstimate) -> PyResult<PyEstimate> {
        Ok(PyEstimate { inner: self.inner.checked_add(&other.inner).map_err(py_err)? })
    }

    fn __repr__(&self) -> String {
        format!("Estimate({}: {:.6} +- {:.6})", self.inner.label, self.inner.value, self.inner.se())
    }
}

fn fit_config(seed: u64, folds: usize, roster: Option<Vec<String>>) -> PyResult<FitConfig> {
    let mut cfg = FitConfig::new(seed);
    cfg.folds = folds;
    if let Some(names) = roster {
        cfg.roster = mixshift::learners::parse_roster(&names).map_err(py_err)?;
    }
    Ok(cfg)
}

/// TMLE of the mean outcome under the shifted exposures.
#[pyfunction]
#[pyo3(signature = (dataset, policy, seed, folds = 10, roster = None))]
fn tmle(
    dataset: &PyDataset,
    policy: &PyPolicy,
    seed: u64,
    folds: usize,
    roster: Option<Vec<String>>,
) -> PyResult<PyEstimate> {
    let cfg = fit_config(seed, folds, roster)?;
    let compiled = policy.compile(&dataset.inner)?;
    let fit = mixshift::estimators::tmle(&dataset.inner, &compiled, &cfg).map_err(py_err)?;
    Ok(PyEstimate { inner: fit.estimate })
}

/// Sequentially doubly robust estimator of the mean shifted outcome.
#[pyfunction]
#[pyo3(signature = (dataset, policy, seed, folds = 10, roster = None))]
fn sdr(
    dataset: &PyDataset,
    policy: &PyPolicy,
    seed: u64,
    folds: usize,
    roster: Option<Vec<String>>,
) -> PyResult<PyEstimate> {
    let cfg = fit_config(seed, folds, roster)?;
    let compiled = policy.compile(&dataset.inner)?;
    let fit = mixshift::estimators::sdr(&dataset.inner, &compiled, &cfg).map_err(py_err)?;
    Ok(PyEstimate { inner: fit.estimate })
}

/// Censoring-weighted mean of the observed outcome.
#[pyfunction]
#[pyo3(signature = (dataset, seed, folds = 10, roster = None))]
fn mean_observed(
    dataset: &PyDataset,
    seed: u64,
    folds: usize,
    roster: Option<Vec<String>>,
) -> PyResult<PyEstimate> {
    let cfg = fit_config(seed, folds, roster)?;
    Ok(PyEstimate { inner: observed_mean(&dataset.inner, &cfg).map_err(py_err)? })
}

/// Contrast of a shift estimate against the observed outcome mean.
#[pyfunction]
#[pyo3(signature = (estimate, dataset, seed, folds = 10, roster = None))]
fn contrast(
    estimate: &PyEstimate,
    dataset: &PyDataset,
    seed: u64,
    folds: usize,
    roster: Option<Vec<String>>,
) -> PyResult<PyEstimate> {
    let cfg = fit_config(seed, folds, roster)?;
    Ok(PyEstimate {
        inner: contrast_vs_observed(&estimate.inner, &dataset.inner, &cfg).map_err(py_err)?,
    })
}

/// Additive-scale interaction test; returns
/// (statistic, se, ci_lo, ci_hi, p_value, reject_at_05).
#[pyfunction]
fn interaction(
    joint: &PyEstimate,
    single_b: &PyEstimate,
    single_a: &PyEstimate,
    observed: &PyEstimate,
) -> PyResult<(f64, f64, f64, f64, f64, bool)> {
    let w = interaction_test(&joint.inner, &single_b.inner, &single_a.inner, &observed.inner)
        .map_err(py_err)?;
    Ok((w.estimate, w.se, w.ci_lo, w.ci_hi, w.p_value, w.reject_at_05))
}

/// Restrict a contrast to the subjects matching a predicate TOML block
/// (same format as [estimation.subpopulation] in the CLI config).
#[pyfunction]
fn localize(estimate: &PyEstimate, dataset: &PyDataset, predicate_toml: &str) -> PyResult<PyEstimate> {
    let pred: SubpopulationPredicate =
        toml::from_str(predicate_toml).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let sub = restrict_subpopulation(&dataset.inner, &pred).map_err(py_err)?;
    Ok(PyEstimate { inner: sub.localize(&estimate.inner).map_err(py_err)? })
}

/// Per-row extrapolation report of a policy at time t; returns a dict of
/// aggregates plus per-row distances.
#[pyfunction]
#[pyo3(signature = (dataset, policy, t, theta_r = 0.1, theta_abs = 0.1))]
fn extrapolation_report<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    policy: &PyPolicy,
    t: usize,
    theta_r: f64,
    theta_abs: f64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let ds = &dataset.inner;
    let compiled = policy.compile(ds)?;
    let map = ds.standardize();
    let hull = build_hull(ds, t, &map).map_err(py_err)?;
    let at_risk = ds.at_risk(t);
    let observed = map.apply_matrix(t, ds.exposures(t)).filter_rows(&at_risk);
    let shifted_rows: Vec<Vec<f64>> = (0..ds.n())
        .filter(|&i| at_risk[i])
        .map(|i| map.apply_row(t, &compiled.shift_row(ds.exposures(t).row(i), t)))
        .collect();
    let shifted = Mat::from_rows(&shifted_rows).map_err(py_err)?;
    let report = hull
        .extrapolation_report(&observed, &shifted, theta_r, theta_abs)
        .map_err(py_err)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("fraction_outside", report.fraction_outside)?;
    out.set_item("fraction_r_gt_theta", report.fraction_r_gt)?;
    out.set_item("fraction_abs_gt_theta", report.fraction_abs_gt)?;
    out.set_item("component_increased", report.component_increased.clone())?;
    out.set_item(
        "abs_distance",
        report.rows.iter().map(|r| r.abs_distance).collect::<Vec<f64>>(),
    )?;
    out.set_item("r_ratio", report.rows.iter().map(|r| r.r_ratio).collect::<Vec<f64>>())?;
    Ok(out)
}

/// Low-density flags for a component pair at time t.
#[pyfunction]
#[pyo3(signature = (dataset, t, component_a, component_b, grid = 101, quantile = 0.05))]
fn low_density_flags(
    dataset: &PyDataset,
    t: usize,
    component_a: &str,
    component_b: &str,
    grid: usize,
    quantile: f64,
) -> PyResult<Vec<bool>> {
    let ds = &dataset.inner;
    let j = ds.component_index(component_a).map_err(py_err)?;
    let k = ds.component_index(component_b).map_err(py_err)?;
    let mut surface = kde_pair(ds, t, j, k, grid).map_err(py_err)?;
    let at_risk = ds.at_risk(t);
    let rows: Vec<Vec<f64>> = (0..ds.n())
        .filter(|&i| at_risk[i])
        .map(|i| vec![ds.exposures(t).get(i, j), ds.exposures(t).get(i, k)])
        .collect();
    let points = Mat::from_rows(&rows).map_err(py_err)?;
    let flags = flag_low_density(&mut surface, &points, quantile).map_err(py_err)?;
    Ok(flags.flags)
}

/// Apply a policy to the exposures at time t, returning the shifted rows
/// (raw units) and per-row shift flags.
#[pyfunction]
fn shift_exposures(
    dataset: &PyDataset,
    policy: &PyPolicy,
    t: usize,
) -> PyResult<(Vec<Vec<f64>>, Vec<bool>)> {
    let ds = &dataset.inner;
    let compiled = policy.compile(ds)?;
    let hull = if matches!(compiled.guard(), mixshift::policy::HullGuard::None) {
        None
    } else {
        let map = ds.standardize();
        Some(build_hull(ds, t, &map).map_err(py_err)?)
    };
    let out = apply_shift(&compiled, ds.exposures(t), t, hull.as_ref()).map_err(py_err)?;
    Ok((out.values.iter_rows().map(|r| r.to_vec()).collect(), out.shifted))
}

/// Monte Carlo counterfactual truth of a policy under a reference DGP.
#[pyfunction]
#[pyo3(signature = (dgp, policy, draws = 1_000_000, seed = 0))]
fn counterfactual_mean(dgp: &str, policy: &PyPolicy, draws: usize, seed: u64) -> PyResult<(f64, f64)> {
    let model = reference_dgp(dgp).map_err(py_err)?.model;
    let compiled = match &policy.spec {
        Some(spec) => spec
            .compile(&model.exposure_names, model.times())
            .map_err(py_err)?,
        None => ShiftPolicy::identity(model.j(), model.times()),
    };
    let t = counterfactual_truth(&model, &compiled, draws, seed, None).map_err(py_err)?;
    Ok((t.value, t.mc_se))
}

/// Names of the reference data-generating processes.
#[pyfunction]
fn dgp_catalog() -> Vec<(String, String)> {
    reference_dgps()
        .into_iter()
        .map(|d| (d.name.to_string(), d.description.to_string()))
        .collect()
}

#[pymodule]
fn mixshift_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyPolicy>()?;
    m.add_class::<PyHull>()?;
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(tmle, m)?)?;
    m.add_function(wrap_pyfunction!(sdr, m)?)?;
    m.add_function(wrap_pyfunction!(mean_observed, m)?)?;
    m.add_function(wrap_pyfunction!(contrast, m)?)?;
    m.add_function(wrap_pyfunction!(interaction, m)?)?;
    m.add_function(wrap_pyfunction!(localize, m)?)?;
    m.add_function(wrap_pyfunction!(extrapolation_report, m)?)?;
    m.add_function(wrap_pyfunction!(low_density_flags, m)?)?;
    m.add_function(wrap_pyfunction!(shift_exposures, m)?)?;
    m.add_function(wrap_pyfunction!(counterfactual_mean, m)?)?;
    m.add_function(wrap_pyfunction!(dgp_catalog, m)?)?;
    Ok(())
}
