//! Longitudinal mixture data: ingestion, validation, standardization, and
//! descriptive summaries.
//!
//! The canonical file format is long CSV: one row per (subject, time) with an
//! explicit time column. Wide files are accepted through a schema that lists
//! the per-time columns. Subjects are kept in first-appearance order; that
//! order is the canonical subject ordering used by influence-function
//! arithmetic downstream.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Column-role mapping for CSV ingestion.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case", deny_unknown_fields)]
pub enum CsvSchema {
    Long(LongSchema),
    Wide(WideSchema),
}

/// Long format: one row per (subject, time).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LongSchema {
    pub id: String,
    pub time: String,
    /// Exposure component columns, one value per component per row.
    pub exposures: Vec<String>,
    /// Covariate columns; the same columns are read at every time.
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Optional censoring column: the value on the row for time t is the
    /// indicator of still being observed at stage t+1 (1 = observed).
    /// Absent means fully observed.
    #[serde(default)]
    pub censoring: Option<String>,
    /// Outcome column, read from the final-time row.
    pub outcome: String,
}

/// Wide format: one row per subject, per-time columns listed explicitly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WideSchema {
    pub id: String,
    pub outcome: String,
    /// Component labels; defaults to the exposure column names at time 0.
    #[serde(default)]
    pub exposure_names: Option<Vec<String>>,
    pub times: Vec<WideTimeColumns>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WideTimeColumns {
    pub exposures: Vec<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub censoring: Option<String>,
}

/// Per-subject trajectories of covariates, exposures, censoring, and outcome.
///
/// Censoring is stored per stage: `censoring[t][i]` is the indicator that
/// subject `i` is still observed at stage t+1 (after the exposures at time t).
/// A subject with `censoring[t] = false` has no data at later times; matrix
/// cells after censoring are zero-filled and never read.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalDataset {
    subject_ids: Vec<String>,
    exposure_names: Vec<String>,
    covariate_names: Vec<Vec<String>>,
    covariates: Vec<Mat>,
    exposures: Vec<Mat>,
    censoring: Vec<Vec<bool>>,
    outcome: Vec<Option<f64>>,
    outcome_name: String,
}

impl LongitudinalDataset {
    /// Assemble and validate a dataset from parts. `censoring[t][i]` is the
    /// stage-(t+1) observation indicator; monotonicity over t is enforced.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        subject_ids: Vec<String>,
        exposure_names: Vec<String>,
        covariate_names: Vec<Vec<String>>,
        covariates: Vec<Mat>,
        exposures: Vec<Mat>,
        censoring: Vec<Vec<bool>>,
        outcome: Vec<Option<f64>>,
        outcome_name: String,
    ) -> Result<Self> {
        let n = subject_ids.len();
        let times = exposures.len();
        if times == 0 {
            return Err(Error::Validation("need at least one exposure time".into()));
        }
        if exposure_names.is_empty() {
            return Err(Error::Validation("need at least one exposure component".into()));
        }
        if covariates.len() != times || covariate_names.len() != times {
            return Err(Error::Dimension("covariates must cover every time".into()));
        }
        if censoring.len() != times {
            return Err(Error::Dimension("need one censoring stage per exposure time".into()));
        }
        if outcome.len() != n {
            return Err(Error::Dimension("outcome length must equal subject count".into()));
        }
        for (t, a) in exposures.iter().enumerate() {
            if a.rows() != n || a.cols() != exposure_names.len() {
                return Err(Error::Dimension(format!("exposure matrix at time {t} has wrong shape")));
            }
            if covariates[t].rows() != n || covariates[t].cols() != covariate_names[t].len() {
                return Err(Error::Dimension(format!("covariate matrix at time {t} has wrong shape")));
            }
            if censoring[t].len() != n {
                return Err(Error::Dimension(format!("censoring stage {t} has wrong length")));
            }
        }
        let ds = LongitudinalDataset {
            subject_ids,
            exposure_names,
            covariate_names,
            covariates,
            exposures,
            censoring,
            outcome,
            outcome_name,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let times = self.times();
        for i in 0..self.n() {
            let mut alive = true;
            for t in 0..times {
                if self.censoring[t][i] && !alive {
                    return Err(Error::Validation(format!(
                        "subject {} violates monotone censoring at stage {}",
                        self.subject_ids[i],
                        t + 1
                    )));
                }
                alive = alive && self.censoring[t][i];
            }
            let observed_final = self.censoring[times - 1][i];
            match (observed_final, self.outcome[i].is_some()) {
                (true, false) => {
                    return Err(Error::Validation(format!(
                        "subject {} is observed at the final stage but has no outcome",
                        self.subject_ids[i]
                    )))
                }
                (false, true) => {
                    return Err(Error::Validation(format!(
                        "subject {} is censored but carries an outcome",
                        self.subject_ids[i]
                    )))
                }
                _ => {}
            }
            if let Some(y) = self.outcome[i] {
                if !y.is_finite() {
                    return Err(Error::Validation(format!(
                        "subject {} has a non-finite outcome",
                        self.subject_ids[i]
                    )));
                }
            }
            for t in 0..times {
                if self.at_risk_single(i, t) {
                    for j in 0..self.j() {
                        if !self.exposures[t].get(i, j).is_finite() {
                            return Err(Error::Validation(format!(
                                "subject {} has a non-finite exposure at time {t}",
                                self.subject_ids[i]
                            )));
                        }
                    }
                    for k in 0..self.covariates[t].cols() {
                        if !self.covariates[t].get(i, k).is_finite() {
                            return Err(Error::Validation(format!(
                                "subject {} has a non-finite covariate at time {t}",
                                self.subject_ids[i]
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.subject_ids.len()
    }

    /// Number of exposure times (T + 1).
    pub fn times(&self) -> usize {
        self.exposures.len()
    }

    /// Number of mixture components J.
    pub fn j(&self) -> usize {
        self.exposure_names.len()
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn exposure_names(&self) -> &[String] {
        &self.exposure_names
    }

    pub fn covariate_names(&self, t: usize) -> &[String] {
        &self.covariate_names[t]
    }

    pub fn exposures(&self, t: usize) -> &Mat {
        &self.exposures[t]
    }

    pub fn covariates(&self, t: usize) -> &Mat {
        &self.covariates[t]
    }

    /// Stage-(t+1) observation indicators.
    pub fn censoring(&self, t: usize) -> &[bool] {
        &self.censoring[t]
    }

    /// Whether any subject is censored at any stage.
    pub fn has_censoring(&self) -> bool {
        self.censoring.iter().any(|c| c.iter().any(|&x| !x))
    }

    pub fn outcome(&self) -> &[Option<f64>] {
        &self.outcome
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    /// True when every observed outcome is 0 or 1.
    pub fn outcome_is_binary(&self) -> bool {
        self.outcome
            .iter()
            .flatten()
            .all(|&y| y == 0.0 || y == 1.0)
    }

    fn at_risk_single(&self, i: usize, t: usize) -> bool {
        (0..t).all(|s| self.censoring[s][i])
    }

    /// Indicators of being under observation at time t (data at t present).
    pub fn at_risk(&self, t: usize) -> Vec<bool> {
        (0..self.n()).map(|i| self.at_risk_single(i, t)).collect()
    }

    /// Component index by label.
    pub fn component_index(&self, name: &str) -> Result<usize> {
        self.exposure_names
            .iter()
            .position(|x| x == name)
            .ok_or_else(|| Error::Config(format!("unknown exposure component '{name}'")))
    }

    /// Stable content hash used to guard influence-function arithmetic
    /// against row misalignment across datasets.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.n() as u64);
        h.write_u64(self.times() as u64);
        h.write_u64(self.j() as u64);
        for id in &self.subject_ids {
            h.write_bytes(id.as_bytes());
        }
        for t in 0..self.times() {
            for v in self.exposures[t].data() {
                h.write_u64(v.to_bits());
            }
            for v in self.covariates[t].data() {
                h.write_u64(v.to_bits());
            }
            for &c in &self.censoring[t] {
                h.write_u64(c as u64);
            }
        }
        for y in &self.outcome {
            match y {
                Some(v) => h.write_u64(v.to_bits()),
                None => h.write_u64(u64::MAX),
            }
        }
        h.finish()
    }

    /// Per-component, per-time affine maps sending observed values to [0, 1].
    pub fn standardize(&self) -> StandardizationMap {
        let mut per_time = Vec::with_capacity(self.times());
        for t in 0..self.times() {
            let at_risk = self.at_risk(t);
            let mut comps = Vec::with_capacity(self.j());
            for j in 0..self.j() {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for i in 0..self.n() {
                    if at_risk[i] {
                        let v = self.exposures[t].get(i, j);
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                if !lo.is_finite() {
                    lo = 0.0;
                    hi = 0.0;
                }
                comps.push(AffineMap { min: lo, max: hi });
            }
            per_time.push(comps);
        }
        StandardizationMap { per_time }
    }

    /// Spearman rank correlation among components at time t, average-tie
    /// ranks, computed over subjects under observation at t.
    pub fn spearman_matrix(&self, t: usize) -> Result<Spearman> {
        if t >= self.times() {
            return Err(Error::Dimension(format!(
                "time {t} out of range (dataset has {} times)",
                self.times()
            )));
        }
        let at_risk = self.at_risk(t);
        let cols: Vec<Vec<f64>> = (0..self.j())
            .map(|j| {
                (0..self.n())
                    .filter(|&i| at_risk[i])
                    .map(|i| self.exposures[t].get(i, j))
                    .collect()
            })
            .collect();
        let ranks: Vec<Vec<f64>> = cols.iter().map(|c| average_ranks(c)).collect();
        let constant: Vec<bool> = cols
            .iter()
            .map(|c| c.windows(2).all(|w| w[0] == w[1]))
            .collect();
        let j = self.j();
        let mut m = Mat::zeros(j, j);
        for a in 0..j {
            m.set(a, a, 1.0);
            for b in (a + 1)..j {
                let r = if constant[a] || constant[b] {
                    0.0
                } else {
                    pearson(&ranks[a], &ranks[b])
                };
                m.set(a, b, r);
                m.set(b, a, r);
            }
        }
        Ok(Spearman { matrix: m, constant_components: constant })
    }

    /// Serialize as long CSV; inverse of [`ingest_csv`] for datasets whose
    /// covariate columns are uniform across times.
    pub fn write_long_csv<W: Write>(&self, w: W) -> Result<()> {
        let cov_names = self.covariate_names[0].clone();
        if self.covariate_names.iter().any(|c| *c != cov_names) {
            return Err(Error::Validation(
                "long CSV output requires identical covariate columns at every time".into(),
            ));
        }
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["id".to_string(), "time".to_string()];
        header.extend(cov_names.iter().cloned());
        header.extend(self.exposure_names.iter().cloned());
        header.push("next_observed".to_string());
        header.push(self.outcome_name.clone());
        wtr.write_record(&header)
            .map_err(|e| Error::Parse(e.to_string()))?;
        for i in 0..self.n() {
            for t in 0..self.times() {
                if !self.at_risk_single(i, t) {
                    break;
                }
                let mut rec = vec![self.subject_ids[i].clone(), t.to_string()];
                for k in 0..cov_names.len() {
                    rec.push(format_cell(self.covariates[t].get(i, k)));
                }
                for j in 0..self.j() {
                    rec.push(format_cell(self.exposures[t].get(i, j)));
                }
                rec.push(if self.censoring[t][i] { "1".into() } else { "0".into() });
                if t == self.times() - 1 {
                    rec.push(self.outcome[i].map(format_cell).unwrap_or_default());
                } else {
                    rec.push(String::new());
                }
                wtr.write_record(&rec).map_err(|e| Error::Parse(e.to_string()))?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Long-CSV schema matching [`write_long_csv`] output.
    pub fn long_csv_schema(&self) -> CsvSchema {
        CsvSchema::Long(LongSchema {
            id: "id".into(),
            time: "time".into(),
            exposures: self.exposure_names.clone(),
            covariates: self.covariate_names[0].clone(),
            censoring: Some("next_observed".into()),
            outcome: self.outcome_name.clone(),
        })
    }
}

fn format_cell(v: f64) -> String {
    // Shortest round-trip representation; parses back to the same bits.
    format!("{v}")
}

/// Per-component, per-time affine standardization to the unit interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationMap {
    per_time: Vec<Vec<AffineMap>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub min: f64,
    pub max: f64,
}

impl AffineMap {
    /// Map an observed value to the unit scale; shifted values may exceed 1.
    /// A degenerate (constant) column maps to 0 by convention.
    pub fn apply(&self, x: f64) -> f64 {
        if self.max > self.min {
            (x - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }

    pub fn invert(&self, u: f64) -> f64 {
        if self.max > self.min {
            self.min + u * (self.max - self.min)
        } else {
            self.min
        }
    }
}

impl StandardizationMap {
    pub fn times(&self) -> usize {
        self.per_time.len()
    }

    pub fn components(&self, t: usize) -> &[AffineMap] {
        &self.per_time[t]
    }

    pub fn apply_row(&self, t: usize, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.per_time[t])
            .map(|(&x, m)| m.apply(x))
            .collect()
    }

    /// Standardize every row of an n x J matrix at time t.
    pub fn apply_matrix(&self, t: usize, m: &Mat) -> Mat {
        let mut out = Mat::zeros(m.rows(), m.cols());
        for r in 0..m.rows() {
            for (c, map) in self.per_time[t].iter().enumerate() {
                out.set(r, c, map.apply(m.get(r, c)));
            }
        }
        out
    }
}

/// Spearman matrix plus per-component constant-column warning flags.
#[derive(Debug, Clone)]
pub struct Spearman {
    pub matrix: Mat,
    pub constant_components: Vec<bool>,
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("non-finite rank input"));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    }
}

/// FNV-1a, fixed offset/prime so fingerprints are stable across runs.
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf29ce484222325)
    }
    fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }
    fn write_u64(&mut self, v: u64) {
        self.write_bytes(&v.to_le_bytes());
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

/// Ingest a CSV file under the given schema.
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<LongitudinalDataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    ingest_csv_reader(file, schema)
}

/// Ingest CSV content from any reader (UTF-8, header row required).
pub fn ingest_csv_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<LongitudinalDataset> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("header: {e}")))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column '{name}' not found in CSV header")))
    };
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (ridx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("row {}: {e}", ridx + 2)))?;
        rows.push(rec.iter().map(|s| s.trim().to_string()).collect());
    }
    match schema {
        CsvSchema::Long(s) => ingest_long(&rows, s, &col),
        CsvSchema::Wide(s) => ingest_wide(&rows, s, &col),
    }
}

fn parse_cell(s: &str, ctx: &str) -> Result<Option<f64>> {
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse(format!("{ctx}: cannot parse '{s}' as a number")))
}

fn ingest_long(
    rows: &[Vec<String>],
    s: &LongSchema,
    col: &dyn Fn(&str) -> Result<usize>,
) -> Result<LongitudinalDataset> {
    let id_c = col(&s.id)?;
    let time_c = col(&s.time)?;
    let exp_c: Vec<usize> = s.exposures.iter().map(|n| col(n)).collect::<Result<_>>()?;
    let cov_c: Vec<usize> = s.covariates.iter().map(|n| col(n)).collect::<Result<_>>()?;
    let cen_c = s.censoring.as_deref().map(col).transpose()?;
    let out_c = col(&s.outcome)?;

    // Group rows by subject, preserving first-appearance order.
    let mut order: Vec<String> = Vec::new();
    let mut by_subject: HashMap<String, Vec<(usize, usize)>> = HashMap::new(); // (time, row idx)
    for (ridx, r) in rows.iter().enumerate() {
        let id = r[id_c].clone();
        let t: usize = r[time_c]
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: bad time '{}'", ridx + 2, r[time_c])))?;
        if !by_subject.contains_key(&id) {
            order.push(id.clone());
        }
        by_subject.entry(id).or_default().push((t, ridx));
    }
    let times = rows
        .iter()
        .map(|r| r[time_c].parse::<usize>().unwrap_or(0))
        .max()
        .map_or(0, |t| t + 1);
    if times == 0 {
        return Err(Error::Validation("CSV contains no data rows".into()));
    }
    let n = order.len();
    let j = exp_c.len();
    let k = cov_c.len();

    let mut exposures = vec![Mat::zeros(n, j); times];
    let mut covariates_raw: Vec<Vec<Vec<Option<f64>>>> = vec![vec![vec![None; k]; n]; times];
    let mut censoring = vec![vec![false; n]; times];
    let mut outcome: Vec<Option<f64>> = vec![None; n];

    for (i, id) in order.iter().enumerate() {
        let mut subject_rows = by_subject.remove(id).unwrap();
        subject_rows.sort_by_key(|&(t, _)| t);
        let mut expected_t = 0usize;
        let mut censored = false;
        for (t, ridx) in subject_rows {
            let rownum = ridx + 2;
            if censored {
                return Err(Error::Validation(format!(
                    "subject {id} has data at time {t} after being censored (non-monotone censoring)"
                )));
            }
            if t != expected_t {
                return Err(Error::Validation(format!(
                    "subject {id} has a gap in times (expected {expected_t}, found {t})"
                )));
            }
            expected_t += 1;
            for (jj, &c) in exp_c.iter().enumerate() {
                let v = parse_cell(&rows[ridx][c], &format!("row {rownum}, column '{}'", s.exposures[jj]))?
                    .ok_or_else(|| {
                        Error::Validation(format!(
                            "subject {id}: missing exposure '{}' at time {t}",
                            s.exposures[jj]
                        ))
                    })?;
                exposures[t].set(i, jj, v);
            }
            for (kk, &c) in cov_c.iter().enumerate() {
                covariates_raw[t][i][kk] =
                    parse_cell(&rows[ridx][c], &format!("row {rownum}, column '{}'", s.covariates[kk]))?;
            }
            let observed_next = match cen_c {
                Some(c) => {
                    let v = parse_cell(&rows[ridx][c], &format!("row {rownum}, censoring column"))?
                        .ok_or_else(|| {
                            Error::Validation(format!("subject {id}: missing censoring value at time {t}"))
                        })?;
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::Validation(format!(
                            "subject {id}: censoring value must be 0 or 1, found {v}"
                        )));
                    }
                    v == 1.0
                }
                None => true,
            };
            censoring[t][i] = observed_next;
            censored = !observed_next;
            if t == times - 1 {
                outcome[i] = parse_cell(&rows[ridx][out_c], &format!("row {rownum}, outcome"))?;
            }
        }
        // Subjects with no censoring column must cover every time.
        if cen_c.is_none() && expected_t != times {
            return Err(Error::Validation(format!(
                "subject {id} has rows through time {} but the file has {} times and no censoring column",
                expected_t as i64 - 1,
                times
            )));
        }
        // A subject whose rows stop early without an explicit censor=0 row is
        // treated as censored at the first absent stage.
        if expected_t < times {
            if censoring[expected_t.saturating_sub(1)][i] && expected_t > 0 {
                return Err(Error::Validation(format!(
                    "subject {id} stops at time {} without being censored",
                    expected_t - 1
                )));
            }
        }
    }

    let (cov_mats, cov_names) =
        impute_covariates(&covariates_raw, &s.covariates, &censoring, n, times)?;
    LongitudinalDataset::new(
        order,
        s.exposures.clone(),
        cov_names,
        cov_mats,
        exposures,
        censoring,
        outcome,
        s.outcome.clone(),
    )
}

fn ingest_wide(
    rows: &[Vec<String>],
    s: &WideSchema,
    col: &dyn Fn(&str) -> Result<usize>,
) -> Result<LongitudinalDataset> {
    if s.times.is_empty() {
        return Err(Error::Config("wide schema needs at least one time block".into()));
    }
    let j = s.times[0].exposures.len();
    for (t, tc) in s.times.iter().enumerate() {
        if tc.exposures.len() != j {
            return Err(Error::Config(format!(
                "time block {t} has {} exposure columns, expected {j}",
                tc.exposures.len()
            )));
        }
    }
    let id_c = col(&s.id)?;
    let out_c = col(&s.outcome)?;
    let times = s.times.len();
    let n = rows.len();
    let exposure_names = s
        .exposure_names
        .clone()
        .unwrap_or_else(|| s.times[0].exposures.clone());
    if exposure_names.len() != j {
        return Err(Error::Config("exposure_names length must match the per-time exposure columns".into()));
    }

    let mut exposures = vec![Mat::zeros(n, j); times];
    let mut covariates_raw: Vec<Vec<Vec<Option<f64>>>> = Vec::with_capacity(times);
    let mut censoring = vec![vec![false; n]; times];
    let mut outcome = vec![None; n];
    let mut ids = Vec::with_capacity(n);

    for tc in &s.times {
        covariates_raw.push(vec![vec![None; tc.covariates.len()]; n]);
    }

    for (i, r) in rows.iter().enumerate() {
        let rownum = i + 2;
        ids.push(r[id_c].clone());
        let mut alive = true;
        for (t, tc) in s.times.iter().enumerate() {
            let explicit = match &tc.censoring {
                Some(name) => {
                    parse_cell(&r[col(name)?], &format!("row {rownum}, censoring"))?
                        .map(|v| v == 1.0)
                }
                None => None,
            };
            if !alive {
                // Data past the censoring point must not claim observation.
                if explicit == Some(true) {
                    return Err(Error::Validation(format!(
                        "subject {} violates monotone censoring at stage {}",
                        r[id_c],
                        t + 1
                    )));
                }
                continue;
            }
            let observed_next = explicit.unwrap_or(tc.censoring.is_none());
            for (jj, name) in tc.exposures.iter().enumerate() {
                let v = parse_cell(&r[col(name)?], &format!("row {rownum}, column '{name}'"))?
                    .ok_or_else(|| {
                        Error::Validation(format!("subject {}: missing exposure '{name}'", r[id_c]))
                    })?;
                exposures[t].set(i, jj, v);
            }
            for (kk, name) in tc.covariates.iter().enumerate() {
                covariates_raw[t][i][kk] = parse_cell(&r[col(name)?], &format!("row {rownum}, column '{name}'"))?;
            }
            censoring[t][i] = observed_next;
            alive = observed_next;
        }
        outcome[i] = parse_cell(&r[out_c], &format!("row {rownum}, outcome"))?;
    }

    let mut cov_mats = Vec::with_capacity(times);
    let mut cov_names = Vec::with_capacity(times);
    for (t, tc) in s.times.iter().enumerate() {
        let (m, names) = impute_covariates_single(
            &covariates_raw[t],
            &tc.covariates,
            &at_risk_from(&censoring, t, n),
        );
        cov_mats.push(m);
        cov_names.push(names);
    }
    LongitudinalDataset::new(
        ids,
        exposure_names,
        cov_names,
        cov_mats,
        exposures,
        censoring,
        outcome,
        s.outcome.clone(),
    )
}

fn at_risk_from(censoring: &[Vec<bool>], t: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| (0..t).all(|s| censoring[s][i])).collect()
}

/// Median imputation with a missingness-indicator column appended for any
/// covariate that has at least one missing value among under-observation rows.
fn impute_covariates(
    raw: &[Vec<Vec<Option<f64>>>],
    names: &[String],
    censoring: &[Vec<bool>],
    n: usize,
    times: usize,
) -> Result<(Vec<Mat>, Vec<Vec<String>>)> {
    // A column gets its indicator at every time when missing anywhere, so the
    // covariate layout stays uniform across times.
    let mut any_missing = vec![false; names.len()];
    for t in 0..times {
        let at_risk = at_risk_from(censoring, t, n);
        for i in 0..n {
            if at_risk[i] {
                for (k, v) in raw[t][i].iter().enumerate() {
                    if v.is_none() {
                        any_missing[k] = true;
                    }
                }
            }
        }
    }
    let mut out_names: Vec<String> = names.to_vec();
    for (k, name) in names.iter().enumerate() {
        if any_missing[k] {
            out_names.push(format!("{name}_miss"));
        }
    }
    let mut mats = Vec::with_capacity(times);
    for t in 0..times {
        let at_risk = at_risk_from(censoring, t, n);
        let mut m = Mat::zeros(n, out_names.len());
        let mut ind_col = names.len();
        for k in 0..names.len() {
            let observed: Vec<f64> = (0..n)
                .filter(|&i| at_risk[i])
                .filter_map(|i| raw[t][i][k])
                .collect();
            let med = median(&observed);
            for i in 0..n {
                if !at_risk[i] {
                    continue;
                }
                match raw[t][i][k] {
                    Some(v) => m.set(i, k, v),
                    None => m.set(i, k, med),
                }
            }
            if any_missing[k] {
                for i in 0..n {
                    if at_risk[i] && raw[t][i][k].is_none() {
                        m.set(i, ind_col, 1.0);
                    }
                }
                ind_col += 1;
            }
        }
        mats.push(m);
    }
    Ok((mats, vec![out_names; times]))
}

fn impute_covariates_single(
    raw: &[Vec<Option<f64>>],
    names: &[String],
    at_risk: &[bool],
) -> (Mat, Vec<String>) {
    let n = raw.len();
    let mut any_missing = vec![false; names.len()];
    for (i, row) in raw.iter().enumerate() {
        if at_risk[i] {
            for (k, v) in row.iter().enumerate() {
                if v.is_none() {
                    any_missing[k] = true;
                }
            }
        }
    }
    let mut out_names: Vec<String> = names.to_vec();
    for (k, name) in names.iter().enumerate() {
        if any_missing[k] {
            out_names.push(format!("{name}_miss"));
        }
    }
    let mut m = Mat::zeros(n, out_names.len());
    let mut ind_col = names.len();
    for k in 0..names.len() {
        let observed: Vec<f64> = (0..n)
            .filter(|&i| at_risk[i])
            .filter_map(|i| raw[i][k])
            .collect();
        let med = median(&observed);
        for i in 0..n {
            if !at_risk[i] {
                continue;
            }
            match raw[i][k] {
                Some(v) => m.set(i, k, v),
                None => m.set(i, k, med),
            }
        }
        if any_missing[k] {
            for i in 0..n {
                if at_risk[i] && raw[i][k].is_none() {
                    m.set(i, ind_col, 1.0);
                }
            }
            ind_col += 1;
        }
    }
    (m, out_names)
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = s.len() / 2;
    if s.len() % 2 == 0 {
        (s[mid - 1] + s[mid]) / 2.0
    } else {
        s[mid]
    }
}
