//! Subcommand implementations. Every command is a pure function of the
//! config and input files; outputs are written with deterministic names and
//! stable field order so reruns are byte-identical.

use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use mixshift::dataset::{ingest_csv, LongitudinalDataset};
use mixshift::density::{flag_low_density, kde_pair};
use mixshift::error::{Error, Result};
use mixshift::estimators::{
    contrast_vs_observed, observed_mean, restrict_subpopulation, sdr, tmle, EstimandEstimate,
    FitResult,
};
use mixshift::hull::build_hull;
use mixshift::inference::{interaction_test, wald};
use mixshift::mat::Mat;
use mixshift::policy::ShiftPolicy;
use mixshift::simulate::{counterfactual_truth_with_threads, reference_dgp};

use crate::config::{EstimatorChoice, RunConfig};

pub struct Ctx {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub threads: usize,
}

impl Ctx {
    pub fn new(config: RunConfig, threads_override: Option<usize>) -> Result<Self> {
        let out_dir = config.output_dir();
        fs::create_dir_all(&out_dir)?;
        let threads = threads_override.unwrap_or_else(|| config.threads());
        if threads == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        Ok(Ctx { config, out_dir, threads })
    }

    fn load_dataset(&self) -> Result<LongitudinalDataset> {
        let ds_cfg = self.config.dataset_required()?;
        ingest_csv(&ds_cfg.path, &ds_cfg.schema)
    }

    fn compile_policies(&self, ds: &LongitudinalDataset) -> Result<Vec<ShiftPolicy>> {
        if self.config.policies.is_empty() {
            return Err(Error::Config("this command needs at least one [[policies]] entry".into()));
        }
        self.config
            .policies
            .iter()
            .map(|spec| spec.compile(ds.exposure_names(), ds.times()))
            .collect()
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Config(format!("serialization: {e}")))?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        fs::write(&path, text)?;
        Ok(path)
    }
}

#[derive(Serialize)]
struct IngestSummary {
    n: usize,
    times: usize,
    components: usize,
    exposure_names: Vec<String>,
    covariate_names: Vec<Vec<String>>,
    outcome_name: String,
    outcome_is_binary: bool,
    observed_at_final: usize,
    censored_per_stage: Vec<usize>,
}

pub fn cmd_ingest_check(ctx: &Ctx) -> Result<()> {
    let ds = ctx.load_dataset()?;
    let censored_per_stage: Vec<usize> = (0..ds.times())
        .map(|t| {
            ds.at_risk(t)
                .iter()
                .zip(ds.censoring(t))
                .filter(|(&risk, &obs)| risk && !obs)
                .count()
        })
        .collect();
    let summary = IngestSummary {
        n: ds.n(),
        times: ds.times(),
        components: ds.j(),
        exposure_names: ds.exposure_names().to_vec(),
        covariate_names: (0..ds.times()).map(|t| ds.covariate_names(t).to_vec()).collect(),
        outcome_name: ds.outcome_name().to_string(),
        outcome_is_binary: ds.outcome_is_binary(),
        observed_at_final: ds.censoring(ds.times() - 1).iter().filter(|&&b| b).count(),
        censored_per_stage,
    };
    let path = ctx.write_json("ingest_check.json", &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    eprintln!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct CorrelationRecord {
    time: usize,
    components: Vec<String>,
    spearman: Vec<Vec<f64>>,
    constant_components: Vec<String>,
}

pub fn cmd_correlate(ctx: &Ctx) -> Result<()> {
    let ds = ctx.load_dataset()?;
    let mut records = Vec::new();
    for t in 0..ds.times() {
        let sp = ds.spearman_matrix(t)?;
        let mut csv = String::from("component");
        for name in ds.exposure_names() {
            csv.push(',');
            csv.push_str(name);
        }
        csv.push('\n');
        let mut matrix = Vec::new();
        for a in 0..ds.j() {
            csv.push_str(&ds.exposure_names()[a]);
            let mut row = Vec::new();
            for b in 0..ds.j() {
                let v = sp.matrix.get(a, b);
                csv.push_str(&format!(",{v}"));
                row.push(v);
            }
            csv.push('\n');
            matrix.push(row);
        }
        ctx.write_text(&format!("correlation_t{t}.csv"), &csv)?;
        records.push(CorrelationRecord {
            time: t,
            components: ds.exposure_names().to_vec(),
            spearman: matrix,
            constant_components: ds
                .exposure_names()
                .iter()
                .zip(&sp.constant_components)
                .filter(|(_, &c)| c)
                .map(|(n, _)| n.clone())
                .collect(),
        });
    }
    let path = ctx.write_json("correlations.json", &records)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct ComponentFraction {
    component: String,
    fraction_increased: f64,
}

#[derive(Serialize)]
struct DiagnoseRecord {
    policy: String,
    time: usize,
    n: usize,
    theta_r: f64,
    theta_abs: f64,
    fraction_outside: f64,
    fraction_r_gt_theta: f64,
    fraction_abs_gt_theta: f64,
    projection_deltas: Vec<ComponentFraction>,
    rows_csv: String,
}

pub fn cmd_diagnose(ctx: &Ctx) -> Result<()> {
    let ds = ctx.load_dataset()?;
    let policies = ctx.compile_policies(&ds)?;
    let diag = ctx.config.diagnostics.as_ref().cloned().unwrap_or_default();
    let map = ds.standardize();
    let mut records = Vec::new();
    for policy in &policies {
        for t in 0..ds.times() {
            let hull = build_hull(&ds, t, &map)?;
            let at_risk = ds.at_risk(t);
            let observed = map.apply_matrix(t, ds.exposures(t)).filter_rows(&at_risk);
            // Diagnosis looks at the unguarded shift: the report shows what a
            // guard would be protecting against.
            let shifted_rows: Vec<Vec<f64>> = (0..ds.n())
                .filter(|&i| at_risk[i])
                .map(|i| {
                    let raw = policy.shift_row(ds.exposures(t).row(i), t);
                    map.apply_row(t, &raw)
                })
                .collect();
            let shifted = Mat::from_rows(&shifted_rows)?;
            let report = hull.extrapolation_report(&observed, &shifted, diag.theta_r, diag.theta_abs)?;

            let ids: Vec<&String> = ds
                .subject_ids()
                .iter()
                .zip(&at_risk)
                .filter(|(_, &r)| r)
                .map(|(id, _)| id)
                .collect();
            let mut csv = String::from("id,outside,r_ratio,abs_distance");
            for name in ds.exposure_names() {
                csv.push_str(&format!(",delta_{name}"));
            }
            csv.push('\n');
            for (row, id) in report.rows.iter().zip(&ids) {
                csv.push_str(&format!(
                    "{id},{},{},{}",
                    row.outside as u8, row.r_ratio, row.abs_distance
                ));
                for d in &row.projection_delta {
                    csv.push_str(&format!(",{d}"));
                }
                csv.push('\n');
            }
            let csv_name = format!("diagnose_{}_t{t}.csv", policy.name());
            ctx.write_text(&csv_name, &csv)?;
            records.push(DiagnoseRecord {
                policy: policy.name().to_string(),
                time: t,
                n: report.rows.len(),
                theta_r: report.theta_r,
                theta_abs: report.theta_abs,
                fraction_outside: report.fraction_outside,
                fraction_r_gt_theta: report.fraction_r_gt,
                fraction_abs_gt_theta: report.fraction_abs_gt,
                projection_deltas: ds
                    .exposure_names()
                    .iter()
                    .zip(&report.component_increased)
                    .map(|(name, &f)| ComponentFraction {
                        component: name.clone(),
                        fraction_increased: f,
                    })
                    .collect(),
                rows_csv: csv_name,
            });
        }
    }
    let path = ctx.write_json("diagnose.json", &records)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct DensitySummary {
    pair: [String; 2],
    time: usize,
    grid: usize,
    bandwidths: (f64, f64),
    quantile: f64,
    threshold: f64,
    n_flagged: usize,
}

pub fn cmd_density(ctx: &Ctx) -> Result<()> {
    let ds = ctx.load_dataset()?;
    let den = ctx
        .config
        .density
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs a [density] block".into()))?;
    let j = ds.component_index(&den.pair[0])?;
    let k = ds.component_index(&den.pair[1])?;
    let mut surface = kde_pair(&ds, den.time, j, k, den.grid)?;

    let mut grid_csv = String::from("x,y,density\n");
    for (ix, x) in surface.grid_x.iter().enumerate() {
        for (iy, y) in surface.grid_y.iter().enumerate() {
            grid_csv.push_str(&format!("{x},{y},{}\n", surface.grid.get(ix, iy)));
        }
    }
    ctx.write_text("density_surface.csv", &grid_csv)?;

    let at_risk = ds.at_risk(den.time);
    let rows: Vec<Vec<f64>> = (0..ds.n())
        .filter(|&i| at_risk[i])
        .map(|i| vec![ds.exposures(den.time).get(i, j), ds.exposures(den.time).get(i, k)])
        .collect();
    let points = Mat::from_rows(&rows)?;
    let flags = flag_low_density(&mut surface, &points, den.quantile)?;
    let ids: Vec<&String> = ds
        .subject_ids()
        .iter()
        .zip(&at_risk)
        .filter(|(_, &r)| r)
        .map(|(id, _)| id)
        .collect();
    let mut flag_csv = String::from("id,density,low_density\n");
    for (i, id) in ids.iter().enumerate() {
        flag_csv.push_str(&format!("{id},{},{}\n", flags.densities[i], flags.flags[i] as u8));
    }
    ctx.write_text("density_flags.csv", &flag_csv)?;

    let summary = DensitySummary {
        pair: den.pair.clone(),
        time: den.time,
        grid: den.grid,
        bandwidths: surface.bandwidths,
        quantile: den.quantile,
        threshold: flags.threshold,
        n_flagged: flags.flags.iter().filter(|&&f| f).count(),
    };
    let path = ctx.write_json("density.json", &summary)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct EstimateRecord {
    label: String,
    policy: String,
    estimand: String,
    value: f64,
    se: f64,
    ci95: [f64; 2],
    p_value: f64,
    n: usize,
    folds: usize,
    seed: u64,
    truncation_events: usize,
}

fn record_from(
    estimate: &EstimandEstimate,
    policy: &str,
    estimand: &str,
    folds: usize,
    seed: u64,
    truncation_events: usize,
) -> Result<EstimateRecord> {
    let w = wald(estimate)?;
    Ok(EstimateRecord {
        label: estimate.label.clone(),
        policy: policy.to_string(),
        estimand: estimand.to_string(),
        value: w.estimate,
        se: w.se,
        ci95: [w.ci_lo, w.ci_hi],
        p_value: w.p_value,
        n: estimate.n(),
        folds,
        seed,
        truncation_events,
    })
}

fn run_estimator(
    choice: EstimatorChoice,
    ds: &LongitudinalDataset,
    policy: &ShiftPolicy,
    fit: &mixshift::estimators::FitConfig,
) -> Result<FitResult> {
    match choice {
        EstimatorChoice::Tmle => tmle(ds, policy, fit),
        EstimatorChoice::Sdr => sdr(ds, policy, fit),
    }
}

pub fn cmd_estimate(ctx: &Ctx) -> Result<()> {
    let ds = ctx.load_dataset()?;
    let policies = ctx.compile_policies(&ds)?;
    let est_cfg = ctx.config.estimation_required()?;
    let fit = ctx.config.fit_config()?;
    let sub = est_cfg
        .subpopulation
        .as_ref()
        .map(|p| restrict_subpopulation(&ds, p))
        .transpose()?;

    let mut records = Vec::new();
    let mut contrast_csv = String::from("label,estimate,lo,hi\n");
    for policy in &policies {
        let result = run_estimator(est_cfg.estimator, &ds, policy, &fit)?;
        records.push(record_from(
            &result.estimate,
            policy.name(),
            "mean_shifted",
            fit.folds,
            fit.seed,
            result.truncation_events,
        )?);
        let contrast = contrast_vs_observed(&result.estimate, &ds, &fit)?;
        let w = wald(&contrast)?;
        contrast_csv.push_str(&format!(
            "{},{},{},{}\n",
            contrast.label, w.estimate, w.ci_lo, w.ci_hi
        ));
        records.push(record_from(
            &contrast,
            policy.name(),
            "contrast_vs_observed",
            fit.folds,
            fit.seed,
            result.truncation_events,
        )?);
        if let Some(sub) = &sub {
            let restricted = sub.localize(&contrast)?;
            let wr = wald(&restricted)?;
            contrast_csv.push_str(&format!(
                "{},{},{},{}\n",
                restricted.label, wr.estimate, wr.ci_lo, wr.ci_hi
            ));
            records.push(record_from(
                &restricted,
                policy.name(),
                "restricted_contrast",
                fit.folds,
                fit.seed,
                result.truncation_events,
            )?);
        }
    }
    ctx.write_text("contrasts.csv", &contrast_csv)?;
    let path = ctx.write_json("estimates.json", &records)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct InteractionReport {
    joint: String,
    single_b: String,
    single_a: String,
    statistic: f64,
    se: f64,
    ci95: [f64; 2],
    z: f64,
    p_value: f64,
    reject_at_05: bool,
    arms: Vec<ArmRecord>,
}

#[derive(Serialize)]
struct ArmRecord {
    label: String,
    value: f64,
    se: f64,
}

pub fn cmd_interaction(ctx: &Ctx) -> Result<()> {
    let ds = ctx.load_dataset()?;
    let inter = ctx
        .config
        .interaction
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs an [interaction] block".into()))?;
    if inter.policies.len() != 3 {
        return Err(Error::Config(format!(
            "interaction needs exactly three policies (joint, first, second), got {}",
            inter.policies.len()
        )));
    }
    let est_cfg = ctx.config.estimation_required()?;
    let fit = ctx.config.fit_config()?;
    let compiled: Vec<ShiftPolicy> = inter
        .policies
        .iter()
        .map(|n| ctx.config.find_policy(n).and_then(|s| s.compile(ds.exposure_names(), ds.times())))
        .collect::<Result<_>>()?;
    // Conformability of the arm tuple before any fitting.
    mixshift::policy::compose_contrast(&compiled)?;
    let mut arms = Vec::new();
    for policy in &compiled {
        arms.push(run_estimator(est_cfg.estimator, &ds, policy, &fit)?.estimate);
    }
    let obs = observed_mean(&ds, &fit)?;
    let w = interaction_test(&arms[0], &arms[1], &arms[2], &obs)?;
    let report = InteractionReport {
        joint: inter.policies[0].clone(),
        single_b: inter.policies[1].clone(),
        single_a: inter.policies[2].clone(),
        statistic: w.estimate,
        se: w.se,
        ci95: [w.ci_lo, w.ci_hi],
        z: w.z,
        p_value: w.p_value,
        reject_at_05: w.reject_at_05,
        arms: arms
            .iter()
            .chain(std::iter::once(&obs))
            .map(|e| {
                Ok(ArmRecord { label: e.label.clone(), value: e.value, se: wald(e)?.se })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let path = ctx.write_json("interaction.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    eprintln!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct TruthRecord {
    policy: String,
    value: f64,
    mc_se: f64,
    draws: usize,
}

pub fn cmd_simulate(ctx: &Ctx) -> Result<()> {
    let sim = ctx
        .config
        .simulate
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs a [simulate] block".into()))?;
    let dgp = reference_dgp(&sim.dgp)?;
    let ds = mixshift::simulate::draw_observational(&dgp.model, sim.n, ctx.config.seed)?;
    let mut csv = Vec::new();
    ds.write_long_csv(&mut csv)?;
    let csv_path = ctx.out_dir.join("dataset.csv");
    fs::write(&csv_path, &csv)?;

    let policy_names: Vec<String> = match &sim.policies {
        Some(names) => names.clone(),
        None => ctx.config.policies.iter().map(|p| p.name.clone()).collect(),
    };
    let mut truths = Vec::new();
    for name in &policy_names {
        let spec = ctx.config.find_policy(name)?;
        let policy = spec.compile(ds.exposure_names(), ds.times())?;
        let hulls = if matches!(policy.guard(), mixshift::policy::HullGuard::None) {
            None
        } else {
            let map = ds.standardize();
            let hs: Result<Vec<_>> = (0..ds.times()).map(|t| build_hull(&ds, t, &map)).collect();
            Some(hs?)
        };
        let truth = counterfactual_truth_with_threads(
            &dgp.model,
            &policy,
            sim.truth_draws,
            ctx.config.seed.wrapping_add(1),
            hulls.as_deref(),
            ctx.threads,
        )?;
        truths.push(TruthRecord {
            policy: name.clone(),
            value: truth.value,
            mc_se: truth.mc_se,
            draws: truth.draws,
        });
    }
    let path = ctx.write_json("truth.json", &truths)?;
    eprintln!("wrote {} and {}", csv_path.display(), path.display());
    Ok(())
}
