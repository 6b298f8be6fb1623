//! Run configuration: one strict TOML file drives every subcommand.
//! Unknown keys are rejected so a misspelled field cannot silently change
//! scientific output.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use mixshift::dataset::CsvSchema;
use mixshift::error::{Error, Result};
use mixshift::estimators::{FitConfig, SubpopulationPredicate};
use mixshift::learners::LearnerKind;
use mixshift::policy::PolicySpec;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Mandatory seed; every command is a pure function of (config, inputs).
    pub seed: u64,
    /// Output directory; falls back to MIXSHIFT_OUTPUT_DIR, then ".".
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Worker cap for parallel sections (Monte Carlo truth blocks).
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub dataset: Option<DatasetConfig>,
    #[serde(default)]
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub estimation: Option<EstimationConfig>,
    #[serde(default)]
    pub learners: Option<LearnersConfig>,
    #[serde(default)]
    pub diagnostics: Option<DiagnosticsConfig>,
    #[serde(default)]
    pub density: Option<DensityConfig>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub interaction: Option<InteractionConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub schema: CsvSchema,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    pub estimator: EstimatorChoice,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub subpopulation: Option<SubpopulationPredicate>,
    #[serde(default = "default_trunc")]
    pub ratio_truncation_quantile: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorChoice {
    Tmle,
    Sdr,
}

fn default_folds() -> usize {
    10
}

fn default_trunc() -> f64 {
    0.999
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnersConfig {
    /// Compact roster entries: "mean", "linear", "ridge", "ridge:0.1",
    /// "knn", "knn:10", "boost", "boost:100:2:0.1". Bare "ridge" and "knn"
    /// expand into their default grids.
    pub roster: Vec<String>,
    #[serde(default = "default_inner_folds")]
    pub inner_folds: usize,
}

fn default_inner_folds() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default = "default_theta")]
    pub theta_r: f64,
    #[serde(default = "default_theta")]
    pub theta_abs: f64,
}

fn default_theta() -> f64 {
    0.1
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { theta_r: 0.1, theta_abs: 0.1 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    /// Exposure component pair, by label.
    pub pair: [String; 2],
    #[serde(default)]
    pub time: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
}

fn default_grid() -> usize {
    101
}

fn default_quantile() -> f64 {
    0.05
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Catalog name, e.g. "single_time_linear".
    pub dgp: String,
    pub n: usize,
    #[serde(default = "default_draws")]
    pub truth_draws: usize,
    /// Policies (by name) to compute counterfactual truth for; defaults to
    /// every policy in the config.
    #[serde(default)]
    pub policies: Option<Vec<String>>,
}

fn default_draws() -> usize {
    1_000_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    /// Exactly three policy names: joint, first single, second single.
    pub policies: Vec<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        Ok(cfg)
    }

    pub fn output_dir(&self) -> PathBuf {
        if let Some(dir) = &self.output_dir {
            return dir.clone();
        }
        if let Ok(dir) = std::env::var("MIXSHIFT_OUTPUT_DIR") {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        PathBuf::from(".")
    }

    pub fn threads(&self) -> usize {
        match self.threads {
            Some(0) | None => std::thread::available_parallelism().map_or(1, |p| p.get()),
            Some(t) => t,
        }
    }

    pub fn dataset_required(&self) -> Result<&DatasetConfig> {
        self.dataset
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a [dataset] block".into()))
    }

    pub fn estimation_required(&self) -> Result<&EstimationConfig> {
        self.estimation
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs an [estimation] block".into()))
    }

    pub fn roster(&self) -> Result<Vec<LearnerKind>> {
        match &self.learners {
            None => Ok(mixshift::learners::default_roster()),
            Some(cfg) => mixshift::learners::parse_roster(&cfg.roster),
        }
    }

    /// Assemble the estimator configuration from the config blocks.
    pub fn fit_config(&self) -> Result<FitConfig> {
        let est = self.estimation_required()?;
        let mut fit = FitConfig::new(self.seed);
        fit.folds = est.folds;
        fit.ratio_truncation_quantile = est.ratio_truncation_quantile;
        fit.roster = self.roster()?;
        if let Some(l) = &self.learners {
            fit.inner_folds = l.inner_folds;
        }
        Ok(fit)
    }

    pub fn find_policy(&self, name: &str) -> Result<&PolicySpec> {
        self.policies
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Config(format!("policy '{name}' is not defined")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_parsing_rejects_unknown_keys() {
        let toml_src = "seed = 1\nunknown_key = 2\n";
        let err = toml::from_str::<RunConfig>(toml_src).unwrap_err();
        assert!(err.to_string().contains("unknown_key"));
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(toml::from_str::<RunConfig>("output_dir = \"x\"\n").is_err());
    }

    #[test]
    fn roster_entries_expand() {
        use mixshift::learners::parse_learner_spec;
        assert_eq!(parse_learner_spec("ridge").unwrap().len(), 4);
        assert_eq!(parse_learner_spec("knn:7").unwrap(), vec![LearnerKind::Knn { k: 7 }]);
        assert!(parse_learner_spec("forest").is_err());
        assert_eq!(
            parse_learner_spec("boost:50:3:0.05").unwrap(),
            vec![LearnerKind::BoostedStumps { rounds: 50, depth: 3, shrinkage: 0.05 }]
        );
    }

    #[test]
    fn full_config_round_trip() {
        let toml_src = r#"
            seed = 7
            threads = 2

            [dataset]
            path = "d.csv"
            [dataset.schema]
            format = "long"
            id = "id"
            time = "time"
            exposures = ["a1", "a2"]
            covariates = ["l1"]
            outcome = "y"

            [[policies]]
            name = "reduce"
            [[policies.shifts]]
            [policies.shifts.components.a1]
            kind = "multiplicative"
            value = 0.8

            [estimation]
            estimator = "tmle"
            folds = 5

            [learners]
            roster = ["mean", "linear"]
            inner_folds = 5
        "#;
        let cfg: RunConfig = toml::from_str(toml_src).unwrap();
        assert_eq!(cfg.seed, 7);
        let fit = cfg.fit_config().unwrap();
        assert_eq!(fit.folds, 5);
        assert_eq!(fit.roster.len(), 2);
        assert!(cfg.find_policy("reduce").is_ok());
        assert!(cfg.find_policy("nope").is_err());
    }
}
