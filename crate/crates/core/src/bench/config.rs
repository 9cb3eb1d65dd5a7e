use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ets::{EtsConfig, EtsLearner};
use crate::learner::OnlineLearner;
use crate::mcfis::{McfisConfig, McfisLearner};
use crate::safis::{SafisConfig, SafisLearner};
use crate::timeseries::{CsvSchema, WindowConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum AlgorithmSpec {
    Ets(EtsConfig),
    Safis(SafisConfig),
    Mcfis(McfisConfig),
}

impl AlgorithmSpec {
    pub fn id(&self) -> &'static str {
        match self {
            AlgorithmSpec::Ets(_) => "ets",
            AlgorithmSpec::Safis(_) => "safis",
            AlgorithmSpec::Mcfis(_) => "mcfis",
        }
    }

    pub fn build(&self, input_dim: usize, output_dim: usize) -> Result<Box<dyn OnlineLearner>> {
        Ok(match self {
            AlgorithmSpec::Ets(cfg) => Box::new(EtsLearner::new(*cfg, output_dim)),
            AlgorithmSpec::Safis(cfg) => {
                cfg.validate()?;
                Box::new(SafisLearner::new(*cfg, output_dim))
            }
            AlgorithmSpec::Mcfis(cfg) => Box::new(McfisLearner::new(*cfg, input_dim, output_dim)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSource {
    /// Resolved against the config file's directory when relative.
    pub path: PathBuf,
    #[serde(flatten)]
    pub schema: CsvSchema,
}

/// One forecasting problem run against one or more learners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: String,
    #[serde(default)]
    pub description: Option<String>,
    pub data: DataSource,
    pub window: WindowConfig,
    pub algorithms: Vec<AlgorithmSpec>,
    /// Reserved for synthetic data generation; the learners are deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Stop adapting during the test stream.
    #[serde(default)]
    pub freeze: bool,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config {
            file: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate(origin)?;
        Ok(cfg)
    }

    /// Loads a config file; relative data and output paths are resolved
    /// against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            file: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_toml(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if cfg.data.path.is_relative() {
            cfg.data.path = base.join(&cfg.data.path);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    fn validate(&self, origin: &str) -> Result<()> {
        let fail = |message: String| Error::Config {
            file: origin.to_string(),
            message,
        };
        if self.algorithms.is_empty() {
            return Err(fail("field `algorithms`: at least one algorithm is required".into()));
        }
        self.window
            .validate(self.data.schema.exogenous_columns.len())
            .map_err(|e| fail(format!("field `window`: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
problem = "F1"
output_dir = "out"

[data]
path = "load.csv"
time_column = "t"
value_column = "load"
sample_interval = "1h"

[window]
nu = 4
gamma = 1
train_fraction = 0.85

[[algorithms]]
name = "ets"
radius = 0.25

[[algorithms]]
name = "safis"

[algorithms.ekf]
observation_noise = 0.02

[[algorithms]]
name = "mcfis"
reserve_replay = false
"#;

    #[test]
    fn parses_algorithms_with_defaults() {
        let cfg = ExperimentConfig::from_toml(SAMPLE, "sample.toml").unwrap();
        assert_eq!(cfg.algorithms.len(), 3);
        match &cfg.algorithms[0] {
            AlgorithmSpec::Ets(e) => {
                assert_eq!(e.radius, 0.25);
                assert_eq!(e.omega, 1000.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        match &cfg.algorithms[1] {
            AlgorithmSpec::Safis(s) => {
                assert_eq!(s.ekf.observation_noise, 0.02);
                assert_eq!(s.kappa, 2.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(&cfg.algorithms[2], AlgorithmSpec::Mcfis(m) if !m.reserve_replay));
        assert_eq!(cfg.window.mu, 0);
        assert!(!cfg.freeze);
    }

    #[test]
    fn rejects_full_train_fraction_with_field_name() {
        let text = SAMPLE.replace("train_fraction = 0.85", "train_fraction = 1.0");
        match ExperimentConfig::from_toml(&text, "f.toml") {
            Err(Error::Config { file, message }) => {
                assert_eq!(file, "f.toml");
                assert!(message.contains("window"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_algorithm() {
        let text = SAMPLE.replace("name = \"ets\"", "name = \"denfis\"");
        assert!(matches!(
            ExperimentConfig::from_toml(&text, "f.toml"),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn rejects_mu_without_exogenous_columns() {
        let text = SAMPLE.replace("nu = 4", "nu = 4\nmu = 1");
        assert!(matches!(
            ExperimentConfig::from_toml(&text, "f.toml"),
            Err(Error::Config { .. })
        ));
    }
}
