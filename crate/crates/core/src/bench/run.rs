//! The benchmark pipeline: ingest, normalize on the training prefix,
//! window, split, stream through each learner and write reports.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::config::{AlgorithmSpec, ExperimentConfig};
use crate::error::{Error, Result};
use crate::stats;
use crate::timeseries::{
    build_pairs, fit_normalizer, ingest_csv, normalize, split_point, ChannelRange, RawSeries,
    RegressorPair, WindowConfig,
};

/// One test-phase forecast. `index` is the forecast origin in the raw series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub index: usize,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
}

/// Test-phase scores of one learner on one problem. Errors are in
/// normalized units; `output_range` maps them back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub algorithm: String,
    pub problem: String,
    pub rmse: f64,
    pub ndei: f64,
    pub final_rule_count: usize,
    pub train_rule_count: usize,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub frozen: bool,
    pub output_range: ChannelRange,
    pub predictions: Vec<PredictionRecord>,
}

impl ExperimentReport {
    pub fn actuals(&self) -> Vec<Vec<f64>> {
        self.predictions.iter().map(|p| p.actual.clone()).collect()
    }

    pub fn predicted(&self) -> Vec<Vec<f64>> {
        self.predictions.iter().map(|p| p.predicted.clone()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes `index,actual,predicted` (suffixed `_1.._gamma` for vector
    /// targets) at full precision.
    pub fn write_predictions_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let gamma = self.predictions.first().map_or(1, |p| p.actual.len());
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = vec!["index".to_string()];
        if gamma == 1 {
            header.extend(["actual".to_string(), "predicted".to_string()]);
        } else {
            header.extend((1..=gamma).map(|h| format!("actual_{h}")));
            header.extend((1..=gamma).map(|h| format!("predicted_{h}")));
        }
        writer.write_record(&header)?;
        for p in &self.predictions {
            let mut row = vec![p.index.to_string()];
            row.extend(p.actual.iter().map(f64::to_string));
            row.extend(p.predicted.iter().map(f64::to_string));
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Normalized, windowed and split data ready for streaming.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedData {
    pub input_dim: usize,
    pub output_dim: usize,
    pub output_range: ChannelRange,
    pub train: Vec<RegressorPair>,
    pub test: Vec<RegressorPair>,
}

/// Fits the normalizer on the raw samples covered by the training pairs
/// only, then windows and splits the normalized series.
pub fn prepare(series: &RawSeries, window: &WindowConfig) -> Result<PreparedData> {
    window.validate(series.exogenous.len())?;
    let required = window.min_series_len();
    if series.len() < required {
        return Err(Error::Window {
            required,
            actual: series.len(),
        });
    }
    let n_pairs = window.pair_count(series.len());
    let n_train = split_point(n_pairs, window.train_fraction)?;
    let params = fit_normalizer(series, window.train_sample_count(n_train))?;
    let normalized = normalize(series, &params)?;
    let mut train = build_pairs(&normalized, window)?;
    let test = train.split_off(n_train);
    Ok(PreparedData {
        input_dim: window.input_dim(series.exogenous.len()),
        output_dim: window.gamma,
        output_range: params.output,
        train,
        test,
    })
}

/// Streams the training pairs, then the test pairs (predict-then-learn, or
/// predict only when `freeze` is set) through a fresh learner.
pub fn run_algorithm(
    spec: &AlgorithmSpec,
    problem: &str,
    data: &PreparedData,
    freeze: bool,
) -> Result<ExperimentReport> {
    let mut learner = spec.build(data.input_dim, data.output_dim)?;
    for pair in &data.train {
        learner.step(pair)?;
    }
    learner.finish_training()?;
    let train_rule_count = learner.rule_count();

    let mut predictions = Vec::with_capacity(data.test.len());
    for pair in &data.test {
        let predicted = if freeze {
            learner.predict(&pair.u)?
        } else {
            learner.step(pair)?
        };
        predictions.push(PredictionRecord {
            index: pair.origin_index,
            actual: pair.v.clone(),
            predicted,
        });
    }
    let actual: Vec<Vec<f64>> = predictions.iter().map(|p| p.actual.clone()).collect();
    let predicted: Vec<Vec<f64>> = predictions.iter().map(|p| p.predicted.clone()).collect();
    Ok(ExperimentReport {
        algorithm: spec.id().to_string(),
        problem: problem.to_string(),
        rmse: stats::rmse(&actual, &predicted)?,
        ndei: stats::ndei(&actual, &predicted)?,
        final_rule_count: learner.rule_count(),
        train_rule_count,
        train_pairs: data.train.len(),
        test_pairs: data.test.len(),
        frozen: freeze,
        output_range: data.output_range,
        predictions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub algorithm: String,
    pub report: PathBuf,
    pub predictions: PathBuf,
    pub elapsed_ms: f64,
}

/// Provenance of one `run` invocation. Timing varies between runs; the
/// reports it points to do not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub problem: String,
    pub config_sha256: String,
    pub data_sha256: String,
    pub library_version: String,
    pub frozen: bool,
    pub runs: Vec<RunEntry>,
    pub total_elapsed_ms: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides the config's output directory.
    pub output_dir: Option<PathBuf>,
    /// Freezes adaptation in the test stream (ORed with the config flag).
    pub freeze: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
    pub reports: Vec<ExperimentReport>,
}

fn clean(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn file_stem(problem: &str, algorithm: &str) -> String {
    format!("{}_{}", clean(problem), clean(algorithm))
}

/// Runs every configured algorithm and writes `<problem>_<algorithm>.json`,
/// `<problem>_<algorithm>_predictions.csv` and `<problem>_manifest.json`.
/// `config_bytes` is hashed into the manifest.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    config_bytes: &[u8],
    opts: &RunOptions,
) -> Result<RunOutcome> {
    let started = Instant::now();
    let freeze = cfg.freeze || opts.freeze;
    let out_dir = opts.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let data_bytes = std::fs::read(&cfg.data.path).map_err(|e| Error::Config {
        file: cfg.data.path.display().to_string(),
        message: format!("data file unreadable: {e}"),
    })?;
    let series = ingest_csv(&cfg.data.path, &cfg.data.schema)?;
    let data = prepare(&series, &cfg.window)?;
    std::fs::create_dir_all(&out_dir)?;

    let mut runs = Vec::new();
    let mut reports = Vec::new();
    for (i, spec) in cfg.algorithms.iter().enumerate() {
        let duplicate = cfg.algorithms[..i].iter().any(|s| s.id() == spec.id());
        let label = if duplicate {
            format!("{}-{}", spec.id(), i + 1)
        } else {
            spec.id().to_string()
        };
        let t0 = Instant::now();
        let mut report = run_algorithm(spec, &cfg.problem, &data, freeze)?;
        report.algorithm = label.clone();
        let elapsed_ms = t0.elapsed().as_secs_f64() * 1e3;

        let stem = file_stem(&cfg.problem, &label);
        let report_path = out_dir.join(format!("{stem}.json"));
        let predictions_path = out_dir.join(format!("{stem}_predictions.csv"));
        std::fs::write(&report_path, report.to_json()?)?;
        report.write_predictions_csv(&predictions_path)?;
        runs.push(RunEntry {
            algorithm: label,
            report: report_path,
            predictions: predictions_path,
            elapsed_ms,
        });
        reports.push(report);
    }

    let manifest = RunManifest {
        problem: cfg.problem.clone(),
        config_sha256: sha256_hex(config_bytes),
        data_sha256: sha256_hex(&data_bytes),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        frozen: freeze,
        runs,
        total_elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    let manifest_path = out_dir.join(format!("{}_manifest.json", clean(&cfg.problem)));
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(RunOutcome {
        manifest_path,
        manifest,
        reports,
    })
}

/// Loads a config file and runs it.
pub fn run_config_file(path: impl AsRef<Path>, opts: &RunOptions) -> Result<RunOutcome> {
    let path = path.as_ref();
    let cfg = ExperimentConfig::load(path)?;
    let bytes = std::fs::read(path)?;
    run_experiment(&cfg, &bytes, opts)
}
