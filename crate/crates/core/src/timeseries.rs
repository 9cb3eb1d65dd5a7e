//! Series ingestion, min-max normalization and regressor windowing.
//!
//! A forecasting sample pairs the input window
//! `u = [p(t), ..., p(t-nu+1), r(t), ..., r(t-mu+1)]` with the target
//! `v = [p(t+1), ..., p(t+gamma)]`, where `p` is the forecast series and `r`
//! the exogenous series (if any).

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named co-sampled input series such as temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExogenousSeries {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    pub name: String,
    pub sample_interval: Option<Duration>,
    pub values: Vec<f64>,
    pub exogenous: Vec<ExogenousSeries>,
}

impl RawSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::with_exogenous(name, values, Vec::new())
    }

    pub fn with_exogenous(
        name: impl Into<String>,
        values: Vec<f64>,
        exogenous: Vec<ExogenousSeries>,
    ) -> Result<Self> {
        let series = Self {
            name: name.into(),
            sample_interval: None,
            values,
            exogenous,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (i, x) in self.values.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::Ingestion {
                    row: i + 1,
                    message: format!("non-finite value in `{}`", self.name),
                });
            }
        }
        for exo in &self.exogenous {
            if exo.values.len() != self.values.len() {
                return Err(Error::Dimension {
                    what: "exogenous series length",
                    expected: self.values.len(),
                    actual: exo.values.len(),
                });
            }
            if let Some(i) = exo.values.iter().position(|x| !x.is_finite()) {
                return Err(Error::Ingestion {
                    row: i + 1,
                    message: format!("non-finite value in `{}`", exo.name),
                });
            }
        }
        Ok(())
    }
}

/// Column mapping for [`ingest_csv`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Timestamp column; rows must be strictly increasing in it.
    #[serde(default)]
    pub time_column: Option<String>,
    pub value_column: String,
    #[serde(default)]
    pub exogenous_columns: Vec<String>,
    /// Human-readable interval such as `1h` or `5min`.
    #[serde(default)]
    pub sample_interval: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub nu: usize,
    #[serde(default)]
    pub mu: usize,
    pub gamma: usize,
    pub train_fraction: f64,
}

impl WindowConfig {
    pub fn validate(&self, exogenous_channels: usize) -> Result<()> {
        if self.nu == 0 {
            return Err(Error::InvalidArgument("nu must be at least 1".into()));
        }
        if self.gamma == 0 {
            return Err(Error::InvalidArgument("gamma must be at least 1".into()));
        }
        if self.mu > 0 && exogenous_channels == 0 {
            return Err(Error::InvalidArgument(
                "mu > 0 requires at least one exogenous series".into(),
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Split(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// First window position `t` with a complete input history.
    fn first_origin(&self) -> usize {
        self.nu.max(self.mu) - 1
    }

    pub fn min_series_len(&self) -> usize {
        self.nu.max(self.mu) + self.gamma
    }

    pub fn pair_count(&self, series_len: usize) -> usize {
        (series_len + 1).saturating_sub(self.min_series_len())
    }

    pub fn input_dim(&self, exogenous_channels: usize) -> usize {
        self.nu + self.mu * exogenous_channels
    }

    /// Number of leading raw samples touched by the first `train_pairs` pairs.
    /// The normalizer is fitted on exactly this prefix.
    pub fn train_sample_count(&self, train_pairs: usize) -> usize {
        if train_pairs == 0 {
            return 0;
        }
        self.first_origin() + train_pairs + self.gamma
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressorPair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub origin_index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRange {
    pub min: f64,
    pub max: f64,
}

impl ChannelRange {
    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn denormalize(&self, x: f64) -> f64 {
        x * (self.max - self.min) + self.min
    }
}

/// Per-channel min-max ranges: the forecast series first, then each
/// exogenous series in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub output: ChannelRange,
    pub exogenous: Vec<ChannelRange>,
}

fn parse_interval(text: &str) -> Result<Duration> {
    let text = text.trim();
    let split = text
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(text.len());
    let (count, unit) = text.split_at(split);
    let count: u64 = count
        .parse()
        .map_err(|_| Error::Schema(format!("invalid sample interval `{text}`")))?;
    let secs = match unit.trim() {
        "s" | "sec" => 1,
        "m" | "min" => 60,
        "h" | "hr" => 3600,
        "d" => 86_400,
        other => {
            return Err(Error::Schema(format!(
                "unknown sample interval unit `{other}`"
            )))
        }
    };
    Ok(Duration::from_secs(count * secs))
}

#[derive(PartialEq, PartialOrd)]
enum Stamp {
    Number(f64),
    Text(String),
}

impl Stamp {
    fn parse(cell: &str) -> Self {
        match cell.trim().parse::<f64>() {
            Ok(x) if x.is_finite() => Stamp::Number(x),
            _ => Stamp::Text(cell.trim().to_string()),
        }
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
}

fn parse_cell(record: &csv::StringRecord, col: usize, name: &str, row: usize) -> Result<f64> {
    let cell = record.get(col).unwrap_or("").trim();
    match cell.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(Error::Ingestion {
            row,
            message: format!("column `{name}` holds non-numeric or missing value `{cell}`"),
        }),
    }
}

/// Reads a headed CSV file. Row numbers in errors count data rows from 1
/// (the header is not counted).
pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<RawSeries> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();

    let time_col = schema
        .time_column
        .as_deref()
        .map(|name| column_index(&headers, name))
        .transpose()?;
    let value_col = column_index(&headers, &schema.value_column)?;
    let exo_cols = schema
        .exogenous_columns
        .iter()
        .map(|name| column_index(&headers, name))
        .collect::<Result<Vec<_>>>()?;

    let mut values = Vec::new();
    let mut exo_values = vec![Vec::new(); exo_cols.len()];
    let mut last_stamp: Option<Stamp> = None;

    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if let Some(col) = time_col {
            let stamp = Stamp::parse(record.get(col).unwrap_or(""));
            if let Some(prev) = &last_stamp {
                let ordered = match (prev, &stamp) {
                    (Stamp::Number(a), Stamp::Number(b)) => a < b,
                    (Stamp::Text(a), Stamp::Text(b)) => a < b,
                    _ => false,
                };
                if !ordered {
                    return Err(Error::Ingestion {
                        row,
                        message: "timestamp is not strictly after the previous row".into(),
                    });
                }
            }
            last_stamp = Some(stamp);
        }
        values.push(parse_cell(&record, value_col, &schema.value_column, row)?);
        for ((col, name), out) in exo_cols
            .iter()
            .zip(&schema.exogenous_columns)
            .zip(exo_values.iter_mut())
        {
            out.push(parse_cell(&record, *col, name, row)?);
        }
    }

    if values.is_empty() {
        return Err(Error::EmptyInput);
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| schema.value_column.clone());
    Ok(RawSeries {
        name,
        sample_interval: schema.sample_interval.as_deref().map(parse_interval).transpose()?,
        values,
        exogenous: schema
            .exogenous_columns
            .iter()
            .cloned()
            .zip(exo_values)
            .map(|(name, values)| ExogenousSeries { name, values })
            .collect(),
    })
}

fn fit_channel(name: &str, values: &[f64]) -> Result<ChannelRange> {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if max <= min {
        return Err(Error::DegenerateChannel {
            channel: name.to_string(),
            value: min,
        });
    }
    Ok(ChannelRange { min, max })
}

/// Fits min-max ranges on the first `train_count` samples only.
pub fn fit_normalizer(series: &RawSeries, train_count: usize) -> Result<NormalizationParams> {
    if train_count == 0 || train_count > series.len() {
        return Err(Error::InvalidArgument(format!(
            "train_count must be in 1..={}, got {train_count}",
            series.len()
        )));
    }
    Ok(NormalizationParams {
        output: fit_channel(&series.name, &series.values[..train_count])?,
        exogenous: series
            .exogenous
            .iter()
            .map(|exo| fit_channel(&exo.name, &exo.values[..train_count]))
            .collect::<Result<_>>()?,
    })
}

/// Maps every channel through its min-max range. Out-of-range values are
/// kept as is.
pub fn normalize(series: &RawSeries, params: &NormalizationParams) -> Result<RawSeries> {
    if params.exogenous.len() != series.exogenous.len() {
        return Err(Error::Dimension {
            what: "normalization channels",
            expected: series.exogenous.len(),
            actual: params.exogenous.len(),
        });
    }
    Ok(RawSeries {
        name: series.name.clone(),
        sample_interval: series.sample_interval,
        values: series.values.iter().map(|&x| params.output.normalize(x)).collect(),
        exogenous: series
            .exogenous
            .iter()
            .zip(&params.exogenous)
            .map(|(exo, range)| ExogenousSeries {
                name: exo.name.clone(),
                values: exo.values.iter().map(|&x| range.normalize(x)).collect(),
            })
            .collect(),
    })
}

pub fn denormalize(values: &[f64], range: &ChannelRange) -> Vec<f64> {
    values.iter().map(|&x| range.denormalize(x)).collect()
}

/// Builds one regressor pair per admissible window position, in time order.
/// With several exogenous series each contributes `mu` lags, series by series.
pub fn build_pairs(series: &RawSeries, cfg: &WindowConfig) -> Result<Vec<RegressorPair>> {
    if cfg.nu == 0 || cfg.gamma == 0 {
        return Err(Error::InvalidArgument("nu and gamma must be at least 1".into()));
    }
    if cfg.mu > 0 && series.exogenous.is_empty() {
        return Err(Error::InvalidArgument(
            "mu > 0 requires at least one exogenous series".into(),
        ));
    }
    let n = series.len();
    let required = cfg.min_series_len();
    if n < required {
        return Err(Error::Window {
            required,
            actual: n,
        });
    }
    let p = &series.values;
    let pairs = (cfg.first_origin()..n - cfg.gamma)
        .map(|t| {
            let mut u = Vec::with_capacity(cfg.input_dim(series.exogenous.len()));
            u.extend((0..cfg.nu).map(|lag| p[t - lag]));
            for exo in &series.exogenous {
                u.extend((0..cfg.mu).map(|lag| exo.values[t - lag]));
            }
            RegressorPair {
                u,
                v: p[t + 1..=t + cfg.gamma].to_vec(),
                origin_index: t,
            }
        })
        .collect();
    Ok(pairs)
}

/// Sequential split: the first `floor(train_fraction * len)` pairs train.
pub fn split_stream(
    pairs: &[RegressorPair],
    train_fraction: f64,
) -> Result<(Vec<RegressorPair>, Vec<RegressorPair>)> {
    let n_train = split_point(pairs.len(), train_fraction)?;
    Ok((pairs[..n_train].to_vec(), pairs[n_train..].to_vec()))
}

pub fn split_point(count: usize, train_fraction: f64) -> Result<usize> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split(format!(
            "train_fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let n_train = (train_fraction * count as f64).floor() as usize;
    if n_train == 0 {
        return Err(Error::Split(format!(
            "empty training partition ({count} pairs, fraction {train_fraction})"
        )));
    }
    if n_train >= count {
        return Err(Error::Split(format!(
            "empty test partition ({count} pairs, fraction {train_fraction})"
        )));
    }
    Ok(n_train)
}
