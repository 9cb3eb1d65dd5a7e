//! Deterministic synthetic series. These are stand-ins for measured load
//! and generation data, not reproductions of any real dataset.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    #[default]
    Sine,
    TwoCluster,
    Drift,
    DailyProfile,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(SynthKind::Sine),
            "two-cluster" => Ok(SynthKind::TwoCluster),
            "drift" => Ok(SynthKind::Drift),
            "daily-profile" => Ok(SynthKind::DailyProfile),
            other => Err(Error::InvalidArgument(format!(
                "unknown synthetic kind `{other}` (expected sine, two-cluster, drift or daily-profile)"
            ))),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SynthKind::Sine => "sine",
            SynthKind::TwoCluster => "two-cluster",
            SynthKind::Drift => "drift",
            SynthKind::DailyProfile => "daily-profile",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub length: usize,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    pub seed: u64,
    /// Samples per day (24 for hourly data, 288 for 5-minute data). Also
    /// the sine period.
    pub period: usize,
    /// Segment length for `two-cluster` and `drift`.
    pub segment: usize,
    /// Add a temperature column (daily-profile only).
    pub covariate: bool,
    /// Window the series is meant for; bounds the minimum length.
    pub nu: usize,
    pub gamma: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            kind: SynthKind::Sine,
            length: 200,
            noise: 0.0,
            seed: 0,
            period: 24,
            segment: 100,
            covariate: false,
            nu: 4,
            gamma: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSeries {
    pub load: Vec<f64>,
    pub temperature: Option<Vec<f64>>,
    /// Indices where the mean level changes (`drift` and `two-cluster`).
    pub shift_points: Vec<usize>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    note: &'static str,
    spec: &'a SynthSpec,
    columns: Vec<&'static str>,
    shift_points: &'a [usize],
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let min = self.nu + self.gamma + 10;
        if self.length < min {
            return Err(Error::InvalidArgument(format!(
                "length {} is below the minimum {min} (nu + gamma + 10)",
                self.length
            )));
        }
        if self.period == 0 || self.segment == 0 {
            return Err(Error::InvalidArgument("period and segment must be positive".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidArgument("noise must be a finite non-negative number".into()));
        }
        if self.covariate && self.kind != SynthKind::DailyProfile {
            return Err(Error::InvalidArgument(
                "a temperature covariate is only available for daily-profile".into(),
            ));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SynthSeries> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, self.noise.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut noise = || if self.noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
        let day = self.period as f64;
        let mut shift_points = Vec::new();

        let (load, temperature) = match self.kind {
            SynthKind::Sine => (
                (0..self.length)
                    .map(|t| 0.5 + 0.4 * (2.0 * PI * t as f64 / day).sin() + noise())
                    .collect(),
                None,
            ),
            SynthKind::TwoCluster => {
                shift_points.extend((self.segment..self.length).step_by(self.segment));
                let load = (0..self.length)
                    .map(|t| {
                        let level = if (t / self.segment) % 2 == 0 { 0.2 } else { 0.8 };
                        level + noise()
                    })
                    .collect();
                (load, None)
            }
            SynthKind::Drift => {
                shift_points.extend((self.segment..self.length).step_by(self.segment));
                let load = (0..self.length)
                    .map(|t| {
                        let level = 0.5 * (t / self.segment) as f64;
                        level + 0.2 * (2.0 * PI * t as f64 / day).sin() + noise()
                    })
                    .collect();
                (load, None)
            }
            SynthKind::DailyProfile => {
                let week = 7.0 * day;
                let daily = |t: usize| (2.0 * PI * t as f64 / day - PI / 2.0).sin();
                let load = (0..self.length)
                    .map(|t| 10.0 + 3.0 * daily(t) + 1.5 * (2.0 * PI * t as f64 / week).sin() + noise())
                    .collect();
                let temperature = self
                    .covariate
                    .then(|| (0..self.length).map(|t| 28.0 + 4.0 * daily(t) + noise()).collect());
                (load, temperature)
            }
        };
        Ok(SynthSeries {
            load,
            temperature,
            shift_points,
        })
    }

    /// Writes `t,load[,temperature]` to `path` and a `<path>.meta.json`
    /// sidecar describing the generator. Returns the sidecar path.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<PathBuf> {
        let path = path.as_ref();
        let series = self.generate()?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut writer = csv::Writer::from_path(path)?;
        let mut columns = vec!["t", "load"];
        if series.temperature.is_some() {
            columns.push("temperature");
        }
        writer.write_record(&columns)?;
        for (t, load) in series.load.iter().enumerate() {
            let mut row = vec![t.to_string(), load.to_string()];
            if let Some(temp) = &series.temperature {
                row.push(temp[t].to_string());
            }
            writer.write_record(&row)?;
        }
        writer.flush()?;

        let mut sidecar_path = path.as_os_str().to_owned();
        sidecar_path.push(".meta.json");
        let sidecar_path = PathBuf::from(sidecar_path);
        let sidecar = Sidecar {
            note: "synthetic stand-in series; not measured data",
            spec: self,
            columns,
            shift_points: &series.shift_points,
        };
        std::fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
        Ok(sidecar_path)
    }
}
