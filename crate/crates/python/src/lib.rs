//! Python bindings: the three online forecasters, windowing and the
//! ranking statistics.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use evofis::bench::AlgorithmSpec;
use evofis::stats;
use evofis::timeseries::{self, ExogenousSeries, RawSeries, RegressorPair, WindowConfig};
use evofis::OnlineLearner;

fn py_err(e: evofis::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// An online forecaster (`ets`, `safis` or `mcfis`). `config` is an
/// optional JSON object of hyper-parameters overriding the defaults.
#[pyclass(unsendable)]
struct Learner {
    inner: Box<dyn OnlineLearner>,
    seen: usize,
}

#[pymethods]
impl Learner {
    #[new]
    #[pyo3(signature = (algorithm, input_dim, output_dim, config=None))]
    fn new(algorithm: &str, input_dim: usize, output_dim: usize, config: Option<&str>) -> PyResult<Self> {
        let mut value: serde_json::Value = match config {
            Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
            None => serde_json::json!({}),
        };
        let object = value
            .as_object_mut()
            .ok_or_else(|| PyValueError::new_err("config must be a JSON object"))?;
        object.insert("name".into(), algorithm.into());
        let spec: AlgorithmSpec =
            serde_json::from_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let inner = spec.build(input_dim, output_dim).map_err(py_err)?;
        Ok(Self { inner, seen: 0 })
    }

    /// Predicts `v` from `u`, then learns from the pair. Returns the
    /// prediction made before learning.
    fn step(&mut self, u: Vec<f64>, v: Vec<f64>) -> PyResult<Vec<f64>> {
        let pair = RegressorPair { u, v, origin_index: self.seen };
        self.seen += 1;
        self.inner.step(&pair).map_err(py_err)
    }

    fn predict(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.predict(&u).map_err(py_err)
    }

    fn finish_training(&mut self) -> PyResult<()> {
        self.inner.finish_training().map_err(py_err)
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn rule_count(&self) -> usize {
        self.inner.rule_count()
    }

    fn state_json(&self) -> PyResult<String> {
        self.inner.state_json().map_err(py_err)
    }
}

/// Sliding-window pairs `(u, v, origin_index)` from a series and optional
/// exogenous channels.
#[pyfunction]
#[pyo3(signature = (values, nu, gamma, mu=0, exogenous=None))]
fn build_pairs(
    values: Vec<f64>,
    nu: usize,
    gamma: usize,
    mu: usize,
    exogenous: Option<Vec<Vec<f64>>>,
) -> PyResult<Vec<(Vec<f64>, Vec<f64>, usize)>> {
    let exogenous = exogenous
        .unwrap_or_default()
        .into_iter()
        .enumerate()
        .map(|(i, values)| ExogenousSeries { name: format!("x{i}"), values })
        .collect();
    let series = RawSeries::with_exogenous("series", values, exogenous).map_err(py_err)?;
    let cfg = WindowConfig { nu, mu, gamma, train_fraction: 0.5 };
    let pairs = timeseries::build_pairs(&series, &cfg).map_err(py_err)?;
    Ok(pairs.into_iter().map(|p| (p.u, p.v, p.origin_index)).collect())
}

#[pyfunction]
fn rmse(actuals: Vec<Vec<f64>>, predictions: Vec<Vec<f64>>) -> PyResult<f64> {
    stats::rmse(&actuals, &predictions).map_err(py_err)
}

#[pyfunction]
fn ndei(actuals: Vec<Vec<f64>>, predictions: Vec<Vec<f64>>) -> PyResult<f64> {
    stats::ndei(&actuals, &predictions).map_err(py_err)
}

fn rank_table(scores: &[Vec<f64>], lower_is_better: bool) -> PyResult<stats::RankTable> {
    let problems: Vec<String> = (0..scores.len()).map(|i| format!("P{}", i + 1)).collect();
    let k = scores.first().map_or(0, Vec::len);
    let algorithms: Vec<String> = (0..k).map(|j| format!("A{}", j + 1)).collect();
    stats::rank_problems(&problems, &algorithms, scores, lower_is_better).map_err(py_err)
}

/// Per-problem ranks and average ranks of a `problems x algorithms` matrix.
#[pyfunction]
#[pyo3(signature = (scores, lower_is_better=true))]
fn rank(scores: Vec<Vec<f64>>, lower_is_better: bool) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let table = rank_table(&scores, lower_is_better)?;
    Ok((table.ranks, table.average_ranks))
}

/// Friedman statistic and degrees of freedom.
#[pyfunction]
#[pyo3(signature = (scores, lower_is_better=true))]
fn friedman(scores: Vec<Vec<f64>>, lower_is_better: bool) -> PyResult<(f64, usize)> {
    let outcome = stats::friedman(&rank_table(&scores, lower_is_better)?).map_err(py_err)?;
    Ok((outcome.q, outcome.df))
}

/// Bonferroni-Dunn critical difference for `k` algorithms over `n` problems.
#[pyfunction]
fn critical_difference(k: usize, n: usize, alpha: f64) -> PyResult<f64> {
    stats::bonferroni_dunn_cd(k, n, alpha).map_err(py_err)
}

#[pymodule]
fn evofis_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Learner>()?;
    m.add_function(wrap_pyfunction!(build_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(ndei, m)?)?;
    m.add_function(wrap_pyfunction!(rank, m)?)?;
    m.add_function(wrap_pyfunction!(friedman, m)?)?;
    m.add_function(wrap_pyfunction!(critical_difference, m)?)?;
    Ok(())
}
