//! The common streaming interface of the three forecasters.

use crate::error::Result;
use crate::fuzzy::FisModel;
use crate::timeseries::RegressorPair;

/// An online forecaster that predicts `v` from `u` and then learns from the
/// revealed pair.
pub trait OnlineLearner {
    fn name(&self) -> &'static str;

    /// `None` until the first pair has been presented.
    fn model(&self) -> Option<&FisModel>;

    fn output_dim(&self) -> usize;

    /// Predicts `pair.v` from `pair.u` alone, then learns from the pair.
    /// Returns the prediction made before learning.
    fn step(&mut self, pair: &RegressorPair) -> Result<Vec<f64>>;

    /// Prediction without adaptation; zeros before the first pair.
    fn predict(&self, u: &[f64]) -> Result<Vec<f64>> {
        match self.model() {
            Some(model) if !model.is_empty() => model.infer(u),
            _ => Ok(vec![0.0; self.output_dim()]),
        }
    }

    /// Called once the training stream is exhausted.
    fn finish_training(&mut self) -> Result<()> {
        Ok(())
    }

    fn rule_count(&self) -> usize {
        self.model().map_or(0, FisModel::rule_count)
    }

    /// Full learner state as JSON.
    fn state_json(&self) -> Result<String>;
}
