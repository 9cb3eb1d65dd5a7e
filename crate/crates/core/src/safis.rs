//! Sequential adaptive fuzzy inference.
//!
//! A sample founds a new rule when it is far from every center (distance
//! above a decaying threshold) and a rule built on it would carry enough
//! influence. Otherwise only the nearest rule is adjusted by one EKF step.
//! Rules whose influence stays below `e_prune` for `prune_window`
//! consecutive samples are removed, one per step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{EkfConfig, FisModel, FuzzyRule};
use crate::learner::OnlineLearner;
use crate::timeseries::RegressorPair;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafisConfig {
    pub epsilon_max: f64,
    pub epsilon_min: f64,
    /// Per-step decay of the distance threshold.
    pub decay: f64,
    pub e_grow: f64,
    pub e_prune: f64,
    /// New-rule width as a multiple of the distance to the nearest center.
    pub kappa: f64,
    pub prune_window: usize,
    pub ekf: EkfConfig,
}

impl Default for SafisConfig {
    fn default() -> Self {
        Self {
            epsilon_max: 0.5,
            epsilon_min: 0.1,
            decay: 0.997,
            e_grow: 0.05,
            e_prune: 0.01,
            kappa: 2.0,
            prune_window: 10,
            ekf: EkfConfig::default(),
        }
    }
}

impl SafisConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon_min > 0.0
            && self.epsilon_min <= self.epsilon_max
            && self.decay > 0.0
            && self.decay < 1.0
            && self.e_grow > 0.0
            && self.e_prune > 0.0
            && self.kappa > 0.0
            && self.prune_window > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid SAFIS configuration {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Learning {
    Grow,
    Update,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafisAction {
    pub learning: Learning,
    /// Index (before removal) of the rule pruned after learning.
    pub pruned: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafisState {
    #[serde(flatten)]
    pub model: FisModel,
    pub config: SafisConfig,
    /// Samples seen so far, the current one included.
    pub step: usize,
    /// Consecutive low-influence steps per rule.
    pub low_influence: Vec<usize>,
}

/// `|a_i| R_i / sum_j R_j`, where `|a_i|` is the norm of rule `i`'s affine
/// output at `u`.
pub fn influence(model: &FisModel, u: &[f64]) -> Result<Vec<f64>> {
    let firing = model.fire(u)?;
    Ok(model
        .rules
        .iter()
        .zip(&firing.normalized)
        .map(|(rule, share)| rule.output(u).norm() * share)
        .collect())
}

/// Influence a rule centered at `u` would have if it carried the current
/// error magnitude: its own firing at `u` is 1.
pub fn candidate_influence(model: &FisModel, u: &[f64], error_norm: f64) -> Result<f64> {
    let total: f64 = model.fire(u)?.raw.iter().sum();
    Ok(error_norm / (total + 1.0))
}

fn error_norm(v: &[f64], prediction: &[f64]) -> f64 {
    v.iter()
        .zip(prediction)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

impl SafisState {
    pub fn init(first: &RegressorPair, config: &SafisConfig) -> Result<Self> {
        config.validate()?;
        let input_dim = first.u.len();
        let output_dim = first.v.len();
        let mut model = FisModel::new(input_dim, output_dim);
        let width = vec![config.kappa.max(config.ekf.width_floor); input_dim];
        let rule = FuzzyRule::predicting(first.u.clone(), width, &first.v)?
            .with_covariance(config.ekf.initial_covariance_matrix(input_dim, output_dim));
        model.push_rule(rule)?;
        Ok(Self {
            model,
            config: *config,
            step: 1,
            low_influence: vec![0],
        })
    }

    /// `max(epsilon_max * decay^(step - 1), epsilon_min)`
    pub fn distance_threshold(&self) -> f64 {
        let exponent = self.step.saturating_sub(1).min(i32::MAX as usize) as i32;
        (self.config.epsilon_max * self.config.decay.powi(exponent)).max(self.config.epsilon_min)
    }

    pub fn step(&mut self, pair: &RegressorPair) -> Result<(Vec<f64>, SafisAction)> {
        let prediction = self.model.infer(&pair.u)?;
        self.step += 1;

        let (nearest, distance) = self.model.nearest_rule(&pair.u).ok_or(Error::Uninitialized)?;
        let error = error_norm(&pair.v, &prediction);
        let grow = distance > self.distance_threshold()
            && candidate_influence(&self.model, &pair.u, error)? > self.config.e_grow;

        let learning = if grow {
            let width = vec![(self.config.kappa * distance).max(self.config.ekf.width_floor); self.model.input_dim];
            let rule = FuzzyRule::predicting(pair.u.clone(), width, &pair.v)?.with_covariance(
                self.config
                    .ekf
                    .initial_covariance_matrix(self.model.input_dim, self.model.output_dim),
            );
            self.model.push_rule(rule)?;
            self.low_influence.push(0);
            Learning::Grow
        } else {
            self.model.ekf_update_nearest(nearest, &pair.u, &pair.v, &self.config.ekf)?;
            Learning::Update
        };

        let pruned = self.prune(&pair.u)?;
        Ok((prediction, SafisAction { learning, pruned }))
    }

    fn prune(&mut self, u: &[f64]) -> Result<Option<usize>> {
        let influences = influence(&self.model, u)?;
        for (count, inf) in self.low_influence.iter_mut().zip(&influences) {
            if *inf < self.config.e_prune {
                *count += 1;
            } else {
                *count = 0;
            }
        }
        if self.model.rule_count() < 2 {
            return Ok(None);
        }
        let victim = influences
            .iter()
            .zip(&self.low_influence)
            .enumerate()
            .filter(|(_, (_, count))| **count >= self.config.prune_window)
            .min_by(|a, b| a.1 .0.total_cmp(b.1 .0))
            .map(|(i, _)| i);
        if let Some(i) = victim {
            self.model.remove_rule(i)?;
            self.low_influence.remove(i);
        }
        Ok(victim)
    }
}

#[derive(Clone, Debug)]
pub struct SafisLearner {
    cfg: SafisConfig,
    output_dim: usize,
    state: Option<SafisState>,
    last_action: Option<SafisAction>,
}

impl SafisLearner {
    pub fn new(cfg: SafisConfig, output_dim: usize) -> Self {
        Self {
            cfg,
            output_dim,
            state: None,
            last_action: None,
        }
    }

    pub fn state(&self) -> Option<&SafisState> {
        self.state.as_ref()
    }

    pub fn last_action(&self) -> Option<SafisAction> {
        self.last_action
    }
}

impl OnlineLearner for SafisLearner {
    fn name(&self) -> &'static str {
        "SAFIS"
    }

    fn model(&self) -> Option<&FisModel> {
        self.state.as_ref().map(|s| &s.model)
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn step(&mut self, pair: &RegressorPair) -> Result<Vec<f64>> {
        match &mut self.state {
            Some(state) => {
                let (prediction, action) = state.step(pair)?;
                self.last_action = Some(action);
                Ok(prediction)
            }
            None => {
                self.state = Some(SafisState::init(pair, &self.cfg)?);
                Ok(vec![0.0; pair.v.len()])
            }
        }
    }

    fn state_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.state)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(u: Vec<f64>, v: Vec<f64>) -> RegressorPair {
        RegressorPair { u, v, origin_index: 0 }
    }

    #[test]
    fn init_predicts_first_target() {
        let first = pair(vec![0.2, 0.4, 0.6, 0.8], vec![0.7]);
        let state = SafisState::init(&first, &SafisConfig::default()).unwrap();
        assert_eq!(state.model.rule_count(), 1);
        assert_eq!(state.model.infer(&first.u).unwrap(), first.v);
        assert_eq!(state.distance_threshold(), 0.5);
        assert_eq!(state.model.rules[0].width, vec![2.0; 4]);
    }

    #[test]
    fn influence_examples() {
        let mut model = FisModel::new(1, 1);
        model.push_rule(FuzzyRule::predicting(vec![0.0], vec![1.0], &[-3.0]).unwrap()).unwrap();
        assert_eq!(influence(&model, &[0.4]).unwrap(), vec![3.0]);

        model.rules[0].consequent = DMatrix::from_row_slice(1, 2, &[2.0, 0.0]);
        model.push_rule(FuzzyRule::predicting(vec![1.0], vec![1.0], &[4.0]).unwrap()).unwrap();
        let inf = influence(&model, &[0.5]).unwrap();
        assert!((inf[0] - 1.0).abs() < 1e-15 && (inf[1] - 2.0).abs() < 1e-15);

        model.rules[1].consequent.fill(0.0);
        assert_eq!(influence(&model, &[0.5]).unwrap()[1], 0.0);
    }

    #[test]
    fn influence_invariant_to_firing_scale() {
        // scaling every raw firing uniformly: shift all centers' log
        // activations by the same amount via an extra common dimension
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut model = FisModel::new(2, 1);
        for _ in 0..4 {
            let c = vec![rng.random_range(0.0..1.0), 0.0];
            let mut r = FuzzyRule::predicting(c, vec![0.3, 0.5], &[rng.random_range(-1.0..1.0)]).unwrap();
            r.consequent[(0, 1)] = rng.random_range(-1.0..1.0);
            model.push_rule(r).unwrap();
        }
        let a = influence(&model, &[0.4, 0.0]).unwrap();
        let b = influence(&model, &[0.4, 0.7]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_at_center_never_grows() {
        let first = pair(vec![0.5; 3], vec![0.1]);
        let mut state = SafisState::init(&first, &SafisConfig::default()).unwrap();
        for i in 0..50 {
            let (_, action) = state.step(&pair(vec![0.5; 3], vec![i as f64])).unwrap();
            assert_eq!(action.learning, Learning::Update);
        }
        assert_eq!(state.model.rule_count(), 1);
    }

    #[test]
    fn far_sample_with_large_error_grows() {
        let first = pair(vec![0.1; 4], vec![0.1]);
        let mut state = SafisState::init(&first, &SafisConfig::default()).unwrap();
        let far = pair(vec![0.9; 4], vec![0.9]);
        let (_, action) = state.step(&far).unwrap();
        assert_eq!(action.learning, Learning::Grow);
        assert_eq!(state.model.rule_count(), 2);
        let d = (4.0f64 * 0.8 * 0.8).sqrt();
        for w in &state.model.rules[1].width {
            assert!((w - 2.0 * d).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_is_non_increasing_and_bounded() {
        let first = pair(vec![0.5], vec![0.5]);
        let mut state = SafisState::init(&first, &SafisConfig::default()).unwrap();
        let mut last = state.distance_threshold();
        for _ in 0..2000 {
            state.step = state.step + 1;
            let eps = state.distance_threshold();
            assert!(eps <= last && eps >= 0.1);
            last = eps;
        }
        assert_eq!(last, 0.1);
    }

    #[test]
    fn starved_rule_is_pruned_after_window() {
        let cfg = SafisConfig { kappa: 0.3, ..Default::default() };
        let home = pair(vec![0.2; 4], vec![0.2]);
        let mut state = SafisState::init(&home, &cfg).unwrap();
        let (_, action) = state.step(&pair(vec![0.9; 4], vec![0.9])).unwrap();
        assert_eq!(action.learning, Learning::Grow);
        assert_eq!(state.model.rule_count(), 2);

        let mut pruned_at = None;
        for i in 1..=cfg.prune_window + 5 {
            let (_, action) = state.step(&home).unwrap();
            if let Some(idx) = action.pruned {
                assert_eq!(idx, 1);
                pruned_at = Some(i);
                break;
            }
        }
        assert_eq!(pruned_at, Some(cfg.prune_window));
        assert_eq!(state.model.rule_count(), 1);
    }

    #[test]
    fn state_json_round_trip() {
        let first = pair(vec![0.1; 2], vec![0.3]);
        let mut state = SafisState::init(&first, &SafisConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..40 {
            let u: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..1.0)).collect();
            state.step(&pair(u.clone(), vec![u[0]])).unwrap();
        }
        let text = serde_json::to_string(&state).unwrap();
        let back: SafisState = serde_json::from_str(&text).unwrap();
        assert_eq!(back, state);
    }
}
