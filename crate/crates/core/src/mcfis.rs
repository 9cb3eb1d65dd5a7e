//! Meta-cognitive neuro-fuzzy inference.
//!
//! A controller looks at each sample's prediction error and spatial novelty
//! and picks exactly one of four actions:
//!
//! * `delete` when the model already predicts the sample well,
//! * `grow` when the error is large and no rule covers the input,
//! * `update` (one EKF step on the highest-firing rule) when the error is
//!   still significant,
//! * `reserve` otherwise; reserved samples are replayed once the training
//!   stream ends.
//!
//! The growth and update thresholds adapt by exponential smoothing towards
//! the errors that triggered them, clamped so that
//! `e_delete < e_learn <= e_add` always holds.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{EkfConfig, FisModel, FuzzyRule};
use crate::learner::OnlineLearner;
use crate::timeseries::RegressorPair;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McfisConfig {
    pub e_delete: f64,
    pub e_learn: f64,
    pub e_add: f64,
    /// Max raw firing below which an input counts as novel.
    pub novelty_threshold: f64,
    /// Smoothing factor of the threshold adaptation.
    pub delta: f64,
    pub e_prune: f64,
    pub prune_window: usize,
    pub kappa: f64,
    pub max_reserve_passes: usize,
    /// Replay the reserve queue when training ends.
    pub reserve_replay: bool,
    pub ekf: EkfConfig,
}

impl Default for McfisConfig {
    fn default() -> Self {
        Self {
            e_delete: 0.01,
            e_learn: 0.05,
            e_add: 0.3,
            novelty_threshold: 0.3,
            delta: 0.98,
            e_prune: 1e-3,
            prune_window: 20,
            kappa: 0.7,
            max_reserve_passes: 3,
            reserve_replay: true,
            ekf: EkfConfig::default(),
        }
    }
}

impl McfisConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.e_delete > 0.0
            && self.e_delete < self.e_learn
            && self.e_learn <= self.e_add
            && self.novelty_threshold > 0.0
            && self.novelty_threshold < 1.0
            && self.delta > 0.0
            && self.delta < 1.0
            && self.e_prune > 0.0
            && self.prune_window > 0
            && self.kappa > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid McFIS configuration {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionKind {
    Delete,
    Grow,
    Update,
    Reserve,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaDecision {
    pub kind: DecisionKind,
    /// `|v - v_hat|`, infinite for an empty model.
    pub error: f64,
    /// Max raw firing over rules, 0 for an empty model.
    pub novelty: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionCounts {
    pub presented: usize,
    pub deleted: usize,
    pub grown: usize,
    pub updated: usize,
    pub reserved: usize,
    pub pruned: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McfisState {
    #[serde(flatten)]
    pub model: FisModel,
    pub config: McfisConfig,
    /// Adapted thresholds; start at the configured values.
    pub e_add: f64,
    pub e_learn: f64,
    pub reserve_queue: VecDeque<RegressorPair>,
    /// Consecutive learning steps each rule's normalized firing stayed
    /// below `e_prune`.
    pub low_firing: Vec<usize>,
    pub counts: DecisionCounts,
}

/// Smallest admissible `e_learn`: strictly above `e_delete`.
fn learn_floor(e_delete: f64) -> f64 {
    e_delete * (1.0 + 1e-9) + f64::MIN_POSITIVE
}

impl McfisState {
    /// An empty cognitive network; the first sample always grows a rule.
    pub fn new(config: &McfisConfig, input_dim: usize, output_dim: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            model: FisModel::new(input_dim, output_dim),
            config: *config,
            e_add: config.e_add,
            e_learn: config.e_learn,
            reserve_queue: VecDeque::new(),
            low_firing: Vec::new(),
            counts: DecisionCounts::default(),
        })
    }

    fn predict(&self, u: &[f64]) -> Result<Vec<f64>> {
        if self.model.is_empty() {
            if u.len() != self.model.input_dim {
                return Err(Error::Dimension {
                    what: "input",
                    expected: self.model.input_dim,
                    actual: u.len(),
                });
            }
            Ok(vec![0.0; self.model.output_dim])
        } else {
            self.model.infer(u)
        }
    }

    pub fn decide(&self, pair: &RegressorPair) -> Result<MetaDecision> {
        let prediction = self.predict(&pair.u)?;
        self.decide_with(pair, &prediction)
    }

    fn decide_with(&self, pair: &RegressorPair, prediction: &[f64]) -> Result<MetaDecision> {
        let (error, novelty) = if self.model.is_empty() {
            (f64::INFINITY, 0.0)
        } else {
            let error = pair
                .v
                .iter()
                .zip(prediction)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            (error, self.model.fire(&pair.u)?.max_raw())
        };
        let kind = if error < self.config.e_delete {
            DecisionKind::Delete
        } else if error > self.e_add && novelty < self.config.novelty_threshold {
            DecisionKind::Grow
        } else if error >= self.e_learn {
            DecisionKind::Update
        } else {
            DecisionKind::Reserve
        };
        Ok(MetaDecision {
            kind,
            error,
            novelty,
        })
    }

    pub fn step(&mut self, pair: &RegressorPair) -> Result<(Vec<f64>, MetaDecision)> {
        let prediction = self.predict(&pair.u)?;
        let decision = self.decide_with(pair, &prediction)?;
        self.counts.presented += 1;
        match decision.kind {
            DecisionKind::Delete => self.counts.deleted += 1,
            DecisionKind::Reserve => {
                self.reserve_queue.push_back(pair.clone());
                self.counts.reserved += 1;
            }
            DecisionKind::Grow => {
                self.grow(pair)?;
                if decision.error.is_finite() {
                    let d = self.config.delta;
                    self.e_add = (d * self.e_add + (1.0 - d) * decision.error).max(self.e_learn);
                }
                self.counts.grown += 1;
                self.prune(&pair.u)?;
            }
            DecisionKind::Update => {
                let target = self.model.fire(&pair.u)?.argmax();
                self.model.ekf_update_nearest(target, &pair.u, &pair.v, &self.config.ekf)?;
                let d = self.config.delta;
                self.e_learn = (d * self.e_learn + (1.0 - d) * decision.error)
                    .min(self.e_add)
                    .max(learn_floor(self.config.e_delete));
                self.counts.updated += 1;
                self.prune(&pair.u)?;
            }
        }
        Ok((prediction, decision))
    }

    fn grow(&mut self, pair: &RegressorPair) -> Result<()> {
        let scale = match self.model.nearest_rule(&pair.u) {
            Some((_, distance)) => self.config.kappa * distance,
            None => self.config.kappa,
        };
        let (input_dim, output_dim) = (self.model.input_dim, self.model.output_dim);
        let width = vec![scale.max(self.config.ekf.width_floor); input_dim];
        let rule = FuzzyRule::predicting(pair.u.clone(), width, &pair.v)?
            .with_covariance(self.config.ekf.initial_covariance_matrix(input_dim, output_dim));
        self.model.push_rule(rule)?;
        self.low_firing.push(0);
        Ok(())
    }

    fn prune(&mut self, u: &[f64]) -> Result<()> {
        let firing = self.model.fire(u)?;
        for (count, share) in self.low_firing.iter_mut().zip(&firing.normalized) {
            if *share < self.config.e_prune {
                *count += 1;
            } else {
                *count = 0;
            }
        }
        if self.model.rule_count() < 2 {
            return Ok(());
        }
        let victim = firing
            .normalized
            .iter()
            .zip(&self.low_firing)
            .enumerate()
            .filter(|(_, (_, count))| **count >= self.config.prune_window)
            .min_by(|a, b| a.1 .0.total_cmp(b.1 .0))
            .map(|(i, _)| i);
        if let Some(i) = victim {
            self.model.remove_rule(i)?;
            self.low_firing.remove(i);
            self.counts.pruned += 1;
        }
        Ok(())
    }

    /// Replays the reserve queue in arrival order, at most
    /// `max_reserve_passes` times. Samples that are reserved again stay
    /// queued; a pass of nothing but deletions ends the replay early.
    pub fn drain_reserve(&mut self) -> Result<()> {
        for _ in 0..self.config.max_reserve_passes {
            if self.reserve_queue.is_empty() {
                break;
            }
            let batch = std::mem::take(&mut self.reserve_queue);
            let mut only_deletes = true;
            for pair in &batch {
                let (_, decision) = self.step(pair)?;
                only_deletes &= decision.kind == DecisionKind::Delete;
            }
            if only_deletes {
                break;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct McfisLearner {
    state: McfisState,
    last_decision: Option<MetaDecision>,
}

impl McfisLearner {
    pub fn new(cfg: McfisConfig, input_dim: usize, output_dim: usize) -> Result<Self> {
        Ok(Self {
            state: McfisState::new(&cfg, input_dim, output_dim)?,
            last_decision: None,
        })
    }

    pub fn state(&self) -> &McfisState {
        &self.state
    }

    pub fn last_decision(&self) -> Option<MetaDecision> {
        self.last_decision
    }
}

impl OnlineLearner for McfisLearner {
    fn name(&self) -> &'static str {
        "McFIS"
    }

    fn model(&self) -> Option<&FisModel> {
        Some(&self.state.model)
    }

    fn output_dim(&self) -> usize {
        self.state.model.output_dim
    }

    fn step(&mut self, pair: &RegressorPair) -> Result<Vec<f64>> {
        let (prediction, decision) = self.state.step(pair)?;
        self.last_decision = Some(decision);
        Ok(prediction)
    }

    fn finish_training(&mut self) -> Result<()> {
        if self.state.config.reserve_replay {
            self.state.drain_reserve()?;
        }
        Ok(())
    }

    fn state_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.state)?)
    }
}
