//! Evolving Takagi-Sugeno learner.
//!
//! Rule centers are cluster foci in the joint input-output space. Every
//! sample's Cauchy potential is computed recursively from two running
//! accumulators; center potentials follow a one-step recursion. A sample
//! whose potential beats every center either replaces the nearest center
//! (when within `radius`) or founds a new rule. Consequents are then fitted
//! by global RLS or per-rule weighted RLS.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fuzzy::{euclidean, FisModel, FuzzyRule, DEFAULT_OMEGA};
use crate::learner::OnlineLearner;
use crate::timeseries::RegressorPair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    GlobalRls,
    LocalWrls,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EtsConfig {
    pub radius: f64,
    pub update_mode: UpdateMode,
    /// Initial RLS covariance scale.
    pub omega: f64,
    pub forgetting: f64,
}

impl Default for EtsConfig {
    fn default() -> Self {
        Self {
            radius: 0.3,
            update_mode: UpdateMode::LocalWrls,
            omega: DEFAULT_OMEGA,
            forgetting: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "index")]
pub enum PotentialAction {
    UpdateOnly,
    AddRule,
    ReplaceRule(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialDecision {
    pub sample_potential: f64,
    pub action: PotentialAction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtsState {
    #[serde(flatten)]
    pub model: FisModel,
    /// Samples absorbed into the potential accumulators.
    pub k: usize,
    /// Running per-dimension sums of the joint samples.
    pub beta: Vec<f64>,
    /// Running sum of squared norms of the joint samples.
    pub sigma: f64,
    pub center_potentials: Vec<f64>,
    /// Rule foci in joint `[u; v]` space.
    pub joint_centers: Vec<Vec<f64>>,
    pub radius: f64,
    pub update_mode: UpdateMode,
    pub omega: f64,
    pub forgetting: f64,
}

fn joint(pair: &RegressorPair) -> Vec<f64> {
    pair.u.iter().chain(&pair.v).copied().collect()
}

impl EtsState {
    /// The first sample becomes the focus of the first rule.
    pub fn init(first: &RegressorPair, cfg: &EtsConfig) -> Result<Self> {
        let input_dim = first.u.len();
        let mut model = FisModel::new(input_dim, first.v.len());
        let mut rule = FuzzyRule::predicting(first.u.clone(), vec![rule_width(cfg.radius); input_dim], &first.v)?;
        if cfg.update_mode == UpdateMode::LocalWrls {
            rule = rule.with_covariance(local_covariance(input_dim, cfg.omega));
        }
        model.push_rule(rule)?;
        if cfg.update_mode == UpdateMode::GlobalRls {
            model.init_global_covariance(cfg.omega);
        }
        let z = joint(first);
        Ok(Self {
            model,
            k: 1,
            sigma: z.iter().map(|x| x * x).sum(),
            beta: z.clone(),
            center_potentials: vec![1.0],
            joint_centers: vec![z],
            radius: cfg.radius,
            update_mode: cfg.update_mode,
            omega: cfg.omega,
            forgetting: cfg.forgetting,
        })
    }

    /// Potential of `z` given all previously absorbed samples, then absorbs
    /// `z` into the accumulators.
    ///
    /// `P(z) = (k-1) / ((k-1)(theta + 1) + sigma - 2 z.beta)` with
    /// `theta = |z|^2`; this equals `1 / (1 + mean_l |z - z_l|^2)`.
    pub fn sample_potential(&mut self, z: &[f64]) -> f64 {
        let seen = self.k as f64;
        let theta: f64 = z.iter().map(|x| x * x).sum();
        let projection: f64 = z.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
        let potential = if self.k == 0 {
            1.0
        } else {
            let denom = seen * (theta + 1.0) + self.sigma - 2.0 * projection;
            (seen / denom).min(1.0)
        };
        self.k += 1;
        self.sigma += theta;
        for (b, x) in self.beta.iter_mut().zip(z) {
            *b += x;
        }
        potential
    }

    /// `P_k(c) = (k-1) P / ((k-2) + P + P |z - c|^2)` for each center `c`,
    /// with `k` the current sample count (already including `z`).
    pub fn refresh_center_potentials(&mut self, z: &[f64]) {
        let k = self.k as f64;
        if self.k < 2 {
            return;
        }
        for (p, c) in self.center_potentials.iter_mut().zip(&self.joint_centers) {
            let d2: f64 = c.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
            *p = (k - 1.0) * *p / ((k - 2.0) + *p + *p * d2);
        }
    }

    pub fn step(&mut self, pair: &RegressorPair) -> Result<(Vec<f64>, PotentialDecision)> {
        let prediction = self.model.infer(&pair.u)?;

        let z = joint(pair);
        let potential = self.sample_potential(&z);
        self.refresh_center_potentials(&z);

        let best = self.center_potentials.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let action = if potential > best {
            let (nearest, distance) = self
                .joint_centers
                .iter()
                .enumerate()
                .map(|(i, c)| (i, euclidean(c, &z)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("at least one rule");
            if distance < self.radius {
                self.replace_rule(nearest, pair, z, potential);
                PotentialAction::ReplaceRule(nearest)
            } else {
                self.add_rule(pair, z, potential)?;
                PotentialAction::AddRule
            }
        } else {
            PotentialAction::UpdateOnly
        };

        self.update_consequents(pair)?;
        Ok((
            prediction,
            PotentialDecision {
                sample_potential: potential,
                action,
            },
        ))
    }

    fn replace_rule(&mut self, index: usize, pair: &RegressorPair, z: Vec<f64>, potential: f64) {
        self.model.rules[index].center.clone_from(&pair.u);
        self.joint_centers[index] = z;
        self.center_potentials[index] = potential;
    }

    fn add_rule(&mut self, pair: &RegressorPair, z: Vec<f64>, potential: f64) -> Result<()> {
        let input_dim = self.model.input_dim;
        let consequent = self.model.blended_consequent(&pair.u)?;
        let mut rule = FuzzyRule::new(pair.u.clone(), vec![rule_width(self.radius); input_dim], consequent)?;
        if self.update_mode == UpdateMode::LocalWrls {
            rule = rule.with_covariance(local_covariance(input_dim, self.omega));
        }
        self.model.push_rule(rule)?;
        if self.update_mode == UpdateMode::GlobalRls {
            self.model.expand_global_covariance(self.omega);
        }
        self.joint_centers.push(z);
        self.center_potentials.push(potential);
        Ok(())
    }

    fn update_consequents(&mut self, pair: &RegressorPair) -> Result<()> {
        match self.update_mode {
            UpdateMode::GlobalRls => self.model.rls_update_global(&pair.u, &pair.v, self.forgetting),
            UpdateMode::LocalWrls => {
                let firing = self.model.fire(&pair.u)?;
                for (rule, w) in self.model.rules.iter_mut().zip(&firing.normalized) {
                    rule.rls_update_local(*w, &pair.u, &pair.v, self.forgetting)?;
                }
                Ok(())
            }
        }
    }
}

fn rule_width(radius: f64) -> f64 {
    radius / std::f64::consts::SQRT_2
}

fn local_covariance(input_dim: usize, omega: f64) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::identity(input_dim + 1, input_dim + 1) * omega
}

/// eTS behind the [`OnlineLearner`] interface. The first presented pair
/// initializes the rule base; its prediction is all zeros.
#[derive(Clone, Debug)]
pub struct EtsLearner {
    cfg: EtsConfig,
    output_dim: usize,
    state: Option<EtsState>,
    last_decision: Option<PotentialDecision>,
}

impl EtsLearner {
    pub fn new(cfg: EtsConfig, output_dim: usize) -> Self {
        Self {
            cfg,
            output_dim,
            state: None,
            last_decision: None,
        }
    }

    pub fn state(&self) -> Option<&EtsState> {
        self.state.as_ref()
    }

    pub fn last_decision(&self) -> Option<PotentialDecision> {
        self.last_decision
    }
}

impl OnlineLearner for EtsLearner {
    fn name(&self) -> &'static str {
        "eTS"
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
                let (prediction, decision) = state.step(pair)?;
                self.last_decision = Some(decision);
                Ok(prediction)
            }
            None => {
                self.state = Some(EtsState::init(pair, &self.cfg)?);
                Ok(vec![0.0; pair.v.len()])
            }
        }
    }

    fn state_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.state)?)
    }
}
