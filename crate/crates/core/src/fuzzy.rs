//! First-order Takagi-Sugeno machinery shared by the learners.
//!
//! Each rule has a Gaussian antecedent (center, per-dimension width) and an
//! affine consequent `A_i [1; u]`, one row per output coordinate. The model
//! output is the normalized-firing-weighted sum of the rule outputs.
//!
//! Three estimators are provided:
//! * global RLS over the stacked, firing-weighted regressor of all rules,
//! * local weighted RLS on a single rule,
//! * an EKF step on one rule's consequent, center and width.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_OMEGA: f64 = 1000.0;
pub const DEFAULT_WIDTH_FLOOR: f64 = 1e-3;

/// Serializes matrices as a list of rows.
pub(crate) mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, cols_if_empty: usize) -> Result<DMatrix<f64>, String> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(cols_if_empty, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("ragged matrix rows".into());
        }
        Ok(DMatrix::from_row_iterator(
            nrows,
            ncols,
            rows.into_iter().flatten(),
        ))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        from_rows(Vec::deserialize(d)?, 0).map_err(D::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(
            m: &Option<DMatrix<f64>>,
            s: S,
        ) -> Result<S::Ok, S::Error> {
            m.as_ref().map(to_rows).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<Option<DMatrix<f64>>, D::Error> {
            Option::<Vec<Vec<f64>>>::deserialize(d)?
                .map(|rows| from_rows(rows, 0).map_err(D::Error::custom))
                .transpose()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRule {
    pub center: Vec<f64>,
    pub width: Vec<f64>,
    /// `output_dim x (input_dim + 1)`; column 0 is the bias.
    #[serde(with = "matrix_rows")]
    pub consequent: DMatrix<f64>,
    /// Local wRLS or EKF covariance, depending on the owning learner.
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "matrix_rows::option"
    )]
    pub covariance: Option<DMatrix<f64>>,
}

impl FuzzyRule {
    pub fn new(center: Vec<f64>, width: Vec<f64>, consequent: DMatrix<f64>) -> Result<Self> {
        if width.len() != center.len() {
            return Err(Error::Dimension {
                what: "rule width",
                expected: center.len(),
                actual: width.len(),
            });
        }
        if width.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument("rule widths must be positive".into()));
        }
        if consequent.ncols() != center.len() + 1 {
            return Err(Error::Dimension {
                what: "consequent columns",
                expected: center.len() + 1,
                actual: consequent.ncols(),
            });
        }
        Ok(Self {
            center,
            width,
            consequent,
            covariance: None,
        })
    }

    /// A rule whose own affine output equals `target` everywhere
    /// (bias = target, zero slopes).
    pub fn predicting(center: Vec<f64>, width: Vec<f64>, target: &[f64]) -> Result<Self> {
        let mut consequent = DMatrix::zeros(target.len(), center.len() + 1);
        consequent.column_mut(0).copy_from_slice(target);
        Self::new(center, width, consequent)
    }

    pub fn with_covariance(mut self, covariance: DMatrix<f64>) -> Self {
        self.covariance = Some(covariance);
        self
    }

    pub fn input_dim(&self) -> usize {
        self.center.len()
    }

    pub fn output_dim(&self) -> usize {
        self.consequent.nrows()
    }

    /// `-sum_d (u_d - c_d)^2 / (2 w_d^2)`
    pub fn log_activation(&self, u: &[f64]) -> f64 {
        -self
            .center
            .iter()
            .zip(&self.width)
            .zip(u)
            .map(|((c, w), x)| (x - c).powi(2) / (2.0 * w * w))
            .sum::<f64>()
    }

    pub fn output(&self, u: &[f64]) -> DVector<f64> {
        &self.consequent * extended(u)
    }

    /// One weighted RLS step on `[1; u]`. The innovation is taken against
    /// this rule's own output.
    pub fn rls_update_local(
        &mut self,
        weight: f64,
        u: &[f64],
        v: &[f64],
        forgetting: f64,
    ) -> Result<()> {
        check_len("input", self.input_dim(), u.len())?;
        check_len("target", self.output_dim(), v.len())?;
        let dim = self.input_dim() + 1;
        let p = self
            .covariance
            .get_or_insert_with(|| DMatrix::identity(dim, dim) * DEFAULT_OMEGA);
        check_len("local covariance", dim, p.nrows())?;

        let x = extended(u);
        let px = &*p * &x;
        let gain = &px * (weight / (forgetting + weight * x.dot(&px)));
        let innovation = DVector::from_column_slice(v) - &self.consequent * &x;
        self.consequent += &innovation * gain.transpose();
        *p = (&*p - &gain * px.transpose()) / forgetting;
        symmetrize(p);
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FisModel {
    pub input_dim: usize,
    pub output_dim: usize,
    pub rules: Vec<FuzzyRule>,
    /// Covariance of the stacked consequent vector for global RLS.
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "matrix_rows::option"
    )]
    pub global_covariance: Option<DMatrix<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiringVector {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl FiringVector {
    pub fn argmax(&self) -> usize {
        self.raw
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &r)| {
                if r > best.1 {
                    (i, r)
                } else {
                    best
                }
            })
            .0
    }

    pub fn max_raw(&self) -> f64 {
        self.raw.iter().copied().fold(0.0, f64::max)
    }
}

/// EKF tunables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EkfConfig {
    /// Observation noise `r` in `R = r I`.
    pub observation_noise: f64,
    /// Initial parameter covariance `p0` in `P = p0 I`.
    pub initial_covariance: f64,
    /// Random-walk noise added to the diagonal after each step.
    pub process_noise: f64,
    pub width_floor: f64,
    /// Restrict the update to consequent parameters.
    pub consequent_only: bool,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            observation_noise: 0.01,
            initial_covariance: 1.0,
            process_noise: 0.0,
            width_floor: DEFAULT_WIDTH_FLOOR,
            consequent_only: false,
        }
    }
}

impl EkfConfig {
    pub fn parameter_count(&self, input_dim: usize, output_dim: usize) -> usize {
        let consequent = output_dim * (input_dim + 1);
        if self.consequent_only {
            consequent
        } else {
            consequent + 2 * input_dim
        }
    }

    pub fn initial_covariance_matrix(&self, input_dim: usize, output_dim: usize) -> DMatrix<f64> {
        let n = self.parameter_count(input_dim, output_dim);
        DMatrix::identity(n, n) * self.initial_covariance
    }
}

pub(crate) fn extended(u: &[f64]) -> DVector<f64> {
    DVector::from_iterator(u.len() + 1, std::iter::once(1.0).chain(u.iter().copied()))
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension {
            what,
            expected,
            actual,
        });
    }
    Ok(())
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

impl FisModel {
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            rules: Vec::new(),
            global_covariance: None,
        }
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    fn check_rule(&self, rule: &FuzzyRule) -> Result<()> {
        check_len("rule center", self.input_dim, rule.input_dim())?;
        check_len("rule outputs", self.output_dim, rule.output_dim())
    }

    pub fn push_rule(&mut self, rule: FuzzyRule) -> Result<()> {
        self.check_rule(&rule)?;
        self.rules.push(rule);
        Ok(())
    }

    pub fn remove_rule(&mut self, index: usize) -> Result<FuzzyRule> {
        if index >= self.rules.len() {
            return Err(Error::InvalidIndex {
                index,
                len: self.rules.len(),
            });
        }
        if let Some(p) = self.global_covariance.take() {
            let block = self.input_dim + 1;
            self.global_covariance = Some(
                p.remove_rows(index * block, block)
                    .remove_columns(index * block, block),
            );
        }
        Ok(self.rules.remove(index))
    }

    pub fn nearest_rule(&self, u: &[f64]) -> Option<(usize, f64)> {
        self.rules
            .iter()
            .enumerate()
            .map(|(i, r)| (i, euclidean(&r.center, u)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn fire(&self, u: &[f64]) -> Result<FiringVector> {
        check_len("input", self.input_dim, u.len())?;
        if self.rules.is_empty() {
            return Err(Error::Uninitialized);
        }
        let logs: Vec<f64> = self.rules.iter().map(|r| r.log_activation(u)).collect();
        let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // shifted exponentials keep the normalization defined when every
        // raw activation underflows
        let shifted: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
        let total: f64 = shifted.iter().sum();
        Ok(FiringVector {
            raw: logs.iter().map(|l| l.exp().max(f64::MIN_POSITIVE)).collect(),
            normalized: shifted.iter().map(|s| s / total).collect(),
        })
    }

    pub fn infer_with(&self, u: &[f64], firing: &FiringVector) -> Vec<f64> {
        let x = extended(u);
        let mut out = DVector::zeros(self.output_dim);
        for (rule, w) in self.rules.iter().zip(&firing.normalized) {
            out += (&rule.consequent * &x) * *w;
        }
        out.as_slice().to_vec()
    }

    pub fn infer(&self, u: &[f64]) -> Result<Vec<f64>> {
        let firing = self.fire(u)?;
        Ok(self.infer_with(u, &firing))
    }

    /// Firing-weighted average of the current consequents at `u`.
    pub fn blended_consequent(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let firing = self.fire(u)?;
        let mut out = DMatrix::zeros(self.output_dim, self.input_dim + 1);
        for (rule, w) in self.rules.iter().zip(&firing.normalized) {
            out += &rule.consequent * *w;
        }
        Ok(out)
    }

    fn stacked_dim(&self) -> usize {
        self.rules.len() * (self.input_dim + 1)
    }

    pub fn init_global_covariance(&mut self, omega: f64) {
        let n = self.stacked_dim();
        self.global_covariance = Some(DMatrix::identity(n, n) * omega);
    }

    /// Grows the global covariance after new rules were pushed: existing
    /// blocks are inflated by `(R^2 + 1) / R^2` and new blocks start at
    /// `omega I`.
    pub fn expand_global_covariance(&mut self, omega: f64) {
        let n = self.stacked_dim();
        let Some(old) = self.global_covariance.take() else {
            self.init_global_covariance(omega);
            return;
        };
        let m = old.nrows();
        let rules = (self.rules.len()) as f64;
        let rho = (rules * rules + 1.0) / (rules * rules);
        let mut p = DMatrix::identity(n, n) * omega;
        p.view_mut((0, 0), (m, m)).copy_from(&(old * rho));
        self.global_covariance = Some(p);
    }

    /// One RLS step on the stacked regressor
    /// `x = [w_1 [1;u]; ...; w_R [1;u]]`, shared across output coordinates.
    pub fn rls_update_global(&mut self, u: &[f64], v: &[f64], forgetting: f64) -> Result<()> {
        check_len("target", self.output_dim, v.len())?;
        let firing = self.fire(u)?;
        let prediction = self.infer_with(u, &firing);
        let block = self.input_dim + 1;
        let n = self.stacked_dim();
        if self.global_covariance.is_none() {
            self.init_global_covariance(DEFAULT_OMEGA);
        }
        let p = self.global_covariance.as_mut().expect("initialized above");
        check_len("global covariance", n, p.nrows())?;

        let ext = extended(u);
        let mut x = DVector::zeros(n);
        for (i, w) in firing.normalized.iter().enumerate() {
            x.rows_mut(i * block, block).copy_from(&(&ext * *w));
        }
        let px = &*p * &x;
        let gain = &px / (forgetting + x.dot(&px));
        *p = (&*p - &gain * px.transpose()) / forgetting;
        symmetrize(p);

        for (o, (target, predicted)) in v.iter().zip(&prediction).enumerate() {
            let innovation = target - predicted;
            for (i, rule) in self.rules.iter_mut().enumerate() {
                for c in 0..block {
                    rule.consequent[(o, c)] += gain[i * block + c] * innovation;
                }
            }
        }
        Ok(())
    }

    /// Jacobian of the model output with respect to rule `index`'s EKF
    /// parameter vector `[vec_row(A_i), center_i, width_i]`.
    pub fn ekf_jacobian(&self, index: usize, u: &[f64], consequent_only: bool) -> Result<DMatrix<f64>> {
        check_len("input", self.input_dim, u.len())?;
        if index >= self.rules.len() {
            return Err(Error::InvalidIndex {
                index,
                len: self.rules.len(),
            });
        }
        let firing = self.fire(u)?;
        let prediction = DVector::from_vec(self.infer_with(u, &firing));
        let rule = &self.rules[index];
        let share = firing.normalized[index];
        let block = self.input_dim + 1;
        let n_cons = self.output_dim * block;
        let n_params = if consequent_only {
            n_cons
        } else {
            n_cons + 2 * self.input_dim
        };
        let ext = extended(u);
        let mut jac = DMatrix::zeros(self.output_dim, n_params);
        for o in 0..self.output_dim {
            for c in 0..block {
                jac[(o, o * block + c)] = share * ext[c];
            }
        }
        if !consequent_only {
            let spread = (rule.output(u) - prediction) * share;
            for d in 0..self.input_dim {
                let w2 = rule.width[d] * rule.width[d];
                let diff = u[d] - rule.center[d];
                let dc = diff / w2;
                let dw = diff * diff / (w2 * rule.width[d]);
                for o in 0..self.output_dim {
                    jac[(o, n_cons + d)] = spread[o] * dc;
                    jac[(o, n_cons + self.input_dim + d)] = spread[o] * dw;
                }
            }
        }
        if jac.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite EKF Jacobian".into()));
        }
        Ok(jac)
    }

    /// One EKF step on rule `index` with innovation `v - infer(u)`.
    pub fn ekf_update_nearest(
        &mut self,
        index: usize,
        u: &[f64],
        v: &[f64],
        cfg: &EkfConfig,
    ) -> Result<()> {
        check_len("target", self.output_dim, v.len())?;
        let jac = self.ekf_jacobian(index, u, cfg.consequent_only)?;
        let innovation = DVector::from_column_slice(v) - DVector::from_vec(self.infer(u)?);
        let n_params = jac.ncols();
        let (input_dim, output_dim) = (self.input_dim, self.output_dim);
        let rule = &mut self.rules[index];
        let p = rule
            .covariance
            .get_or_insert_with(|| cfg.initial_covariance_matrix(input_dim, output_dim));
        check_len("EKF covariance", n_params, p.nrows())?;

        let pht = &*p * jac.transpose();
        let s = &jac * &pht + DMatrix::identity(output_dim, output_dim) * cfg.observation_noise;
        let s_inv = s
            .cholesky()
            .ok_or_else(|| Error::Numerical("EKF innovation covariance not positive definite".into()))?
            .inverse();
        let gain = &pht * s_inv;
        let delta = &gain * innovation;
        *p -= &gain * pht.transpose();
        if cfg.process_noise > 0.0 {
            for i in 0..n_params {
                p[(i, i)] += cfg.process_noise;
            }
        }
        symmetrize(p);

        if delta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite EKF parameter step".into()));
        }
        let block = input_dim + 1;
        for o in 0..output_dim {
            for c in 0..block {
                rule.consequent[(o, c)] += delta[o * block + c];
            }
        }
        if !cfg.consequent_only {
            let n_cons = output_dim * block;
            for d in 0..input_dim {
                rule.center[d] += delta[n_cons + d];
                rule.width[d] = (rule.width[d] + delta[n_cons + input_dim + d]).max(cfg.width_floor);
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        for rule in &model.rules {
            model.check_rule(rule)?;
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rule(center: Vec<f64>, width: f64, consequent: &[&[f64]]) -> FuzzyRule {
        let n = center.len();
        let rows = consequent.len();
        let m = DMatrix::from_row_iterator(rows, n + 1, consequent.iter().flat_map(|r| r.iter().copied()));
        FuzzyRule::new(center, vec![width; n], m).unwrap()
    }

    fn random_model(rng: &mut ChaCha8Rng, rules: usize, input_dim: usize, output_dim: usize) -> FisModel {
        let mut model = FisModel::new(input_dim, output_dim);
        for _ in 0..rules {
            let center = (0..input_dim).map(|_| rng.random_range(0.0..1.0)).collect();
            let width = (0..input_dim).map(|_| rng.random_range(0.2..0.8)).collect();
            let consequent = DMatrix::from_fn(output_dim, input_dim + 1, |_, _| rng.random_range(-1.0..1.0));
            model.push_rule(FuzzyRule::new(center, width, consequent).unwrap()).unwrap();
        }
        model
    }

    /// Batch least squares on `[sqrt(w) x | sqrt(w) y]` rows, augmented with
    /// the prior pseudo-observations `omega^{-1/2} I`, solved by SVD.
    fn batch_least_squares(rows: &[(Vec<f64>, f64, f64)], prior: &[f64], omega: f64) -> Vec<f64> {
        let dim = prior.len();
        let n = rows.len() + dim;
        let mut a = DMatrix::zeros(n, dim);
        let mut b = DVector::zeros(n);
        for (r, (x, y, w)) in rows.iter().enumerate() {
            let sw = w.sqrt();
            for c in 0..dim {
                a[(r, c)] = sw * x[c];
            }
            b[r] = sw * y;
        }
        let s = 1.0 / omega.sqrt();
        for c in 0..dim {
            a[(rows.len() + c, c)] = s;
            b[rows.len() + c] = s * prior[c];
        }
        a.svd(true, true).solve(&b, 1e-14).unwrap().as_slice().to_vec()
    }

    #[test]
    fn firing_at_center_and_symmetry() {
        let mut model = FisModel::new(2, 1);
        model.push_rule(rule(vec![0.0, 0.0], 0.5, &[&[0.0, 0.0, 0.0]])).unwrap();
        let f = model.fire(&[0.0, 0.0]).unwrap();
        assert_eq!(f.raw, vec![1.0]);
        assert_eq!(f.normalized, vec![1.0]);
        assert_eq!(model.fire(&[3.0, -2.0]).unwrap().normalized, vec![1.0]);

        model.push_rule(rule(vec![1.0, 1.0], 0.5, &[&[1.0, 0.0, 0.0]])).unwrap();
        let f = model.fire(&[0.5, 0.5]).unwrap();
        assert!((f.normalized[0] - 0.5).abs() < 1e-15);
        assert!((model.infer(&[0.5, 0.5]).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn firing_far_away_stays_defined() {
        let mut model = FisModel::new(1, 1);
        model.push_rule(rule(vec![0.0], 1e-3, &[&[0.0, 0.0]])).unwrap();
        model.push_rule(rule(vec![1.0], 1e-3, &[&[1.0, 0.0]])).unwrap();
        let f = model.fire(&[100.0]).unwrap();
        assert!(f.raw.iter().all(|r| *r > 0.0));
        assert!((f.normalized.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(f.normalized, vec![0.0, 1.0]);
    }

    #[test]
    fn empty_model_is_uninitialized() {
        let model = FisModel::new(2, 1);
        assert!(matches!(model.fire(&[0.0, 0.0]), Err(Error::Uninitialized)));
        assert!(matches!(model.infer(&[0.0, 0.0]), Err(Error::Uninitialized)));
    }

    #[test]
    fn infer_examples() {
        let mut model = FisModel::new(1, 1);
        model.push_rule(rule(vec![0.3], 0.2, &[&[3.0, 0.0]])).unwrap();
        assert_eq!(model.infer(&[7.0]).unwrap(), vec![3.0]);

        let mut model = FisModel::new(2, 1);
        for c in [0.0, 0.4, 0.9] {
            model.push_rule(rule(vec![c, c], 0.3, &[&[0.5, 2.0, -1.0]])).unwrap();
        }
        let u = [0.2, 0.7];
        let expected = 0.5 + 2.0 * 0.2 - 0.7;
        assert!((model.infer(&u).unwrap()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let mut model = FisModel::new(2, 1);
        model.push_rule(rule(vec![0.0, 0.0], 0.5, &[&[0.0, 0.0, 0.0]])).unwrap();
        assert!(matches!(model.infer(&[0.0]), Err(Error::Dimension { .. })));
        assert!(matches!(
            model.rls_update_global(&[0.0, 0.0], &[1.0, 2.0], 1.0),
            Err(Error::Dimension { .. })
        ));
        assert!(model.push_rule(rule(vec![0.0], 0.5, &[&[0.0, 0.0]])).is_err());
        assert!(matches!(
            model.ekf_update_nearest(3, &[0.0, 0.0], &[0.0], &EkfConfig::default()),
            Err(Error::InvalidIndex { .. })
        ));
    }

    #[test]
    fn global_rls_zero_innovation_keeps_consequents() {
        let mut model = FisModel::new(1, 1);
        model.push_rule(rule(vec![0.5], 0.3, &[&[1.0, 2.0]])).unwrap();
        model.init_global_covariance(DEFAULT_OMEGA);
        let before = model.clone();
        let v = model.infer(&[0.25]).unwrap();
        model.rls_update_global(&[0.25], &v, 1.0).unwrap();
        assert_eq!(model.rules[0].consequent, before.rules[0].consequent);
        let trace = |m: &FisModel| m.global_covariance.as_ref().unwrap().trace();
        assert!(trace(&model) < trace(&before));
    }

    #[test]
    fn single_rule_rls_recovers_line() {
        // v = 2u + 1; a large omega makes the prior's pull negligible
        let omega = 1e8;
        let mut model = FisModel::new(1, 1);
        model.push_rule(rule(vec![0.5], 0.3, &[&[0.0, 0.0]])).unwrap();
        model.init_global_covariance(omega);
        let mut local = model.rules[0].clone().with_covariance(DMatrix::identity(2, 2) * omega);
        let mut rows = Vec::new();
        for i in 0..50 {
            let u = i as f64 / 49.0;
            let v = 2.0 * u + 1.0;
            model.rls_update_global(&[u], &[v], 1.0).unwrap();
            local.rls_update_local(1.0, &[u], &[v], 1.0).unwrap();
            rows.push((vec![1.0, u], v, 1.0));
        }
        let oracle = batch_least_squares(&rows, &[0.0, 0.0], omega);
        for (c, target) in [1.0, 2.0].iter().enumerate() {
            assert!((model.rules[0].consequent[(0, c)] - target).abs() < 1e-6);
            assert!((local.consequent[(0, c)] - target).abs() < 1e-6);
            assert!((oracle[c] - target).abs() < 1e-6);
        }
    }

    #[test]
    fn local_rls_with_unit_weight_matches_global() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut model = FisModel::new(3, 2);
        model.push_rule(rule(vec![0.5; 3], 0.4, &[&[0.1, 0.0, 0.2, 0.0], &[0.0; 4]])).unwrap();
        model.init_global_covariance(DEFAULT_OMEGA);
        let mut local = model.rules[0].clone();
        for _ in 0..80 {
            let u: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            let v = vec![u[0] - u[2] + 0.3, u[1] * u[1]];
            model.rls_update_global(&u, &v, 1.0).unwrap();
            local.rls_update_local(1.0, &u, &v, 1.0).unwrap();
        }
        let diff = (&model.rules[0].consequent - &local.consequent).abs().max();
        assert!(diff < 1e-9, "diff {diff}");
    }

    #[test]
    fn local_rls_zero_weight_is_noop() {
        let mut r = rule(vec![0.5], 0.3, &[&[0.2, 0.4]]);
        r.rls_update_local(0.5, &[0.1], &[1.0], 1.0).unwrap();
        let before = r.clone();
        r.rls_update_local(0.0, &[0.9], &[5.0], 1.0).unwrap();
        assert_eq!(r, before);
    }

    #[test]
    fn global_rls_matches_weighted_batch_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut model = random_model(&mut rng, 3, 2, 1);
        // freeze antecedents; consequents start from zero
        for r in &mut model.rules {
            r.consequent.fill(0.0);
        }
        model.init_global_covariance(DEFAULT_OMEGA);
        let block = 3;
        let mut rows = Vec::new();
        for _ in 0..60 {
            let u: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..1.0)).collect();
            let v = (3.0 * u[0]).sin() + u[1];
            let f = model.fire(&u).unwrap();
            let x: Vec<f64> = f
                .normalized
                .iter()
                .flat_map(|w| [*w, w * u[0], w * u[1]])
                .collect();
            rows.push((x, v, 1.0));
            model.rls_update_global(&u, &[v], 1.0).unwrap();
        }
        let oracle = batch_least_squares(&rows, &vec![0.0; 3 * block], DEFAULT_OMEGA);
        for (i, r) in model.rules.iter().enumerate() {
            for c in 0..block {
                assert!((r.consequent[(0, c)] - oracle[i * block + c]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn ekf_zero_innovation_keeps_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model = random_model(&mut rng, 2, 2, 1);
        let u = [0.3, 0.6];
        let v = model.infer(&u).unwrap();
        let before = model.rules.clone();
        model.ekf_update_nearest(0, &u, &v, &EkfConfig::default()).unwrap();
        assert_eq!(model.rules[0].consequent, before[0].consequent);
        assert_eq!(model.rules[0].center, before[0].center);
        assert_eq!(model.rules[0].width, before[0].width);
        assert_eq!(model.rules[1], before[1]);
    }

    #[test]
    fn ekf_single_rule_error_decreases_monotonically() {
        let mut model = FisModel::new(2, 1);
        model.push_rule(rule(vec![0.2, 0.4], 0.5, &[&[0.0, 0.0, 0.0]])).unwrap();
        let (u, v) = ([0.7, 0.1], [0.9]);
        let cfg = EkfConfig::default();
        let mut last = f64::INFINITY;
        for _ in 0..20 {
            model.ekf_update_nearest(0, &u, &v, &cfg).unwrap();
            let err = (v[0] - model.infer(&u).unwrap()[0]).abs();
            assert!(err < last, "{err} !< {last}");
            last = err;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn ekf_keeps_widths_above_floor_and_covariance_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut model = random_model(&mut rng, 3, 3, 2);
        let cfg = EkfConfig { width_floor: 0.05, ..Default::default() };
        for _ in 0..300 {
            let u: Vec<f64> = (0..3).map(|_| rng.random_range(-0.5..1.5)).collect();
            let v = vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let i = model.nearest_rule(&u).unwrap().0;
            model.ekf_update_nearest(i, &u, &v, &cfg).unwrap();
        }
        for r in &model.rules {
            assert!(r.width.iter().all(|w| *w >= 0.05));
            if let Some(p) = &r.covariance {
                assert!((p - p.transpose()).abs().max() <= 1e-10);
            }
        }
    }

    #[test]
    fn consequent_only_ekf_leaves_antecedents() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut model = random_model(&mut rng, 2, 2, 1);
        let cfg = EkfConfig { consequent_only: true, ..Default::default() };
        let before = model.rules[1].clone();
        model.ekf_update_nearest(1, &[0.1, 0.9], &[2.0], &cfg).unwrap();
        assert_eq!(model.rules[1].center, before.center);
        assert_eq!(model.rules[1].width, before.width);
        assert_ne!(model.rules[1].consequent, before.consequent);
        assert_eq!(model.rules[1].covariance.as_ref().unwrap().nrows(), 3);
    }

    #[test]
    fn remove_rule_shrinks_global_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model = random_model(&mut rng, 3, 2, 1);
        model.init_global_covariance(10.0);
        model.global_covariance.as_mut().unwrap()[(3, 3)] = 7.0;
        model.remove_rule(0).unwrap();
        let p = model.global_covariance.as_ref().unwrap();
        assert_eq!(p.nrows(), 6);
        assert_eq!(p[(0, 0)], 7.0);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = random_model(&mut rng, 3, 4, 2);
        model.rules[1].covariance = Some(DMatrix::from_fn(3, 3, |i, j| 1.0 / (1.0 + i as f64 + j as f64)));
        model.init_global_covariance(DEFAULT_OMEGA);
        let text = model.to_json().unwrap();
        let back = FisModel::from_json(&text).unwrap();
        assert_eq!(back, model);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["rules"][0]["consequent"].as_array().unwrap().len(), 2);
        assert!(value["rules"][0].get("covariance").is_none());
    }

    proptest! {
        #[test]
        fn normalized_firing_sums_to_one(
            seed in 0u64..1000,
            rules in 1usize..6,
            u in prop::collection::vec(-2.0f64..3.0, 3),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = random_model(&mut rng, rules, 3, 2);
            let f = model.fire(&u).unwrap();
            prop_assert!((f.normalized.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(f.raw.iter().all(|r| *r > 0.0 && *r <= 1.0));

            // convex combination of rule outputs
            let y = model.infer_with(&u, &f);
            for o in 0..2 {
                let outs: Vec<f64> = model.rules.iter().map(|r| r.output(&u)[o]).collect();
                let lo = outs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = outs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(y[o] >= lo - 1e-12 && y[o] <= hi + 1e-12);
            }
        }

        #[test]
        fn json_round_trip_any_model(seed in 0u64..500, rules in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = random_model(&mut rng, rules, 2, 3);
            let back = FisModel::from_json(&model.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, model);
        }
    }
}
