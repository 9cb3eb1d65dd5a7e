use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use evofis::ets::{EtsConfig, EtsLearner, UpdateMode};
use evofis::mcfis::{McfisConfig, McfisLearner, McfisState};
use evofis::safis::{SafisConfig, SafisLearner};
use evofis::timeseries::RegressorPair;
use evofis::OnlineLearner;

fn learners(input_dim: usize, output_dim: usize) -> Vec<Box<dyn OnlineLearner>> {
    vec![
        Box::new(EtsLearner::new(EtsConfig::default(), output_dim)),
        Box::new(EtsLearner::new(
            EtsConfig { update_mode: UpdateMode::GlobalRls, ..Default::default() },
            output_dim,
        )),
        Box::new(SafisLearner::new(SafisConfig::default(), output_dim)),
        Box::new(McfisLearner::new(McfisConfig::default(), input_dim, output_dim).unwrap()),
    ]
}

fn stream(seed: u64, n: usize, input_dim: usize, output_dim: usize) -> Vec<RegressorPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let u: Vec<f64> = (0..input_dim).map(|_| rng.random_range(0.0..1.0)).collect();
            let s: f64 = u.iter().sum();
            let v = (0..output_dim).map(|o| (s + o as f64 * 0.3).sin().abs()).collect();
            RegressorPair { u, v, origin_index: i }
        })
        .collect()
}

#[test]
fn predictions_never_see_the_current_target() {
    for learner_index in 0..4 {
        let mut a = learners(3, 2).remove(learner_index);
        let mut b = learners(3, 2).remove(learner_index);
        for pair in stream(1, 120, 3, 2) {
            let pa = a.step(&pair).unwrap();
            let altered = RegressorPair { v: vec![42.0, -42.0], ..pair.clone() };
            let pb = b.predict(&altered.u).unwrap();
            assert_eq!(pa, pb, "{}", a.name());
            // keep the twin in lockstep
            b.step(&pair).unwrap();
        }
    }
}

#[test]
fn learners_are_deterministic() {
    for i in 0..4 {
        let run = || {
            let mut l = learners(2, 1).remove(i);
            let preds: Vec<Vec<f64>> = stream(9, 200, 2, 1).iter().map(|p| l.step(p).unwrap()).collect();
            (preds, l.state_json().unwrap())
        };
        assert_eq!(run(), run());
    }
}

#[test]
fn every_learner_keeps_a_rule_and_finite_outputs() {
    for mut l in learners(4, 3) {
        for p in stream(4, 300, 4, 3) {
            let y = l.step(&p).unwrap();
            assert!(y.iter().all(|x| x.is_finite()), "{}", l.name());
        }
        l.finish_training().unwrap();
        assert!(l.rule_count() >= 1, "{}", l.name());
    }
}

#[test]
fn empty_learners_predict_zeros() {
    for l in learners(2, 2) {
        let y = l.predict(&[0.1, 0.2]).unwrap();
        assert_eq!(y, vec![0.0, 0.0], "{}", l.name());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mcfis_conserves_samples_and_threshold_order(seed in 0u64..1000, n in 1usize..300) {
        let mut s = McfisState::new(&McfisConfig::default(), 2, 1).unwrap();
        for p in stream(seed, n, 2, 1) {
            s.step(&p).unwrap();
            prop_assert!(s.config.e_delete < s.e_learn && s.e_learn <= s.e_add);
        }
        let c = s.counts;
        prop_assert_eq!(c.presented, n);
        prop_assert_eq!(c.deleted + c.grown + c.updated + c.reserved, c.presented);
        let queued = s.reserve_queue.len();
        prop_assert_eq!(queued, c.reserved);
        s.drain_reserve().unwrap();
        prop_assert!(s.reserve_queue.len() <= queued);
    }
}
