use proptest::prelude::*;
use vecoffload_core::env::{build_schedule, Environment, ScenarioConfig, ScenarioKind};
use vecoffload_core::metrics::{regret_trace, MeanEstimator};
use vecoffload_core::policy::{build_policy, NormalizationThresholds, PolicyKind, PolicyParams};

fn params(seed: u64) -> PolicyParams {
    PolicyParams {
        beta0: 0.5,
        thresholds: NormalizationThresholds::new(0.24e6, 0.24e6).unwrap(),
        zero_occurrence: false,
        seed,
        means: None,
    }
}

fn run(config: &ScenarioConfig, kind: PolicyKind, seed: u64) -> Vec<vecoffload_core::env::Observation> {
    let mut p = build_policy(kind, &params(seed)).unwrap();
    Environment::from_config(config.clone(), seed).unwrap().run(p.as_mut()).unwrap()
}

fn short_synthetic() -> ScenarioConfig {
    let mut c = ScenarioConfig::synthetic_table1();
    c.horizon = 1500;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn same_seed_same_run(seed in any::<u64>()) {
        let c = short_synthetic();
        prop_assert_eq!(run(&c, PolicyKind::Alto, seed), run(&c, PolicyKind::Alto, seed));
        prop_assert_eq!(run(&c, PolicyKind::Random, seed), run(&c, PolicyKind::Random, seed));
    }

    /// Every policy faces the same inputs and the same per-arm delays.
    #[test]
    fn environment_draws_do_not_depend_on_the_policy(seed in any::<u64>()) {
        let c = short_synthetic();
        let a = run(&c, PolicyKind::Ucb, seed);
        let b = run(&c, PolicyKind::Random, seed);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.input_bits, y.input_bits);
            prop_assert_eq!(&x.truths, &y.truths);
            prop_assert_eq!(x.d_sum, x.input_bits * x.true_bit_delay(x.chosen).unwrap());
        }
    }

    #[test]
    fn bernoulli_epochs_partition_the_horizon(seed in any::<u64>(), horizon in 1u32..4000) {
        let mut c = ScenarioConfig::builtin("bernoulli-arrivals").unwrap();
        c.horizon = horizon;
        let s = build_schedule(&c, seed).unwrap();
        let epochs = s.epochs();
        prop_assert_eq!(epochs[0].start, 1);
        prop_assert_eq!(epochs.last().unwrap().end, horizon);
        for w in epochs.windows(2) {
            prop_assert_eq!(w[0].end + 1, w[1].start);
            prop_assert_ne!(&w[0].members, &w[1].members);
        }
        for t in 1..=horizon {
            let cands = s.candidate_set(t).unwrap();
            prop_assert!(!cands.is_empty());
            prop_assert!(cands.windows(2).all(|w| w[0] < w[1]));
        }
    }
}

#[test]
fn synthetic_schedule_has_three_epochs() {
    let s = build_schedule(&ScenarioConfig::synthetic_table1(), 0).unwrap();
    let members: Vec<Vec<u32>> = s.epochs().iter().map(|e| e.members.iter().map(|a| a.0).collect()).collect();
    assert_eq!(members, vec![vec![1, 2, 3, 4, 5], vec![1, 2, 3, 4, 6, 7], vec![2, 3, 4, 7, 8]]);
    assert!(matches!(ScenarioConfig::synthetic_table1().kind, ScenarioKind::SyntheticTable1));
}

/// The oracle policy pulls the per-epoch optimum, so its regret only
/// carries the noise of the realized delays.
#[test]
fn oracle_tracks_the_epoch_optimum() {
    let c = ScenarioConfig::synthetic_table1();
    let schedule = build_schedule(&c, 0).unwrap();
    let mut est = MeanEstimator::new(&c, 50_000, 9).unwrap().with_walk_steps(200_000);
    let oracles = est.epoch_oracles(&schedule).unwrap();
    let means = est.arm_means(&schedule).unwrap();
    let mut p = build_policy(
        PolicyKind::Oracle,
        &PolicyParams {
            means: Some(means),
            ..params(0)
        },
    )
    .unwrap();
    let obs = Environment::new(c, schedule, 4).unwrap().run(p.as_mut()).unwrap();
    for o in &obs {
        assert_eq!(o.chosen, oracles[o.epoch].optimal_arm);
    }
    let trace = regret_trace(&obs, &oracles).unwrap();
    let total: f64 = obs.iter().map(|o| o.d_sum).sum();
    assert!(trace.final_regret().abs() < 0.02 * total, "{}", trace.final_regret());
}
