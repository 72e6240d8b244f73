use proptest::prelude::*;
use smc_core::explore::{run_babble, split_episodes, BabbleConfig, Policy};
use smc_core::rng::Streams;
use smc_core::worlds::{WallWorld, WallWorldConfig};

fn babble(steps: usize, seed: u64) -> smc_core::explore::ExplorationLog {
    let cfg = WallWorldConfig::default();
    let mut world = WallWorld::new(cfg, &mut Streams::new(seed).stream("world")).unwrap();
    let babble = BabbleConfig {
        steps,
        policy: Policy::UniformMotorState,
        seed,
    };
    run_babble(&mut world, &babble, 0).unwrap()
}

#[test]
fn motor_states_are_visited_uniformly() {
    let n = 200_000;
    let log = babble(n, 11);
    let mut hits = [0u64; 40];
    for obs in &log.observations {
        hits[obs.motor.0] += 1;
    }
    let p = 1.0 / 40.0;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    for (m, &h) in hits.iter().enumerate() {
        let f = h as f64 / n as f64;
        assert!((f - p).abs() <= 3.0 * sigma, "motor state {m}: {f}");
    }
}

#[test]
fn every_step_but_the_first_is_a_transition() {
    let log = babble(500, 2);
    assert_eq!(log.len(), 500);
    assert_eq!(log.transitions.len() + log.clamped_steps.len(), 499);
    assert!(log.transitions.iter().all(|t| t.to == t.from + 1));
}

#[test]
fn same_seed_same_log() {
    let a = babble(1000, 5);
    let b = babble(1000, 5);
    assert_eq!(a.to_csv(true), b.to_csv(true));
}

#[test]
fn csv_hides_truth_unless_asked() {
    let log = babble(10, 1);
    assert!(!log.to_csv(false).contains("truth"));
    let with = log.to_csv(true);
    assert!(with
        .lines()
        .next()
        .unwrap()
        .ends_with("truth_kind,truth_id"));
    assert_eq!(with.lines().count(), 11);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn splitting_preserves_counts(steps in 10usize..300, cuts in prop::collection::btree_set(1usize..299, 0..6), seed in 0u64..50) {
        let log = babble(steps, seed);
        let boundaries: Vec<usize> = cuts.into_iter().filter(|&c| c < steps).collect();
        let parts = split_episodes(&log, &boundaries).unwrap();
        prop_assert_eq!(parts.len(), boundaries.len() + 1);
        prop_assert_eq!(parts.iter().map(|p| p.len()).sum::<usize>(), log.len());
        let crossing = log
            .transitions
            .iter()
            .filter(|t| boundaries.iter().any(|&b| t.from < b && b <= t.to))
            .count();
        let kept: usize = parts.iter().map(|p| p.transitions.len()).sum();
        prop_assert_eq!(kept, log.transitions.len() - crossing);
        for p in &parts {
            prop_assert!(p.transitions.iter().all(|t| t.to < p.len()));
        }
    }
}

#[test]
fn invalid_boundaries_are_rejected() {
    let log = babble(20, 0);
    assert!(split_episodes(&log, &[5, 5]).is_err());
    assert!(split_episodes(&log, &[0]).is_err());
    assert!(split_episodes(&log, &[20]).is_err());
}
