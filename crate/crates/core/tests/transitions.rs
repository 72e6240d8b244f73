use proptest::prelude::*;
use smc_core::transitions::{normalize, normalize_blocked};
use smc_core::{ProbabilityMatrix, TransitionCounts};

fn counts_strategy() -> impl Strategy<Value = TransitionCounts> {
    (1usize..6, 1usize..6, 1usize..4).prop_flat_map(|(n_from, n_to, n_cmd)| {
        prop::collection::vec(0u64..4, n_from * n_to * n_cmd).prop_map(move |cells| {
            let mut c = TransitionCounts::new(n_from, n_to, n_cmd);
            let mut it = cells.into_iter();
            for cmd in 0..n_cmd {
                for from in 0..n_from {
                    for to in 0..n_to {
                        c.add(from, to, cmd, it.next().unwrap()).unwrap();
                    }
                }
            }
            c
        })
    })
}

proptest! {
    #[test]
    fn observed_rows_sum_to_one_and_masked_rows_are_zero(c in counts_strategy()) {
        let t = normalize(&c);
        let (n_from, _, n_cmd) = c.shape();
        for cmd in 0..n_cmd {
            for from in 0..n_from {
                let sum: f64 = t.row(from, cmd).iter().sum();
                if c.row_total(from, cmd) > 0 {
                    prop_assert!(t.is_observed(from, cmd));
                    prop_assert!((sum - 1.0).abs() < 1e-12);
                } else {
                    prop_assert!(!t.is_observed(from, cmd));
                    prop_assert!(t.row(from, cmd).iter().all(|&p| p == 0.0));
                }
            }
        }
    }

    #[test]
    fn probabilities_are_count_ratios(c in counts_strategy()) {
        let t = normalize(&c);
        let (n_from, n_to, n_cmd) = c.shape();
        for cmd in 0..n_cmd {
            for from in 0..n_from {
                let total = c.row_total(from, cmd);
                for to in 0..n_to {
                    if total > 0 {
                        prop_assert_eq!(t.get(from, to, cmd), c.get(from, to, cmd) as f64 / total as f64);
                    }
                }
            }
        }
    }

    #[test]
    fn scaling_counts_leaves_probabilities(c in counts_strategy(), f in 1u64..20) {
        prop_assert_eq!(normalize(&c), normalize(&c.scaled(f)));
    }

    #[test]
    fn merging_is_commutative(a in counts_strategy(), seed in 0u64..1000) {
        let mut b = a.scaled(seed % 3 + 1);
        b.add(0, 0, 0, seed).unwrap();
        let mut ab = a.clone();
        ab.merge(&b).unwrap();
        let mut ba = b.clone();
        ba.merge(&a).unwrap();
        prop_assert_eq!(&ab, &ba);
        prop_assert_eq!(ab.total(), a.total() + b.total());
    }

    #[test]
    fn count_csv_round_trips(c in counts_strategy()) {
        let texts: Vec<String> = c.to_csv_slices("counts").into_iter().map(|(_, t)| t).collect();
        prop_assert_eq!(TransitionCounts::from_csv_slices(&texts).unwrap(), c);
    }

    #[test]
    fn probability_csv_round_trips(c in counts_strategy()) {
        let t = normalize(&c);
        let texts: Vec<String> = t.to_csv_slices("T").into_iter().map(|(_, t)| t).collect();
        let back = ProbabilityMatrix::from_csv_slices(&texts, t.shape().1).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn blocks_normalize_independently(cells in prop::collection::vec(0u64..5, 12)) {
        // two source states, six destinations in blocks of three
        let mut c = TransitionCounts::new(2, 6, 1);
        for (i, &n) in cells.iter().enumerate() {
            c.add(i / 6, i % 6, 0, n).unwrap();
        }
        let t = normalize_blocked(&c, 3).unwrap();
        for from in 0..2 {
            for block in t.row(from, 0).chunks(3).zip(c.row(from, 0).chunks(3)) {
                let total: u64 = block.1.iter().sum();
                let sum: f64 = block.0.iter().sum();
                if total > 0 {
                    prop_assert!((sum - 1.0).abs() < 1e-12);
                } else {
                    prop_assert_eq!(sum, 0.0);
                }
            }
        }
    }
}

#[test]
fn blocked_normalization_rejects_uneven_blocks() {
    assert!(normalize_blocked(&TransitionCounts::new(2, 6, 1), 4).is_err());
}

#[test]
fn out_of_range_indices_are_rejected() {
    let mut c = TransitionCounts::square(3);
    assert!(c.record(3, 0, 0).is_err());
    assert!(c.record(0, 0, 1).is_err());
    assert_eq!(c.total(), 0);
}
