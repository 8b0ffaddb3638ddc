use proptest::prelude::*;

use xchan::analyzer::{csit_fractions, dof_report};
use xchan::simulate::{simulate, Instance, SimOptions};
use xchan::{build_csit_table, build_schedule, permute_schedule, CsitState, Schedule};

fn shuffled(len: usize, keys: &[u64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.sort_by_key(|&i| (keys[i % keys.len()].rotate_left(i as u32), i));
    idx
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noiseless_pipeline_recovers_every_message(m in 1usize..7, n in 2usize..7, seed in any::<u64>()) {
        let rep = simulate(m, n, seed, SimOptions::default()).unwrap().report();
        prop_assert_eq!(rep.forbidden_csit_reads, 0);
        for r in rep.receivers {
            prop_assert!(r.diagnostics.success);
            prop_assert_eq!(r.diagnostics.rank, build_schedule(m, n).unwrap().k * m);
            prop_assert!(r.relative_error.unwrap() < 1e-8);
        }
    }

    #[test]
    fn schedule_invariants(m in 1usize..12, n in 2usize..12) {
        let s = build_schedule(m, n).unwrap();
        let d = dof_report(&s);
        prop_assert!(d.equal);
        prop_assert_eq!(s.phase1_len(), s.k * n);
        prop_assert_eq!(2 * s.phase2_len(), s.k * n * (m - 1));
        let t = build_csit_table(&s);
        let f = csit_fractions(&t);
        for i in 0..n {
            prop_assert_eq!(f.per_receiver[i].total(), num_rational::Ratio::from_integer(1));
        }
        // Each phase-2 column has exactly two P entries on distinct receivers.
        for slot in s.phase1_len()..s.total_slots {
            let p = (0..n).filter(|&i| t.state(i, slot) == CsitState::P).count();
            prop_assert_eq!(p, 2);
        }
        let back: Schedule = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn permuted_schedules_decode_identically(
        (m, n) in prop_oneof![Just((3usize, 3usize)), Just((4, 4)), Just((2, 4)), Just((4, 3))],
        keys in proptest::collection::vec(any::<u64>(), 1..8),
        seed in 0u64..1000,
    ) {
        let s = build_schedule(m, n).unwrap();
        let p = permute_schedule(&s, &shuffled(s.phase1_len(), &keys), &shuffled(s.phase2_len(), &keys)).unwrap();
        let a = Instance::run(&s, seed, SimOptions::default()).unwrap();
        let b = Instance::run(&p, seed, SimOptions::default()).unwrap();
        prop_assert_eq!(b.audit.forbidden_reads(&b.table), 0);
        for (x, y) in a.decode_all().into_iter().zip(b.decode_all()) {
            let (x, y) = (x.estimate.unwrap(), y.estimate.unwrap());
            prop_assert!((&x - &y).norm() <= 1e-8 * x.norm());
        }
    }
}

#[test]
fn noisy_error_shrinks_with_power() {
    let err = |power: f64| {
        let opts = SimOptions { noise: true, normalize: true, symbol_power: power };
        (0..20)
            .map(|seed| {
                let rep = simulate(3, 3, seed, opts).unwrap().report();
                rep.receivers.iter().map(|r| r.relative_error.unwrap()).sum::<f64>()
            })
            .sum::<f64>()
    };
    let (lo, hi) = (err(1e4), err(1e8));
    // Error amplitude scales as P^-1/2: four decades of power, two of error.
    assert!(hi < lo / 50.0, "{lo} vs {hi}");
}

#[test]
fn normalization_keeps_decoding_exact() {
    for (m, n) in [(3, 3), (4, 3), (2, 5), (5, 2)] {
        let opts = SimOptions { normalize: true, ..SimOptions::default() };
        let rep = simulate(m, n, 9, opts).unwrap().report();
        assert!(rep.receivers.iter().all(|r| r.relative_error.unwrap() < 1e-8), "({m},{n})");
    }
}
