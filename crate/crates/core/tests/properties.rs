use std::sync::Arc;

use proptest::prelude::*;

use infera_core::anytime::{AnytimeEngine, LogicSampler};
use infera_core::exact;
use infera_core::network::{parse_network, serialize_network};
use infera_core::problems;
use infera_core::value::{treatment_threshold, UtilityTable};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Canonical serialization is a fixed point: parse(serialize(net))
    // serializes to the same bytes.
    #[test]
    fn serialization_round_trips(seed in 0u64..10_000, n in 2usize..9) {
        let net = problems::random_network(n, 3, seed);
        let text = serialize_network(&net);
        let again = parse_network(&text).unwrap();
        prop_assert_eq!(serialize_network(&again), text);
    }

    // Variable elimination agrees with brute-force enumeration wherever the
    // evidence is consistent.
    #[test]
    fn elimination_matches_enumeration(seed in 0u64..10_000, n in 2usize..10) {
        let p = problems::random_problem(n, 3, seed);
        if let Ok(brute) = exact::joint_enumeration(&p.net, &p.evidence, &p.query) {
            let ve = exact::variable_elimination(&p.net, &p.evidence, &p.query).unwrap();
            prop_assert!((ve.probability - brute.probability).abs() < 1e-9);
        }
    }

    // step(a); step(b) is indistinguishable from step(a + b).
    #[test]
    fn sampler_steps_compose(seed in 0u64..1_000, a in 0u64..200, b in 0u64..200) {
        let p = problems::random_problem(5, 2, seed);
        let mut split = LogicSampler::new(p.net.clone(), &p.evidence, &p.query, seed).unwrap();
        split.step(a);
        split.step(b);
        let mut whole = LogicSampler::new(Arc::clone(&p.net), &p.evidence, &p.query, seed).unwrap();
        whole.step(a + b);
        prop_assert_eq!(split.estimate(), whole.estimate());
    }

    // For any utility table with the required ordering, the threshold is a
    // proper probability and marks the expected-utility crossover.
    #[test]
    fn threshold_is_interior_crossover(
        tc in 0.1f64..100.0, nc in -100.0f64..0.0,
        nn in 0.1f64..100.0, tn in -100.0f64..0.0,
    ) {
        let u = UtilityTable { treat_cond: tc, treat_nocond: tn, notreat_cond: nc, notreat_nocond: nn };
        let p_star = treatment_threshold(&u).unwrap();
        prop_assert!(p_star > 0.0 && p_star < 1.0);
        let eu_treat = |p: f64| p * tc + (1.0 - p) * tn;
        let eu_wait = |p: f64| p * nc + (1.0 - p) * nn;
        prop_assert!((eu_treat(p_star) - eu_wait(p_star)).abs() < 1e-6 * (tc - nc).abs().max(1.0));
        prop_assert!(eu_treat((p_star + 1e-4).min(1.0)) >= eu_wait((p_star + 1e-4).min(1.0)));
        prop_assert!(eu_treat((p_star - 1e-4).max(0.0)) <= eu_wait((p_star - 1e-4).max(0.0)));
    }
}
