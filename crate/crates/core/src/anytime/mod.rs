//! Interruptible inference strategies sharing one step/estimate contract.
//!
//! Every engine advances in discrete deterministic steps and can report an
//! [`Estimate`] between any two steps without disturbing the computation.
//! One step means: sampler — one full weighted sample; bound propagator —
//! one complete-instantiation expansion; completeness modulator — one rung;
//! default policy — one lookup. Converting steps to seconds is the job of
//! calibration profiles, not of the engines.

mod bounds;
mod default_policy;
mod modulator;
mod sampler;

pub use bounds::BoundPropagator;
pub use default_policy::{DefaultPolicyEngine, DefaultPolicyEntry, DefaultPolicyTable};
pub use modulator::{prune_network, CompletenessModulator};
pub use sampler::LogicSampler;

use thiserror::Error;

use crate::network::NetworkError;

#[derive(Debug, Error)]
pub enum AnytimeError {
    #[error("unknown context key `{0}`")]
    UnknownContextKey(String),
    #[error("importance ladder must be strictly descending, got {0:?}")]
    LadderNotDescending(Vec<f64>),
    #[error("importance ladder must end at 0 (the full model), got {0:?}")]
    LadderFinalRung(Vec<f64>),
    #[error("ladder value {0} outside [0, 1]")]
    LadderRange(f64),
    #[error(transparent)]
    Network(#[from] Box<NetworkError>),
    #[error(transparent)]
    Inference(#[from] Box<crate::exact::InferenceError>),
}

impl From<NetworkError> for AnytimeError {
    fn from(e: NetworkError) -> Self {
        AnytimeError::Network(Box::new(e))
    }
}

impl From<crate::exact::InferenceError> for AnytimeError {
    fn from(e: crate::exact::InferenceError) -> Self {
        AnytimeError::Inference(Box::new(e))
    }
}

/// A partial result: point estimate, credible interval and the steps it took.
///
/// `well_founded` distinguishes approximation strategies, whose interval is a
/// guarantee (logical for bounds, statistical for sampling), from heuristic
/// strategies whose interval comes only from calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
    pub support: u64,
    pub well_founded: bool,
}

impl Estimate {
    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn precision(&self) -> f64 {
        1.0 - self.width()
    }

    /// A fully uninformative estimate.
    pub fn vacuous(well_founded: bool) -> Estimate {
        Estimate {
            mean: 0.5,
            low: 0.0,
            high: 1.0,
            support: 0,
            well_founded,
        }
    }
}

/// The shared contract for interruptible strategies.
///
/// Stepping is deterministic given the construction seed; `step(a)` followed
/// by `step(b)` is equivalent to `step(a + b)`; stepping a completed engine
/// is a no-op.
pub trait AnytimeEngine {
    fn strategy_id(&self) -> &str;

    /// Advances exactly `n` steps, or to completion for finite engines.
    fn step(&mut self, n: u64);

    /// Non-destructive read of the current estimate.
    fn estimate(&self) -> Estimate;

    /// True once further steps cannot change the estimate.
    fn is_complete(&self) -> bool;
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::exact;
    use crate::network::{parse_network, Evidence, Query};
    use crate::problems;

    fn chain() -> Arc<crate::network::Network> {
        Arc::new(problems::chain_network())
    }

    #[test]
    fn sampler_degenerate_distribution() {
        let net = parse_network(
            r#"{
            "variables": [{"id": "B", "states": ["t", "f"]}],
            "chance": [{"id": "B", "parents": [], "cpt": [1.0, 0.0]}]
        }"#,
        )
        .unwrap();
        let mut s =
            LogicSampler::new(Arc::new(net), &Evidence::empty(), &Query::new("B", "t"), 1).unwrap();
        s.step(1);
        let e = s.estimate();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.width(), 0.0);
        assert_eq!(e.support, 1);
    }

    #[test]
    fn sampler_fresh_estimate_is_vacuous() {
        let s = LogicSampler::new(chain(), &Evidence::empty(), &Query::new("B", "t"), 7).unwrap();
        let e = s.estimate();
        assert_eq!((e.low, e.high), (0.0, 1.0));
        assert_eq!(e.precision(), 0.0);
    }

    #[test]
    fn sampler_fair_coin_half_width() {
        // Binomial formula: 1.96 * sqrt(0.25 / 10000) = 0.0098.
        let net = Arc::new(problems::fair_coin_network());
        let mut s = LogicSampler::new(net, &Evidence::empty(), &Query::new("C", "t"), 42).unwrap();
        s.step(10_000);
        let e = s.estimate();
        let half = (e.high - e.low) / 2.0;
        assert!((half - 0.0098).abs() < 1e-4, "half-width {half}");
    }

    #[test]
    fn sampler_converges_on_chain_posterior() {
        let net = chain();
        let ev = Evidence::new([("B", "t")]).unwrap();
        let q = Query::new("A", "t");
        let oracle = exact::joint_enumeration(&net, &ev, &q).unwrap().probability;
        let mut s = LogicSampler::new(net, &ev, &q, 3).unwrap();
        s.step(100_000);
        assert!((s.estimate().mean - oracle).abs() < 0.02);
    }

    #[test]
    fn sampler_deterministic_given_seed() {
        let run = |seed| {
            let mut s =
                LogicSampler::new(chain(), &Evidence::new([("B", "t")]).unwrap(), &Query::new("A", "t"), seed)
                    .unwrap();
            s.step(5000);
            s.estimate().mean
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn bounds_zero_steps_vacuous() {
        let b = BoundPropagator::new(chain(), &Evidence::empty(), &Query::new("B", "t")).unwrap();
        let e = b.estimate();
        assert_eq!((e.low, e.high), (0.0, 1.0));
        assert_eq!(e.precision(), 0.0);
        assert!(e.well_founded);
    }

    #[test]
    fn bounds_full_enumeration_collapses_to_oracle() {
        let net = chain();
        let ev = Evidence::new([("B", "t")]).unwrap();
        let q = Query::new("A", "t");
        let oracle = exact::joint_enumeration(&net, &ev, &q).unwrap().probability;
        let mut b = BoundPropagator::new(net, &ev, &q).unwrap();
        b.step(1000);
        assert!(b.is_complete());
        let e = b.estimate();
        assert!(e.width() < 1e-9);
        assert!((e.mean - oracle).abs() < 1e-9);
        // Stepping a completed engine is a no-op.
        let before = e;
        b.step(10);
        assert_eq!(b.estimate(), before);
    }

    #[test]
    fn bounds_mid_run_interval_is_proper() {
        let net = Arc::new(problems::calibration_network());
        let ev = Evidence::new([("n5", "t")]).unwrap();
        let q = Query::new("n0", "t");
        let mut b = BoundPropagator::new(net, &ev, &q).unwrap();
        b.step(5);
        let e = b.estimate();
        assert!(e.width() > 0.0 && e.width() < 1.0);
        assert!(e.low <= e.mean && e.mean <= e.high);
    }

    #[test]
    fn bounds_contain_oracle_and_tighten() {
        for seed in 0..10 {
            let p = problems::random_problem(6, 2, 4000 + seed);
            let oracle = match exact::joint_enumeration(&p.net, &p.evidence, &p.query) {
                Ok(post) => post.probability,
                Err(_) => continue,
            };
            let mut b = BoundPropagator::new(p.net.clone(), &p.evidence, &p.query).unwrap();
            let mut prev_width = f64::INFINITY;
            while !b.is_complete() {
                b.step(1);
                let e = b.estimate();
                assert!(e.low <= oracle + 1e-12 && oracle <= e.high + 1e-12, "seed {seed}");
                assert!(e.width() <= prev_width + 1e-12);
                prev_width = e.width();
            }
        }
    }

    #[test]
    fn modulator_single_rung_is_exact() {
        let net = chain();
        let ev = Evidence::new([("B", "t")]).unwrap();
        let q = Query::new("A", "t");
        let exact_p = exact::variable_elimination(&net, &ev, &q).unwrap().probability;
        let mut m = CompletenessModulator::new(net, &ev, &q, &[0.0]).unwrap();
        m.step(1);
        assert!(m.is_complete());
        assert_eq!(m.estimate().mean, exact_p);
        assert!(!m.estimate().well_founded);
    }

    #[test]
    fn modulator_threshold_below_all_weights_prunes_nothing() {
        let net = Arc::new(problems::diamond_network(1.0));
        let ev = Evidence::new([("S1", "t"), ("S2", "t")]).unwrap();
        let q = Query::new("D", "t");
        let exact_p = exact::variable_elimination(&net, &ev, &q).unwrap().probability;
        let mut m = CompletenessModulator::new(net, &ev, &q, &[0.5, 0.0]).unwrap();
        m.step(1);
        assert!((m.estimate().mean - exact_p).abs() < 1e-12);
        m.step(1);
        assert!((m.estimate().mean - exact_p).abs() < 1e-12);
    }

    #[test]
    fn modulator_prunes_low_importance_arc_then_recovers() {
        let net = Arc::new(problems::diamond_network(0.2));
        let ev = Evidence::new([("S1", "t"), ("S2", "t")]).unwrap();
        let q = Query::new("D", "t");
        let oracle = exact::joint_enumeration(&net, &ev, &q).unwrap().probability;
        let mut m = CompletenessModulator::new(net.clone(), &ev, &q, &[0.5, 0.0]).unwrap();
        m.step(1);
        let rung1 = m.estimate().mean;
        // Rung 1 ran on the pruned net; compare to the oracle on that net.
        let pruned = prune_network(&net, 0.5).unwrap();
        let pruned_exact = exact::variable_elimination(&pruned, &ev, &q).unwrap().probability;
        assert!((rung1 - pruned_exact).abs() < 1e-12);
        assert!((rung1 - oracle).abs() > 1e-6, "pruning must actually bias the posterior");
        m.step(1);
        assert!((m.estimate().mean - oracle).abs() < 1e-9, "final rung is exact");
    }

    #[test]
    fn modulator_pruned_rows_still_normalize() {
        let net = problems::diamond_network(0.2);
        let pruned = prune_network(&net, 0.5).unwrap();
        assert!(pruned.validate().is_empty());
    }

    #[test]
    fn modulator_ladder_validation() {
        let net = chain();
        let ev = Evidence::empty();
        let q = Query::new("B", "t");
        assert!(matches!(
            CompletenessModulator::new(net.clone(), &ev, &q, &[0.2, 0.5, 0.0]),
            Err(AnytimeError::LadderNotDescending(_))
        ));
        assert!(matches!(
            CompletenessModulator::new(net, &ev, &q, &[0.5, 0.2]),
            Err(AnytimeError::LadderFinalRung(_))
        ));
    }

    fn policy_table() -> DefaultPolicyTable {
        DefaultPolicyTable::new([DefaultPolicyEntry {
            context_key: "resp-critical".into(),
            action: "treat".into(),
            precision: 0.15,
            availability_steps: 1,
        }])
    }

    #[test]
    fn default_policy_availability() {
        let mut d = DefaultPolicyEngine::new(&policy_table(), "resp-critical").unwrap();
        assert_eq!(d.estimate().precision(), 0.0);
        assert!(d.recommended_action().is_none());
        d.step(1);
        assert!((d.estimate().precision() - 0.15).abs() < 1e-12);
        assert_eq!(d.recommended_action(), Some("treat"));
    }

    #[test]
    fn default_policy_never_refines() {
        let mut a = DefaultPolicyEngine::new(&policy_table(), "resp-critical").unwrap();
        let mut b = DefaultPolicyEngine::new(&policy_table(), "resp-critical").unwrap();
        a.step(1);
        b.step(1000);
        assert_eq!(a.estimate(), b.estimate());
    }

    #[test]
    fn default_policy_unknown_key() {
        assert!(matches!(
            DefaultPolicyEngine::new(&policy_table(), "nope"),
            Err(AnytimeError::UnknownContextKey(_))
        ));
    }

    #[test]
    fn policy_table_round_trips_through_json() {
        let table = policy_table();
        let again = DefaultPolicyTable::from_json(&table.to_json()).unwrap();
        assert_eq!(table, again);
    }

    // step(a) then step(b) must equal step(a + b) for every engine.
    #[test]
    fn step_composition_law() {
        let net = chain();
        let ev = Evidence::new([("B", "t")]).unwrap();
        let q = Query::new("A", "t");
        let make: Vec<(&str, Box<dyn Fn() -> Box<dyn AnytimeEngine>>)> = vec![
            ("sample", {
                let (net, ev, q) = (net.clone(), ev.clone(), q.clone());
                Box::new(move || {
                    Box::new(LogicSampler::new(net.clone(), &ev, &q, 9).unwrap())
                })
            }),
            ("bounds", {
                let (net, ev, q) = (net.clone(), ev.clone(), q.clone());
                Box::new(move || Box::new(BoundPropagator::new(net.clone(), &ev, &q).unwrap()))
            }),
            ("modulate", {
                let (net, ev, q) = (net.clone(), ev.clone(), q.clone());
                Box::new(move || {
                    Box::new(CompletenessModulator::new(net.clone(), &ev, &q, &[0.5, 0.0]).unwrap())
                })
            }),
            ("default", {
                Box::new(move || {
                    Box::new(DefaultPolicyEngine::new(&policy_table(), "resp-critical").unwrap())
                })
            }),
        ];
        for (name, factory) in make {
            for (a, b) in [(0u64, 5u64), (3, 4), (7, 0), (2, 9)] {
                let mut split = factory();
                split.step(a);
                split.step(b);
                let mut whole = factory();
                whole.step(a + b);
                assert_eq!(split.estimate(), whole.estimate(), "{name} {a}+{b}");
            }
        }
    }

    #[test]
    fn support_is_monotone() {
        let mut s = LogicSampler::new(chain(), &Evidence::empty(), &Query::new("B", "t"), 4).unwrap();
        let mut last = 0;
        for _ in 0..5 {
            s.step(10);
            let support = s.estimate().support;
            assert!(support >= last);
            last = support;
        }
    }
}
