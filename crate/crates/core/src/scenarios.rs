//! Builtin time-critical diagnosis scenarios: one fixed strategy catalog
//! evaluated under three discount contexts. The catalog holds a stochastic
//! sampler profile (E-1), a completeness-modulation profile with a faster
//! early rate but lower long-range rate (E-2), and a compiled default that
//! is available almost immediately but never refines (E-3).

use crate::meta::{self, MetaDecision, MetaError, PrecisionProfile, ProfileSource};
use crate::value::{DiscountFunction, LinearPrecisionValue};

pub const SCENARIO_HORIZON: f64 = 10.0;
pub const SCENARIO_GRID_N: usize = 2001;
const PROFILE_KNOTS: usize = 2001;

/// Samples an analytic precision formula onto profile knots.
pub fn analytic_profile(
    strategy_id: &str,
    problem_class: &str,
    horizon: f64,
    knots: usize,
    f: impl Fn(f64) -> f64,
) -> PrecisionProfile {
    let points = (0..knots)
        .map(|i| {
            let t = horizon * (i as f64) / ((knots - 1) as f64);
            (t, f(t).clamp(0.0, 1.0))
        })
        .collect();
    PrecisionProfile {
        strategy_id: strategy_id.to_string(),
        problem_class: problem_class.to_string(),
        source: ProfileSource::Analytic,
        steps_per_second: 1.0,
        points,
    }
}

/// E-1, stochastic simulation: precision 1 - e^(-0.5 t).
pub fn e1_profile() -> PrecisionProfile {
    analytic_profile("E-1", "icu", SCENARIO_HORIZON, PROFILE_KNOTS, |t| {
        1.0 - (-0.5 * t).exp()
    })
}

/// E-2, completeness modulation: precision 0.8 (1 - e^(-2 t)) — faster early
/// refinement, lower long-range ceiling.
pub fn e2_profile() -> PrecisionProfile {
    analytic_profile("E-2", "icu", SCENARIO_HORIZON, PROFILE_KNOTS, |t| {
        0.8 * (1.0 - (-2.0 * t).exp())
    })
}

/// E-3, compiled default: fixed precision 0.15 available from t = 0.01,
/// never refined afterwards.
pub fn e3_profile() -> PrecisionProfile {
    PrecisionProfile {
        strategy_id: "E-3".to_string(),
        problem_class: "icu".to_string(),
        source: ProfileSource::Analytic,
        steps_per_second: 1.0,
        points: vec![(0.0, 0.0), (0.01, 0.15), (SCENARIO_HORIZON, 0.15)],
    }
}

pub fn scenario_catalog() -> Vec<PrecisionProfile> {
    vec![e1_profile(), e2_profile(), e3_profile()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinScenario {
    /// Mild discounting e^(-0.02 t): slow refinement wins.
    IcuMild,
    /// Sharp discounting e^(-1.5 t): the decision horizon has contracted and
    /// the fast coarse strategy wins.
    IcuSharp,
    /// Hard deadline at t = 0.05: only the compiled default is worth
    /// anything.
    IcuExtreme,
}

impl BuiltinScenario {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "icu-mild" => Some(BuiltinScenario::IcuMild),
            "icu-sharp" => Some(BuiltinScenario::IcuSharp),
            "icu-extreme" => Some(BuiltinScenario::IcuExtreme),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BuiltinScenario::IcuMild => "icu-mild",
            BuiltinScenario::IcuSharp => "icu-sharp",
            BuiltinScenario::IcuExtreme => "icu-extreme",
        }
    }

    pub fn discount(&self) -> DiscountFunction {
        match self {
            BuiltinScenario::IcuMild => DiscountFunction::Exponential { lambda: 0.02 },
            BuiltinScenario::IcuSharp => DiscountFunction::Exponential { lambda: 1.5 },
            BuiltinScenario::IcuExtreme => DiscountFunction::Step {
                deadline: 0.05,
                floor: 0.0,
            },
        }
    }

    /// Runs the selector over the builtin catalog in this context.
    pub fn select(&self) -> Result<MetaDecision, MetaError> {
        let model = LinearPrecisionValue {
            discount: self.discount(),
        };
        meta::select_strategy(&scenario_catalog(), &model, SCENARIO_HORIZON, SCENARIO_GRID_N)
    }
}
