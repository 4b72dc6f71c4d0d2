//! The value calculus: object-related value of a precision level for a
//! binary treat/no-treat decision, time discounting, and their multiplicative
//! combination into comprehensive value.
//!
//! Object-related value uses a preposterior construction: the true posterior
//! p is uniform over the prior belief interval, the reported estimate is p
//! plus uniform noise of the interval width, and the action is chosen by the
//! treatment-threshold rule on the reported estimate. Both expectations are
//! taken by trapezoid quadrature on fixed grids, so results are deterministic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// p-grid resolution for the outer expectation.
const P_GRID: usize = 2001;
/// e-grid resolution for the estimate-noise expectation.
const E_GRID: usize = 201;

#[derive(Debug, Error)]
pub enum ValueError {
    #[error("degenerate utility table: need treat_cond > notreat_cond and notreat_nocond > treat_nocond")]
    DegenerateUtilities,
    #[error("belief interval [{0}, {1}] is not a valid sub-interval of [0, 1]")]
    BadBeliefInterval(f64, f64),
    #[error("width {0} outside [0, 1]")]
    BadWidth(f64),
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("discount parameters out of range: {0}")]
    BadDiscount(String),
    #[error("tradeoff series needs at least 2 points with strictly increasing delays")]
    UnsortedTradeoff,
}

/// Utilities of the four action/condition outcomes, in utiles.
/// The ordering invariants keep the treatment threshold interior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityTable {
    /// u(treat, condition present)
    #[serde(rename = "tc")]
    pub treat_cond: f64,
    /// u(treat, condition absent)
    #[serde(rename = "tn")]
    pub treat_nocond: f64,
    /// u(no treat, condition present)
    #[serde(rename = "nc")]
    pub notreat_cond: f64,
    /// u(no treat, condition absent)
    #[serde(rename = "nn")]
    pub notreat_nocond: f64,
}

impl UtilityTable {
    pub fn new(tc: f64, tn: f64, nc: f64, nn: f64) -> Result<Self, ValueError> {
        let t = UtilityTable {
            treat_cond: tc,
            treat_nocond: tn,
            notreat_cond: nc,
            notreat_nocond: nn,
        };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<(), ValueError> {
        if self.treat_cond > self.notreat_cond && self.notreat_nocond > self.treat_nocond {
            Ok(())
        } else {
            Err(ValueError::DegenerateUtilities)
        }
    }
}

/// The probability of the condition above which treating is optimal:
/// p* = (nn - tn) / ((tc - nc) + (nn - tn)). Invariant under positive affine
/// transformation of all four utilities.
pub fn treatment_threshold(u: &UtilityTable) -> Result<f64, ValueError> {
    u.check()?;
    let harm = u.notreat_nocond - u.treat_nocond;
    let benefit = u.treat_cond - u.notreat_cond;
    Ok(harm / (benefit + harm))
}

/// Time discount D(t) on object-related value: non-increasing, D(0) <= 1,
/// range within [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiscountFunction {
    Exponential { lambda: f64 },
    Step { deadline: f64, floor: f64 },
    Logistic { steepness: f64, midpoint: f64 },
}

impl DiscountFunction {
    pub fn check(&self) -> Result<(), ValueError> {
        match *self {
            DiscountFunction::Exponential { lambda } if lambda < 0.0 => Err(
                ValueError::BadDiscount(format!("negative decay rate {lambda}")),
            ),
            DiscountFunction::Step { deadline, floor }
                if deadline < 0.0 || !(0.0..=1.0).contains(&floor) =>
            {
                Err(ValueError::BadDiscount(format!(
                    "step deadline {deadline}, floor {floor}"
                )))
            }
            DiscountFunction::Logistic { steepness, .. } if steepness < 0.0 => Err(
                ValueError::BadDiscount(format!("negative steepness {steepness}")),
            ),
            _ => Ok(()),
        }
    }
}

/// D(t) for t >= 0.
pub fn discount(d: &DiscountFunction, t: f64) -> Result<f64, ValueError> {
    if t < 0.0 {
        return Err(ValueError::NegativeTime(t));
    }
    d.check()?;
    Ok(match *d {
        DiscountFunction::Exponential { lambda } => (-lambda * t).exp(),
        DiscountFunction::Step { deadline, floor } => {
            if t < deadline {
                1.0
            } else {
                floor
            }
        }
        DiscountFunction::Logistic { steepness, midpoint } => {
            1.0 / (1.0 + (steepness * (t - midpoint)).exp())
        }
    })
}

/// Decision context: outcome utilities, time discounting, the prior belief
/// interval over the true posterior, and the combination rule for
/// comprehensive value (multiplicative only in this version).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueContext {
    pub utilities: UtilityTable,
    pub discount: DiscountFunction,
    /// Prior interval [l0, u0] over the true posterior.
    pub belief: [f64; 2],
    #[serde(default)]
    pub combination: Combination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_note: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combination {
    #[default]
    Multiplicative,
}

impl ValueContext {
    pub fn check(&self) -> Result<(), ValueError> {
        self.utilities.check()?;
        self.discount.check()?;
        let [l0, u0] = self.belief;
        if !(0.0 <= l0 && l0 < u0 && u0 <= 1.0) {
            return Err(ValueError::BadBeliefInterval(l0, u0));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }
}

fn expected_utility(u: &UtilityTable, p: f64, treat: bool) -> f64 {
    if treat {
        p * u.treat_cond + (1.0 - p) * u.treat_nocond
    } else {
        p * u.notreat_cond + (1.0 - p) * u.notreat_nocond
    }
}

/// Trapezoid mean of `f` over `n` uniform points on [a, b]; degenerates to a
/// point evaluation when a == b.
fn trapezoid_mean(a: f64, b: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    if a == b {
        return f(a);
    }
    let mut sum = 0.0;
    let mut wsum = 0.0;
    for i in 0..n {
        let x = a + (b - a) * (i as f64) / ((n - 1) as f64);
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        sum += w * f(x);
        wsum += w;
    }
    sum / wsum
}

/// Expected utility of acting on an estimate of interval width `w`.
///
/// The true posterior p is uniform over the belief interval; the reported
/// estimate is clamp(p + e, 0, 1) with e uniform on [-w/2, w/2]; the action
/// follows the threshold rule on the estimate (ties resolve to no-treat).
pub fn object_value(ctx: &ValueContext, w: f64) -> Result<f64, ValueError> {
    ctx.check()?;
    if !(0.0..=1.0).contains(&w) {
        return Err(ValueError::BadWidth(w));
    }
    let p_star = treatment_threshold(&ctx.utilities)?;
    let [l0, u0] = ctx.belief;
    let value = trapezoid_mean(l0, u0, P_GRID, |p| {
        trapezoid_mean(-w / 2.0, w / 2.0, E_GRID, |e| {
            let estimate = (p + e).clamp(0.0, 1.0);
            expected_utility(&ctx.utilities, p, estimate > p_star)
        })
    });
    Ok(value)
}

/// The optimal object-related value: acting on a perfectly precise estimate.
pub fn optimal_object_value(ctx: &ValueContext) -> Result<f64, ValueError> {
    object_value(ctx, 0.0)
}

/// V_c = V_o * D_t (multiplicative combination rule).
pub fn comprehensive_value(v_o: f64, discount_factor: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&discount_factor));
    v_o * discount_factor
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffViolation {
    /// Index of the later point of the first violating pair.
    pub index: usize,
    pub earlier: (f64, f64),
    pub later: (f64, f64),
}

/// Result of checking a (delay, precision) series against the time-precision
/// tradeoff: precision must be (weakly) non-decreasing in delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffReport {
    pub violation: Option<TradeoffViolation>,
}

impl TradeoffReport {
    pub fn is_monotone(&self) -> bool {
        self.violation.is_none()
    }
}

pub fn validate_tradeoff(points: &[(f64, f64)]) -> Result<TradeoffReport, ValueError> {
    if points.len() < 2 || points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(ValueError::UnsortedTradeoff);
    }
    for (i, w) in points.windows(2).enumerate() {
        if w[1].1 < w[0].1 {
            return Ok(TradeoffReport {
                violation: Some(TradeoffViolation {
                    index: i + 1,
                    earlier: w[0],
                    later: w[1],
                }),
            });
        }
    }
    Ok(TradeoffReport { violation: None })
}

/// Anything that can price a result of a given interval width at a given
/// time. The decision-theoretic [`ValueContext`] is the real model; the
/// linear stub prices value as raw precision and exists for scenario curves
/// and calibration-free planning.
pub trait ValueModel {
    fn object_value(&self, width: f64) -> Result<f64, ValueError>;
    fn discount(&self, t: f64) -> Result<f64, ValueError>;
}

impl ValueModel for ValueContext {
    fn object_value(&self, width: f64) -> Result<f64, ValueError> {
        object_value(self, width)
    }

    fn discount(&self, t: f64) -> Result<f64, ValueError> {
        discount(&self.discount, t)
    }
}

/// V_o = precision = 1 - width, discounted by the carried function.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPrecisionValue {
    pub discount: DiscountFunction,
}

impl ValueModel for LinearPrecisionValue {
    fn object_value(&self, width: f64) -> Result<f64, ValueError> {
        if !(0.0..=1.0).contains(&width) {
            return Err(ValueError::BadWidth(width));
        }
        Ok(1.0 - width)
    }

    fn discount(&self, t: f64) -> Result<f64, ValueError> {
        discount(&self.discount, t)
    }
}
