//! Metalevel control: performance profiles, comprehensive-value curves, the
//! bounded-optimality selector, the desiderata checkers, and monitored
//! execution of the chosen strategy.
//!
//! Planning is grid-based: profiles are piecewise-linear empirical objects,
//! so curves are evaluated on a uniform time grid and peaks found by argmax.
//! Metalevel overhead is measured and reported, never fed back into the
//! selection.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anytime::{AnytimeEngine, AnytimeError, Estimate};
use crate::exact::{self, InferenceError, ResourceLedger};
use crate::problems::Problem;
use crate::value::{self, ValueError, ValueModel};

/// Default planning grid.
pub const DEFAULT_GRID_N: usize = 512;

#[derive(Debug, Error)]
pub enum MetaError {
    #[error("profile for `{0}` has no points")]
    EmptyProfile(String),
    #[error("profile for `{strategy}` is not a valid tradeoff: {reason}")]
    InvalidProfile { strategy: String, reason: String },
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error("grid needs at least 2 points, got {0}")]
    BadGrid(usize),
    #[error("need at least {min} trials, got {got}")]
    TooFewTrials { min: u32, got: u32 },
    #[error("checkpoints must be ascending and non-empty")]
    BadCheckpoints,
    #[error("could not sample a solvable problem after {0} retries")]
    SamplingExhausted(u32),
    #[error("engine `{engine}` does not match selected strategy `{selected}`")]
    StrategyMismatch { engine: String, selected: String },
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Anytime(#[from] AnytimeError),
}

/// How a profile was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    Analytic,
    Empirical { trials: u32, quantile: f64 },
}

/// Expected precision as a monotone function of computation time for one
/// (strategy, problem-class) pair. Piecewise linear between the points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionProfile {
    pub strategy_id: String,
    pub problem_class: String,
    pub source: ProfileSource,
    pub steps_per_second: f64,
    /// Ordered (t seconds, expected precision) pairs.
    pub points: Vec<(f64, f64)>,
}

impl PrecisionProfile {
    pub fn check(&self) -> Result<(), MetaError> {
        if self.points.is_empty() {
            return Err(MetaError::EmptyProfile(self.strategy_id.clone()));
        }
        if self.points[0].0 < 0.0 {
            return Err(MetaError::InvalidProfile {
                strategy: self.strategy_id.clone(),
                reason: "first point has negative time".into(),
            });
        }
        if self.points.iter().any(|&(_, p)| !(0.0..=1.0).contains(&p)) {
            return Err(MetaError::InvalidProfile {
                strategy: self.strategy_id.clone(),
                reason: "precision outside [0, 1]".into(),
            });
        }
        if self.points.len() >= 2 {
            let report = value::validate_tradeoff(&self.points).map_err(|_| {
                MetaError::InvalidProfile {
                    strategy: self.strategy_id.clone(),
                    reason: "times not strictly increasing".into(),
                }
            })?;
            if let Some(v) = report.violation {
                return Err(MetaError::InvalidProfile {
                    strategy: self.strategy_id.clone(),
                    reason: format!(
                        "precision decreases from {:?} to {:?}",
                        v.earlier, v.later
                    ),
                });
            }
        }
        Ok(())
    }

    /// Linear interpolation between bracketing points, clamped to the first
    /// and last values outside the covered range.
    pub fn eval(&self, t: f64) -> f64 {
        assert!(!self.points.is_empty(), "empty profile");
        let first = self.points[0];
        let last = *self.points.last().unwrap();
        if t <= first.0 {
            return first.1;
        }
        if t >= last.0 {
            return last.1;
        }
        let idx = self.points.partition_point(|&(pt, _)| pt <= t);
        let (t0, p0) = self.points[idx - 1];
        let (t1, p1) = self.points[idx];
        p0 + (p1 - p0) * (t - t0) / (t1 - t0)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }
}

/// One point of a comprehensive-value curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValuePoint {
    pub t: f64,
    pub precision: f64,
    pub object_value: f64,
    pub discount: f64,
    pub comprehensive: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueCurve {
    pub strategy_id: String,
    pub points: Vec<ValuePoint>,
}

impl ValueCurve {
    /// Grid argmax of comprehensive value; ties resolve to the earliest time.
    pub fn peak(&self) -> (f64, f64) {
        assert!(!self.points.is_empty(), "empty curve");
        let mut best = &self.points[0];
        for p in &self.points[1..] {
            if p.comprehensive > best.comprehensive {
                best = p;
            }
        }
        (best.t, best.comprehensive)
    }
}

/// Derives the comprehensive-value curve for one profile under one value
/// model on a uniform grid over [0, horizon].
pub fn value_curve(
    profile: &PrecisionProfile,
    model: &dyn ValueModel,
    horizon: f64,
    grid_n: usize,
) -> Result<ValueCurve, MetaError> {
    if horizon <= 0.0 {
        return Err(MetaError::BadHorizon(horizon));
    }
    if grid_n < 2 {
        return Err(MetaError::BadGrid(grid_n));
    }
    profile.check()?;
    let mut points = Vec::with_capacity(grid_n);
    for i in 0..grid_n {
        let t = horizon * (i as f64) / ((grid_n - 1) as f64);
        let precision = profile.eval(t).clamp(0.0, 1.0);
        let object_value = model.object_value(1.0 - precision)?;
        let discount = model.discount(t)?;
        points.push(ValuePoint {
            t,
            precision,
            object_value,
            discount,
            comprehensive: value::comprehensive_value(object_value, discount),
        });
    }
    Ok(ValueCurve {
        strategy_id: profile.strategy_id.clone(),
        points,
    })
}

/// The selector's output: the chosen strategy, its peak, every curve it
/// considered, plus measured metalevel overhead (reported only).
#[derive(Debug, Clone)]
pub struct MetaDecision {
    pub selected: String,
    pub t_max: f64,
    pub v_c_max: f64,
    pub curves: Vec<ValueCurve>,
    pub ledger: Option<ResourceLedger>,
    pub metalevel_overhead_secs: f64,
}

/// Bounded-optimality selection: computes every strategy's value curve and
/// picks the one with the greatest peak. Ties resolve to the smaller t_max,
/// then lexicographic strategy id.
pub fn select_strategy(
    catalog: &[PrecisionProfile],
    model: &dyn ValueModel,
    horizon: f64,
    grid_n: usize,
) -> Result<MetaDecision, MetaError> {
    if catalog.is_empty() {
        return Err(MetaError::EmptyCatalog);
    }
    let started = Instant::now();
    let curves: Vec<ValueCurve> = catalog
        .iter()
        .map(|p| value_curve(p, model, horizon, grid_n))
        .collect::<Result<_, _>>()?;
    let mut best = 0usize;
    let mut best_peak = curves[0].peak();
    for (i, c) in curves.iter().enumerate().skip(1) {
        let peak = c.peak();
        let better = peak.1 > best_peak.1
            || (peak.1 == best_peak.1
                && (peak.0 < best_peak.0
                    || (peak.0 == best_peak.0 && c.strategy_id < curves[best].strategy_id)));
        if better {
            best = i;
            best_peak = peak;
        }
    }
    Ok(MetaDecision {
        selected: curves[best].strategy_id.clone(),
        t_max: best_peak.0,
        v_c_max: best_peak.1,
        curves,
        ledger: None,
        metalevel_overhead_secs: started.elapsed().as_secs_f64(),
    })
}

/// Maximal grid intervals where comprehensive value is strictly increasing
/// (the value-dominant ranges).
pub fn dominance_intervals(curve: &ValueCurve) -> Vec<(f64, f64)> {
    let mut intervals = Vec::new();
    let mut start: Option<usize> = None;
    for i in 1..curve.points.len() {
        let rising = curve.points[i].comprehensive > curve.points[i - 1].comprehensive;
        match (rising, start) {
            (true, None) => start = Some(i - 1),
            (false, Some(s)) => {
                intervals.push((curve.points[s].t, curve.points[i - 1].t));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push((curve.points[s].t, curve.points.last().unwrap().t));
    }
    intervals
}

/// Observed bounded-discontinuity constraint: the largest |change in V_c|
/// over any window of `delta` in resource fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscontinuityBound {
    pub delta: f64,
    pub epsilon: f64,
}

pub fn check_bounded_discontinuity(
    curve: &ValueCurve,
    ledger: &ResourceLedger,
    delta: f64,
) -> DiscontinuityBound {
    assert!(delta > 0.0, "delta must be positive");
    let fractions: Vec<f64> = curve
        .points
        .iter()
        .map(|p| p.t / ledger.complete_secs)
        .collect();
    let mut epsilon: f64 = 0.0;
    for i in 0..curve.points.len() {
        for j in i + 1..curve.points.len() {
            if (fractions[j] - fractions[i]).abs() <= delta {
                epsilon = epsilon
                    .max((curve.points[j].comprehensive - curve.points[i].comprehensive).abs());
            }
        }
    }
    DiscontinuityBound { delta, epsilon }
}

/// Runs an engine to completion (capped at `max_steps` for engines with no
/// completion notion, where the check is statistical rather than exact) and
/// reports whether its final mean lands within `tolerance` of the exact
/// posterior.
pub fn check_endpoint_convergence(
    mut engine: Box<dyn AnytimeEngine>,
    problem: &Problem,
    tolerance: f64,
    max_steps: u64,
) -> Result<bool, MetaError> {
    let exact = exact::variable_elimination(&problem.net, &problem.evidence, &problem.query)?;
    let mut remaining = max_steps;
    while !engine.is_complete() && remaining > 0 {
        let chunk = remaining.min(1024);
        engine.step(chunk);
        remaining -= chunk;
    }
    Ok((engine.estimate().mean - exact.probability).abs() <= tolerance)
}

/// Builds an empirical precision profile by running an engine on sampled
/// problems and recording error quantiles at step checkpoints.
///
/// Profile precision at a checkpoint is 1 - 2 * (error quantile), clamped to
/// [0, 1] and made non-decreasing by running max; times come from the
/// measured stepping rate.
pub fn profile_strategy<G, F>(
    strategy_id: &str,
    problem_class: &str,
    mut sample_problem: G,
    mut factory: F,
    checkpoints: &[u64],
    trials: u32,
    seed: u64,
    quantile: f64,
) -> Result<PrecisionProfile, MetaError>
where
    G: FnMut(u64) -> Problem,
    F: FnMut(&Problem, u64) -> Result<Box<dyn AnytimeEngine>, AnytimeError>,
{
    const MAX_RETRIES: u32 = 20;
    if trials < 10 {
        return Err(MetaError::TooFewTrials { min: 10, got: trials });
    }
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MetaError::BadCheckpoints);
    }
    let mut errors: Vec<Vec<f64>> = vec![Vec::with_capacity(trials as usize); checkpoints.len()];
    let mut total_steps = 0u64;
    let mut total_secs = 0.0f64;
    for trial in 0..trials {
        let mut retry = 0u32;
        let (problem, oracle) = loop {
            let pseed = seed + trial as u64 + (retry as u64) * 0x9e37;
            let problem = sample_problem(pseed);
            match exact::variable_elimination(&problem.net, &problem.evidence, &problem.query) {
                Ok(p) => break (problem, p.probability),
                Err(_) if retry < MAX_RETRIES => retry += 1,
                Err(_) => return Err(MetaError::SamplingExhausted(MAX_RETRIES)),
            }
        };
        let mut engine = factory(&problem, seed + trial as u64)?;
        let mut done = 0u64;
        let started = Instant::now();
        for (ci, &cp) in checkpoints.iter().enumerate() {
            engine.step(cp - done);
            done = cp;
            errors[ci].push((engine.estimate().mean - oracle).abs());
        }
        total_secs += started.elapsed().as_secs_f64();
        total_steps += done;
    }
    let steps_per_second = (total_steps as f64 / total_secs.max(1e-9)).max(1.0);
    let mut points = Vec::with_capacity(checkpoints.len());
    let mut running = 0.0f64;
    for (ci, &cp) in checkpoints.iter().enumerate() {
        let mut errs = errors[ci].clone();
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = ((quantile * errs.len() as f64).ceil() as usize).clamp(1, errs.len()) - 1;
        let precision = (1.0 - 2.0 * errs[idx]).clamp(0.0, 1.0);
        running = running.max(precision);
        points.push((cp as f64 / steps_per_second, running));
    }
    let profile = PrecisionProfile {
        strategy_id: strategy_id.to_string(),
        problem_class: problem_class.to_string(),
        source: ProfileSource::Empirical {
            trials,
            quantile,
        },
        steps_per_second,
        points,
    };
    profile.check()?;
    Ok(profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ReachedTarget,
    ValueDecline,
    EngineComplete,
}

#[derive(Debug, Clone)]
pub struct ExecutionLog {
    pub checkpoints: Vec<ValuePoint>,
    pub stop: StopReason,
}

/// Executes the selected strategy toward its planned t_max, re-pricing the
/// realized estimate at every checkpoint and halting early once realized
/// comprehensive value has decreased across two consecutive checkpoints.
/// Times are model times (steps / steps_per_second), so runs are
/// deterministic.
pub fn execute_with_monitoring(
    decision: &MetaDecision,
    mut engine: Box<dyn AnytimeEngine>,
    model: &dyn ValueModel,
    steps_per_second: f64,
    check_every: u64,
) -> Result<(Estimate, ExecutionLog), MetaError> {
    assert!(steps_per_second > 0.0);
    assert!(check_every > 0);
    if engine.strategy_id() != decision.selected {
        return Err(MetaError::StrategyMismatch {
            engine: engine.strategy_id().to_string(),
            selected: decision.selected.clone(),
        });
    }
    let target_steps = (decision.t_max * steps_per_second).ceil() as u64;
    let mut log = ExecutionLog {
        checkpoints: Vec::new(),
        stop: StopReason::ReachedTarget,
    };
    let mut done = 0u64;
    let mut declines = 0u32;
    loop {
        if done >= target_steps {
            log.stop = StopReason::ReachedTarget;
            break;
        }
        let chunk = check_every.min(target_steps - done);
        engine.step(chunk);
        done += chunk;
        let t = done as f64 / steps_per_second;
        let est = engine.estimate();
        let precision = est.precision().clamp(0.0, 1.0);
        let object_value = model.object_value(1.0 - precision)?;
        let discount = model.discount(t)?;
        let comprehensive = value::comprehensive_value(object_value, discount);
        let point = ValuePoint {
            t,
            precision,
            object_value,
            discount,
            comprehensive,
        };
        if let Some(prev) = log.checkpoints.last() {
            if comprehensive < prev.comprehensive {
                declines += 1;
            } else {
                declines = 0;
            }
        }
        log.checkpoints.push(point);
        if declines >= 2 {
            log.stop = StopReason::ValueDecline;
            break;
        }
        if engine.is_complete() {
            log.stop = StopReason::EngineComplete;
            break;
        }
    }
    Ok((engine.estimate(), log))
}
