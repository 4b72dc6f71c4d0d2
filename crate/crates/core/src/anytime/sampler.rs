//! Likelihood-weighted forward sampling ("logic sampling" with evidence
//! weighting instead of rejection).
//!
//! Each step draws one topological-order sample; observed variables are
//! clamped and the sample weight multiplied by their likelihood. The interval
//! is the normal approximation to the binomial at z = 1.96, with effective
//! sample size (sum w)^2 / sum w^2 to account for the weights.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AnytimeEngine, AnytimeError, Estimate};
use crate::network::{Evidence, Network, Query};

const Z_95: f64 = 1.96;

pub struct LogicSampler {
    net: Arc<Network>,
    order: Vec<usize>,
    observed: Vec<Option<usize>>,
    target: usize,
    target_state: usize,
    rng: ChaCha8Rng,
    sum_w: f64,
    sum_w_sq: f64,
    sum_w_target: f64,
    steps: u64,
}

impl LogicSampler {
    pub fn new(net: Arc<Network>, ev: &Evidence, q: &Query, seed: u64) -> Result<Self, AnytimeError> {
        let observed = ev.resolve(&net)?;
        let (target, target_state) = q.resolve(&net, ev)?;
        let order = net.topo_order.clone();
        Ok(LogicSampler {
            net,
            order,
            observed,
            target,
            target_state,
            rng: ChaCha8Rng::seed_from_u64(seed),
            sum_w: 0.0,
            sum_w_sq: 0.0,
            sum_w_target: 0.0,
            steps: 0,
        })
    }

    fn draw_one(&mut self) {
        let n = self.net.variables.len();
        let mut assignment = vec![0usize; n];
        let mut weight = 1.0;
        for i in 0..self.order.len() {
            let v = self.order[i];
            let row = self.net.row_for_assignment(v, &assignment);
            match self.observed[v] {
                Some(s) => {
                    weight *= row[s];
                    assignment[v] = s;
                }
                None => {
                    let u: f64 = self.rng.gen();
                    let mut acc = 0.0;
                    let mut chosen = row.len() - 1;
                    for (s, &p) in row.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            chosen = s;
                            break;
                        }
                    }
                    assignment[v] = chosen;
                }
            }
        }
        self.sum_w += weight;
        self.sum_w_sq += weight * weight;
        if assignment[self.target] == self.target_state {
            self.sum_w_target += weight;
        }
        self.steps += 1;
    }
}

impl AnytimeEngine for LogicSampler {
    fn strategy_id(&self) -> &str {
        "sample"
    }

    fn step(&mut self, n: u64) {
        for _ in 0..n {
            self.draw_one();
        }
    }

    fn estimate(&self) -> Estimate {
        if self.sum_w <= 0.0 {
            // Zero effective samples (fresh engine or all weights zero).
            return Estimate {
                support: self.steps,
                ..Estimate::vacuous(true)
            };
        }
        let mean = self.sum_w_target / self.sum_w;
        let ess = self.sum_w * self.sum_w / self.sum_w_sq;
        let half = Z_95 * (mean * (1.0 - mean) / ess).sqrt();
        Estimate {
            mean,
            low: (mean - half).max(0.0),
            high: (mean + half).min(1.0),
            support: self.steps,
            well_founded: true,
        }
    }

    fn is_complete(&self) -> bool {
        false
    }
}
