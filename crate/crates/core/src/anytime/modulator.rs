//! Completeness modulation: a ladder of descending importance thresholds.
//! Each rung prunes every arc whose importance falls below the threshold and
//! runs exact inference on the simplified network; the final rung (threshold
//! 0) is the full model, so the last estimate is exact.
//!
//! A pruned parent is marginalized out of the child's CPT using that parent's
//! exact marginal in the already-pruned network, processed in topological
//! order, which makes the result independent of arc-removal order within a
//! node.

use std::sync::Arc;

use super::{AnytimeEngine, AnytimeError, Estimate};
use crate::exact;
use crate::network::{ChanceNode, Evidence, Network, Query};

pub struct CompletenessModulator {
    net: Arc<Network>,
    ev: Evidence,
    q: Query,
    ladder: Vec<f64>,
    rung: usize,
    current: Option<f64>,
    /// Calibration precision per rung; heuristic strategies have no intrinsic
    /// interval, so without calibration the width stays 1.
    calibration: Option<Vec<f64>>,
}

impl CompletenessModulator {
    pub fn new(
        net: Arc<Network>,
        ev: &Evidence,
        q: &Query,
        ladder: &[f64],
    ) -> Result<Self, AnytimeError> {
        if ladder.is_empty() || *ladder.last().unwrap() != 0.0 {
            return Err(AnytimeError::LadderFinalRung(ladder.to_vec()));
        }
        for w in ladder.windows(2) {
            if w[1] >= w[0] {
                return Err(AnytimeError::LadderNotDescending(ladder.to_vec()));
            }
        }
        for &t in ladder {
            if !(0.0..=1.0).contains(&t) {
                return Err(AnytimeError::LadderRange(t));
            }
        }
        // Surface bad evidence/query at construction.
        ev.resolve(&net)?;
        q.resolve(&net, ev)?;
        Ok(CompletenessModulator {
            net,
            ev: ev.clone(),
            q: q.clone(),
            ladder: ladder.to_vec(),
            rung: 0,
            current: None,
            calibration: None,
        })
    }

    pub fn with_calibration(mut self, precisions: Vec<f64>) -> Self {
        assert_eq!(precisions.len(), self.ladder.len());
        self.calibration = Some(precisions);
        self
    }

    fn run_rung(&mut self) -> Result<(), AnytimeError> {
        let threshold = self.ladder[self.rung];
        let pruned = if threshold > 0.0 {
            prune_network(&self.net, threshold)?
        } else {
            (*self.net).clone()
        };
        let posterior = exact::variable_elimination(&pruned, &self.ev, &self.q)?;
        self.current = Some(posterior.probability);
        self.rung += 1;
        Ok(())
    }
}

/// Removes every arc with importance below `threshold`, marginalizing pruned
/// parents out of each CPT with their marginal in the partially pruned
/// network (nodes processed in topological order).
pub fn prune_network(net: &Network, threshold: f64) -> Result<Network, AnytimeError> {
    let mut working = net.clone();
    for pos in 0..working.topo_order.len() {
        let i = working.topo_order[pos];
        let node = working.nodes[i].clone();
        let removed: Vec<usize> = (0..node.parents.len())
            .filter(|&k| node.arc_importance[k] < threshold)
            .collect();
        if removed.is_empty() {
            continue;
        }
        let kept: Vec<usize> = (0..node.parents.len())
            .filter(|k| !removed.contains(k))
            .collect();

        let mut marginals: Vec<Vec<f64>> = Vec::with_capacity(removed.len());
        for &k in &removed {
            let pid = &working.variables[node.parents[k]].id;
            marginals.push(exact::marginal(&working, pid)?);
        }

        let own = working.cardinality(node.var);
        let cards: Vec<usize> = node.parents.iter().map(|&p| working.cardinality(p)).collect();
        let kept_rows: usize = kept.iter().map(|&k| cards[k]).product();
        let mut new_cpt = vec![0.0; kept_rows * own];

        // Walk every full parent combination, last parent fastest.
        let mut combo = vec![0usize; node.parents.len()];
        loop {
            let mut weight = 1.0;
            for (mi, &k) in removed.iter().enumerate() {
                weight *= marginals[mi][combo[k]];
            }
            let mut full_row = 0usize;
            for (k, &c) in combo.iter().enumerate() {
                full_row = full_row * cards[k] + c;
            }
            let mut kept_row = 0usize;
            for &k in &kept {
                kept_row = kept_row * cards[k] + combo[k];
            }
            for s in 0..own {
                new_cpt[kept_row * own + s] += weight * node.cpt[full_row * own + s];
            }
            let mut d = node.parents.len();
            let mut done = true;
            while d > 0 {
                d -= 1;
                combo[d] += 1;
                if combo[d] < cards[d] {
                    done = false;
                    break;
                }
                combo[d] = 0;
            }
            if done {
                break;
            }
        }

        working.nodes[i] = ChanceNode {
            var: node.var,
            parents: kept.iter().map(|&k| node.parents[k]).collect(),
            cpt: new_cpt,
            arc_importance: kept.iter().map(|&k| node.arc_importance[k]).collect(),
        };
    }
    Ok(working)
}

impl AnytimeEngine for CompletenessModulator {
    fn strategy_id(&self) -> &str {
        "modulate"
    }

    fn step(&mut self, n: u64) {
        for _ in 0..n {
            if self.is_complete() {
                break;
            }
            // Inference on a pruned version of an already valid network can
            // only fail on inconsistent evidence; keep the last good rung.
            if self.run_rung().is_err() {
                self.rung = self.ladder.len();
                break;
            }
        }
    }

    fn estimate(&self) -> Estimate {
        let Some(mean) = self.current else {
            return Estimate::vacuous(false);
        };
        let width = match &self.calibration {
            Some(cal) => 1.0 - cal[self.rung - 1].clamp(0.0, 1.0),
            None => 1.0,
        };
        let center = mean.clamp(width / 2.0, 1.0 - width / 2.0);
        Estimate {
            mean,
            low: center - width / 2.0,
            high: center + width / 2.0,
            support: self.rung as u64,
            well_founded: false,
        }
    }

    fn is_complete(&self) -> bool {
        self.rung >= self.ladder.len()
    }
}
