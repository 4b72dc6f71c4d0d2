//! Complete normative analysis: exact posteriors by brute-force joint
//! enumeration (the oracle) and by variable elimination, plus measurement of
//! the complete-resources level R_c.
//!
//! The two algorithms are independent routes to the same number; the
//! enumeration path exists so every approximation in the crate can be checked
//! against it.

use std::time::Instant;

use thiserror::Error;

use crate::network::{Evidence, Network, NetworkError, Query};

/// Joint-state cap for the enumeration oracle: 2^20 binary-equivalent nodes.
pub const ORACLE_STATE_CAP: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("evidence has zero probability mass")]
    InconsistentEvidence,
    #[error("joint state space {states} exceeds oracle cap {cap}")]
    CapExceeded { states: usize, cap: usize },
    #[error("need at least {min} repeats, got {got}")]
    TooFewRepeats { min: u32, got: u32 },
    #[error(transparent)]
    Network(#[from] Box<NetworkError>),
}

impl From<NetworkError> for InferenceError {
    fn from(e: NetworkError) -> Self {
        InferenceError::Network(Box::new(e))
    }
}

/// An exact or estimated posterior together with the evidence mass it was
/// normalized by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub probability: f64,
    pub evidence_mass: f64,
}

/// Wall-clock accounting: complete resources R_c, allocated resources R_a,
/// and their ratio R_f.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceLedger {
    pub complete_secs: f64,
    pub allocated_secs: f64,
}

impl ResourceLedger {
    pub fn new(complete_secs: f64, allocated_secs: f64) -> Self {
        assert!(complete_secs > 0.0, "R_c must be positive");
        assert!(allocated_secs >= 0.0, "R_a must be non-negative");
        ResourceLedger {
            complete_secs,
            allocated_secs,
        }
    }

    /// Resource fraction R_f = R_a / R_c.
    pub fn fraction(&self) -> f64 {
        self.allocated_secs / self.complete_secs
    }

    pub fn with_allocated(&self, allocated_secs: f64) -> Self {
        ResourceLedger::new(self.complete_secs, allocated_secs)
    }
}

fn joint_size(net: &Network) -> usize {
    net.variables
        .iter()
        .fold(1usize, |acc, v| acc.saturating_mul(v.states.len()))
}

/// Brute-force oracle: sums the full joint over every instantiation.
pub fn joint_enumeration(net: &Network, ev: &Evidence, q: &Query) -> Result<Posterior, InferenceError> {
    let states = joint_size(net);
    if states > ORACLE_STATE_CAP {
        return Err(InferenceError::CapExceeded {
            states,
            cap: ORACLE_STATE_CAP,
        });
    }
    let observed = ev.resolve(net)?;
    let (target, target_state) = q.resolve(net, ev)?;

    let n = net.variables.len();
    let mut assignment = vec![0usize; n];
    let mut mass_ev = 0.0;
    let mut mass_joint = 0.0;
    loop {
        let consistent = observed
            .iter()
            .enumerate()
            .all(|(v, o)| o.map_or(true, |s| assignment[v] == s));
        if consistent {
            let mut p = 1.0;
            for i in 0..n {
                p *= net.row_for_assignment(i, &assignment)[assignment[i]];
            }
            mass_ev += p;
            if assignment[target] == target_state {
                mass_joint += p;
            }
        }
        // Mixed-radix increment, last variable fastest.
        let mut i = n;
        loop {
            if i == 0 {
                return finish(mass_joint, mass_ev);
            }
            i -= 1;
            assignment[i] += 1;
            if assignment[i] < net.cardinality(i) {
                break;
            }
            assignment[i] = 0;
        }
    }
}

fn finish(mass_joint: f64, mass_ev: f64) -> Result<Posterior, InferenceError> {
    if mass_ev <= 0.0 {
        return Err(InferenceError::InconsistentEvidence);
    }
    Ok(Posterior {
        probability: mass_joint / mass_ev,
        evidence_mass: mass_ev,
    })
}

// ---------------------------------------------------------------------------
// Factors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    data: Vec<f64>,
}

impl Factor {
    fn size(&self, net: &Network) -> usize {
        self.vars.iter().map(|&v| net.cardinality(v)).product()
    }

    fn from_node(net: &Network, node: usize) -> Factor {
        let n = &net.nodes[node];
        let mut vars = n.parents.clone();
        vars.push(n.var);
        Factor {
            vars,
            data: n.cpt.clone(),
        }
    }

    /// Fixes `var` to `state`, dropping it from the scope.
    fn reduce(&self, net: &Network, var: usize, state: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let vars: Vec<usize> = self
            .vars
            .iter()
            .copied()
            .filter(|&v| v != var)
            .collect();
        let mut out = Factor {
            vars,
            data: Vec::new(),
        };
        let cards: Vec<usize> = self.vars.iter().map(|&v| net.cardinality(v)).collect();
        let total = self.data.len();
        let mut idx = vec![0usize; self.vars.len()];
        out.data.reserve(total / cards[pos]);
        for flat in 0..total {
            if idx[pos] == state {
                out.data.push(self.data[flat]);
            }
            let mut i = self.vars.len();
            while i > 0 {
                i -= 1;
                idx[i] += 1;
                if idx[i] < cards[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        out
    }

    fn multiply(&self, other: &Factor, net: &Network) -> Factor {
        let mut vars = self.vars.clone();
        for &v in &other.vars {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        let cards: Vec<usize> = vars.iter().map(|&v| net.cardinality(v)).collect();
        let total: usize = cards.iter().product();
        let self_pos: Vec<usize> = self
            .vars
            .iter()
            .map(|v| vars.iter().position(|w| w == v).unwrap())
            .collect();
        let other_pos: Vec<usize> = other
            .vars
            .iter()
            .map(|v| vars.iter().position(|w| w == v).unwrap())
            .collect();
        let mut data = Vec::with_capacity(total);
        let mut idx = vec![0usize; vars.len()];
        for _ in 0..total {
            let a = flat_index(&self.vars, &self_pos, &idx, net);
            let b = flat_index(&other.vars, &other_pos, &idx, net);
            data.push(self.data[a] * other.data[b]);
            let mut i = vars.len();
            while i > 0 {
                i -= 1;
                idx[i] += 1;
                if idx[i] < cards[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        Factor { vars, data }
    }

    /// Sums `var` out of the scope.
    fn marginalize(&self, net: &Network, var: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let vars: Vec<usize> = self
            .vars
            .iter()
            .copied()
            .filter(|&v| v != var)
            .collect();
        let cards: Vec<usize> = self.vars.iter().map(|&v| net.cardinality(v)).collect();
        let out_size: usize = vars.iter().map(|&v| net.cardinality(v)).product();
        let mut data = vec![0.0; out_size];
        let mut idx = vec![0usize; self.vars.len()];
        for flat in 0..self.data.len() {
            let mut out_idx = 0usize;
            for (i, &v) in self.vars.iter().enumerate() {
                if i != pos {
                    out_idx = out_idx * net.cardinality(v) + idx[i];
                }
            }
            data[out_idx] += self.data[flat];
            let mut i = self.vars.len();
            while i > 0 {
                i -= 1;
                idx[i] += 1;
                if idx[i] < cards[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        Factor { vars, data }
    }
}

fn flat_index(f_vars: &[usize], positions: &[usize], idx: &[usize], net: &Network) -> usize {
    let mut flat = 0usize;
    for (i, &v) in f_vars.iter().enumerate() {
        flat = flat * net.cardinality(v) + idx[positions[i]];
    }
    flat
}

/// Min-degree elimination order over the hidden variables, ties broken by
/// variable id. Order choice affects speed only, never the result.
fn min_degree_order(net: &Network, hidden: &[usize], factors: &[Factor]) -> Vec<usize> {
    let n = net.variables.len();
    let mut adj: Vec<HashSetU> = vec![HashSetU::default(); n];
    for f in factors {
        for &a in &f.vars {
            for &b in &f.vars {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    let mut remaining: Vec<usize> = hidden.to_vec();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let &best = remaining
            .iter()
            .min_by(|&&a, &&b| {
                let da = adj[a].iter().filter(|v| remaining.contains(v)).count();
                let db = adj[b].iter().filter(|v| remaining.contains(v)).count();
                da.cmp(&db)
                    .then_with(|| net.variables[a].id.cmp(&net.variables[b].id))
            })
            .unwrap();
        // Connect neighbors (fill-in), then drop the variable.
        let neighbors: Vec<usize> = adj[best]
            .iter()
            .filter(|v| remaining.contains(v) && **v != best)
            .copied()
            .collect();
        for &a in &neighbors {
            for &b in &neighbors {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        remaining.retain(|&v| v != best);
        order.push(best);
    }
    order
}

type HashSetU = std::collections::BTreeSet<usize>;

/// Exact posterior by variable elimination with the default min-degree order.
pub fn variable_elimination(net: &Network, ev: &Evidence, q: &Query) -> Result<Posterior, InferenceError> {
    variable_elimination_with_order(net, ev, q, None)
}

/// Variable elimination with an explicit elimination order over the hidden
/// variables (ids); used to check order-independence of the result.
pub fn variable_elimination_with_order(
    net: &Network,
    ev: &Evidence,
    q: &Query,
    order: Option<&[usize]>,
) -> Result<Posterior, InferenceError> {
    let observed = ev.resolve(net)?;
    let (target, target_state) = q.resolve(net, ev)?;

    let mut factors: Vec<Factor> = Vec::with_capacity(net.nodes.len());
    for i in 0..net.nodes.len() {
        let mut f = Factor::from_node(net, i);
        for (v, o) in observed.iter().enumerate() {
            if let Some(s) = o {
                f = f.reduce(net, v, *s);
            }
        }
        factors.push(f);
    }

    let hidden: Vec<usize> = (0..net.variables.len())
        .filter(|&v| v != target && observed[v].is_none())
        .collect();
    let order: Vec<usize> = match order {
        Some(o) => {
            debug_assert_eq!(o.len(), hidden.len());
            o.to_vec()
        }
        None => min_degree_order(net, &hidden, &factors),
    };

    for v in order {
        let (with_v, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.contains(&v));
        factors = rest;
        if with_v.is_empty() {
            continue;
        }
        let mut product = with_v[0].clone();
        for f in &with_v[1..] {
            product = product.multiply(f, net);
        }
        factors.push(product.marginalize(net, v));
    }

    let mut result = Factor {
        vars: vec![],
        data: vec![1.0],
    };
    for f in &factors {
        result = result.multiply(f, net);
    }
    debug_assert_eq!(result.vars, vec![target]);
    debug_assert_eq!(result.size(net), net.cardinality(target));
    let mass: f64 = result.data.iter().sum();
    if mass <= 0.0 {
        return Err(InferenceError::InconsistentEvidence);
    }
    Ok(Posterior {
        probability: result.data[target_state] / mass,
        evidence_mass: mass,
    })
}

/// Exact marginal distribution of `var` with no evidence.
pub fn marginal(net: &Network, var: &str) -> Result<Vec<f64>, InferenceError> {
    conditional_distribution(net, &Evidence::empty(), var)
}

/// Exact distribution over the states of `var` given `ev`.
pub fn conditional_distribution(
    net: &Network,
    ev: &Evidence,
    var: &str,
) -> Result<Vec<f64>, InferenceError> {
    let idx = net
        .var_index(var)
        .ok_or_else(|| NetworkError::UnknownVariable(var.to_string()))?;
    let mut out = Vec::with_capacity(net.cardinality(idx));
    for s in 0..net.cardinality(idx) {
        let q = Query::new(var, net.variables[idx].states[s].clone());
        out.push(variable_elimination(net, ev, &q)?.probability);
    }
    Ok(out)
}

/// Measures R_c as the median wall-clock duration over `repeats` variable
/// elimination runs. Needs exclusive use of one worker to avoid contention
/// skew.
pub fn measure_complete_resources(
    net: &Network,
    ev: &Evidence,
    q: &Query,
    repeats: u32,
) -> Result<(Posterior, ResourceLedger), InferenceError> {
    if repeats < 3 {
        return Err(InferenceError::TooFewRepeats { min: 3, got: repeats });
    }
    let mut durations = Vec::with_capacity(repeats as usize);
    let mut posterior = None;
    for _ in 0..repeats {
        let start = Instant::now();
        let p = variable_elimination(net, ev, q)?;
        durations.push(start.elapsed().as_secs_f64());
        posterior = Some(p);
    }
    durations.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let r_c = durations[durations.len() / 2].max(f64::MIN_POSITIVE);
    Ok((posterior.unwrap(), ResourceLedger::new(r_c, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems;
    use rand::seq::SliceRandom;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn joint_enumeration_chain_marginal() {
        // Hand-checked total probability: 0.3 * 0.8 + 0.7 * 0.1 = 0.31.
        let net = problems::chain_network();
        let p = joint_enumeration(&net, &Evidence::empty(), &Query::new("B", "t")).unwrap();
        assert!((p.probability - 0.31).abs() < 1e-12);
        assert!((p.evidence_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn joint_enumeration_chain_posterior() {
        // Bayes rule from the same two numbers: 0.24 / 0.31.
        let net = problems::chain_network();
        let ev = Evidence::new([("B", "t")]).unwrap();
        let p = joint_enumeration(&net, &ev, &Query::new("A", "t")).unwrap();
        assert!((p.probability - 0.24 / 0.31).abs() < 1e-12);
        assert!((p.probability - 0.7741935483870968).abs() < 1e-12);
    }

    #[test]
    fn joint_enumeration_symmetric_child() {
        let text = r#"{
            "variables": [
                {"id": "A", "states": ["t", "f"]},
                {"id": "B", "states": ["t", "f"]}
            ],
            "chance": [
                {"id": "A", "parents": [], "cpt": [0.3, 0.7]},
                {"id": "B", "parents": ["A"], "cpt": [0.5, 0.5, 0.5, 0.5]}
            ]
        }"#;
        let net = crate::network::parse_network(text).unwrap();
        let p = joint_enumeration(&net, &Evidence::empty(), &Query::new("B", "t")).unwrap();
        assert!((p.probability - 0.5).abs() < 1e-12);
    }

    #[test]
    fn joint_enumeration_rejects_impossible_evidence() {
        let text = r#"{
            "variables": [
                {"id": "A", "states": ["t", "f"]},
                {"id": "B", "states": ["t", "f"]}
            ],
            "chance": [
                {"id": "A", "parents": [], "cpt": [1.0, 0.0]},
                {"id": "B", "parents": ["A"], "cpt": [0.5, 0.5, 0.5, 0.5]}
            ]
        }"#;
        let net = crate::network::parse_network(text).unwrap();
        let ev = Evidence::new([("A", "f")]).unwrap();
        assert!(matches!(
            joint_enumeration(&net, &ev, &Query::new("B", "t")),
            Err(InferenceError::InconsistentEvidence)
        ));
    }

    #[test]
    fn elimination_reproduces_enumeration_examples() {
        let net = problems::chain_network();
        let cases = [
            (Evidence::empty(), Query::new("B", "t")),
            (Evidence::new([("B", "t")]).unwrap(), Query::new("A", "t")),
            (Evidence::empty(), Query::new("A", "t")),
        ];
        for (ev, q) in cases {
            let a = joint_enumeration(&net, &ev, &q).unwrap();
            let b = variable_elimination(&net, &ev, &q).unwrap();
            assert!((a.probability - b.probability).abs() < 1e-9);
            assert!((a.evidence_mass - b.evidence_mass).abs() < 1e-9);
        }
    }

    #[test]
    fn elimination_matches_oracle_on_random_net() {
        let p = problems::random_problem(12, 3, 99);
        let a = joint_enumeration(&p.net, &p.evidence, &p.query).unwrap();
        let b = variable_elimination(&p.net, &p.evidence, &p.query).unwrap();
        assert!((a.probability - b.probability).abs() < 1e-9);
    }

    #[test]
    fn elimination_rejects_observed_query() {
        let net = problems::chain_network();
        let ev = Evidence::new([("B", "t")]).unwrap();
        assert!(variable_elimination(&net, &ev, &Query::new("B", "t")).is_err());
    }

    #[test]
    fn elimination_order_never_changes_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..10 {
            let p = problems::random_problem(9, 3, 1000 + seed);
            let reference = variable_elimination(&p.net, &p.evidence, &p.query).unwrap();
            let observed = p.evidence.resolve(&p.net).unwrap();
            let target = p.net.var_index(&p.query.target).unwrap();
            let mut hidden: Vec<usize> = (0..p.net.variables.len())
                .filter(|&v| v != target && observed[v].is_none())
                .collect();
            for _ in 0..3 {
                hidden.shuffle(&mut rng);
                let alt =
                    variable_elimination_with_order(&p.net, &p.evidence, &p.query, Some(&hidden))
                        .unwrap();
                assert!((alt.probability - reference.probability).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn binary_posteriors_are_complementary() {
        for seed in 0..20 {
            let p = problems::random_problem(8, 3, 2000 + seed);
            let pt = variable_elimination(&p.net, &p.evidence, &p.query).unwrap();
            let other = if p.query.target_state == "t" { "f" } else { "t" };
            let q2 = Query::new(p.query.target.clone(), other);
            let pf = variable_elimination(&p.net, &p.evidence, &q2).unwrap();
            assert!((pt.probability + pf.probability - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn resource_ledger_ratios() {
        let ledger = ResourceLedger::new(8.0, 2.0);
        assert!((ledger.fraction() - 0.25).abs() < 1e-12);
        assert!((ledger.with_allocated(8.0).fraction() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measure_complete_resources_is_positive_and_stable() {
        let net = problems::chain_network();
        let ev = Evidence::new([("B", "t")]).unwrap();
        let q = Query::new("A", "t");
        let (posterior, ledger) = measure_complete_resources(&net, &ev, &q, 5).unwrap();
        assert!(ledger.complete_secs > 0.0);
        assert_eq!(ledger.allocated_secs, 0.0);
        assert_eq!(ledger.fraction(), 0.0);
        let again = variable_elimination(&net, &ev, &q).unwrap();
        assert_eq!(posterior.probability, again.probability);
        assert!(matches!(
            measure_complete_resources(&net, &ev, &q, 2),
            Err(InferenceError::TooFewRepeats { .. })
        ));
    }

    #[test]
    fn oracle_cap_enforced() {
        let net = problems::random_network(21, 2, 1);
        assert!(matches!(
            joint_enumeration(&net, &Evidence::empty(), &Query::new("v00", "t")),
            Err(InferenceError::CapExceeded { .. })
        ));
    }
}
