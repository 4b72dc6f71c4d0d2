//! Builtin networks and random problem generators used by profiling, the
//! CLI scenarios, and the test suites.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::network::{
    ChanceDecl, DecisionNode, Evidence, Network, NetworkFile, Query, ValueNode, Variable,
};

/// One inference problem: network, observed evidence, and the queried state.
#[derive(Debug, Clone)]
pub struct Problem {
    pub net: Arc<Network>,
    pub evidence: Evidence,
    pub query: Query,
}

fn binary_var(id: &str) -> Variable {
    Variable {
        id: id.to_string(),
        states: vec!["t".into(), "f".into()],
    }
}

fn build(file: NetworkFile) -> Network {
    Network::from_file_repr(&file).expect("builtin network must validate")
}

/// Two-node chain A -> B with P(A=t) = 0.3, P(B=t|A=t) = 0.8,
/// P(B=t|A=f) = 0.1. P(B=t) = 0.31, P(A=t|B=t) = 24/31.
pub fn chain_network() -> Network {
    build(NetworkFile {
        variables: vec![binary_var("A"), binary_var("B")],
        chance: vec![
            ChanceDecl {
                id: "A".into(),
                parents: vec![],
                cpt: Some(vec![0.3, 0.7]),
                arc_importance: None,
                noisy_or: None,
            },
            ChanceDecl {
                id: "B".into(),
                parents: vec!["A".into()],
                cpt: Some(vec![0.8, 0.2, 0.1, 0.9]),
                arc_importance: None,
                noisy_or: None,
            },
        ],
        decisions: vec![],
        values: vec![],
    })
}

/// Diamond D -> S1, D -> S2 plus the extra arc S1 -> S2 (so the skeleton is
/// multiply connected). The S1 -> S2 arc carries the given importance.
pub fn diamond_network(s1_to_s2_importance: f64) -> Network {
    build(NetworkFile {
        variables: vec![binary_var("D"), binary_var("S1"), binary_var("S2")],
        chance: vec![
            ChanceDecl {
                id: "D".into(),
                parents: vec![],
                cpt: Some(vec![0.2, 0.8]),
                arc_importance: None,
                noisy_or: None,
            },
            ChanceDecl {
                id: "S1".into(),
                parents: vec!["D".into()],
                cpt: Some(vec![0.7, 0.3, 0.15, 0.85]),
                arc_importance: None,
                noisy_or: None,
            },
            ChanceDecl {
                id: "S2".into(),
                parents: vec!["D".into(), "S1".into()],
                cpt: Some(vec![0.9, 0.1, 0.6, 0.4, 0.5, 0.5, 0.05, 0.95]),
                arc_importance: Some(vec![1.0, s1_to_s2_importance]),
                noisy_or: None,
            },
        ],
        decisions: vec![],
        values: vec![],
    })
}

/// The builtin intensive-care diagnosis network: chance nodes D (condition)
/// and T_r (observed symptoms), decision nodes D_x (assumed diagnosis) and T
/// (additional testing), value node V. Five nodes total; inference runs on
/// the two chance nodes.
pub fn icu_network() -> Network {
    build(icu_network_file())
}

pub fn icu_network_file() -> NetworkFile {
    NetworkFile {
        variables: vec![
            Variable {
                id: "D".into(),
                states: vec!["present".into(), "absent".into()],
            },
            Variable {
                id: "T_r".into(),
                states: vec!["observed".into(), "not_observed".into()],
            },
        ],
        chance: vec![
            ChanceDecl {
                id: "D".into(),
                parents: vec![],
                cpt: Some(vec![0.08, 0.92]),
                arc_importance: None,
                noisy_or: None,
            },
            ChanceDecl {
                id: "T_r".into(),
                parents: vec!["D".into()],
                cpt: Some(vec![0.85, 0.15, 0.1, 0.9]),
                arc_importance: None,
                noisy_or: None,
            },
        ],
        decisions: vec![
            DecisionNode {
                id: "D_x".into(),
                options: vec!["assume_present".into(), "assume_absent".into()],
            },
            DecisionNode {
                id: "T".into(),
                options: vec!["test".into(), "no_test".into()],
            },
        ],
        values: vec![ValueNode {
            id: "V".into(),
            parents: vec!["D".into(), "D_x".into()],
        }],
    }
}

/// Fixed 8-node binary network used for sampler calibration: two root causes,
/// a middle layer, and observable leaves. Evidence on two leaves keeps the
/// weights moderate.
pub fn calibration_network() -> Network {
    build(NetworkFile {
        variables: (0..8).map(|i| binary_var(&format!("n{i}"))).collect(),
        chance: vec![
            ChanceDecl {
                id: "n0".into(),
                parents: vec![],
                cpt: Some(vec![0.35, 0.65]),
                arc_importance: None,
                noisy_or: None,
            },
            ChanceDecl {
                id: "n1".into(),
                parents: vec![],
                cpt: Some(vec![0.6, 0.4]),
                arc_importance: None,
                noisy_or: None,
            },
            ChanceDecl {
                id: "n2".into(),
                parents: vec!["n0".into()],
                cpt: Some(vec![0.7, 0.3, 0.25, 0.75]),
                arc_importance: None,
                noisy_or: None,
            },
            ChanceDecl {
                id: "n3".into(),
                parents: vec!["n0".into(), "n1".into()],
                cpt: Some(vec![0.8, 0.2, 0.55, 0.45, 0.4, 0.6, 0.15, 0.85]),
                arc_importance: None,
                noisy_or: None,
            },
            ChanceDecl {
                id: "n4".into(),
                parents: vec!["n1".into()],
                cpt: Some(vec![0.65, 0.35, 0.3, 0.7]),
                arc_importance: None,
                noisy_or: None,
            },
            ChanceDecl {
                id: "n5".into(),
                parents: vec!["n2".into(), "n3".into()],
                cpt: Some(vec![0.75, 0.25, 0.5, 0.5, 0.45, 0.55, 0.2, 0.8]),
                arc_importance: None,
                noisy_or: None,
            },
            ChanceDecl {
                id: "n6".into(),
                parents: vec!["n3".into()],
                cpt: Some(vec![0.7, 0.3, 0.35, 0.65]),
                arc_importance: None,
                noisy_or: None,
            },
            ChanceDecl {
                id: "n7".into(),
                parents: vec!["n4".into()],
                cpt: Some(vec![0.6, 0.4, 0.25, 0.75]),
                arc_importance: None,
                noisy_or: None,
            },
        ],
        decisions: vec![],
        values: vec![],
    })
}

/// The calibration problem: P(n0 = t | n5 = t, n7 = f).
pub fn calibration_problem() -> Problem {
    Problem {
        net: Arc::new(calibration_network()),
        evidence: Evidence::new([("n5", "t"), ("n7", "f")]).unwrap(),
        query: Query::new("n0", "t"),
    }
}

/// Single fair-coin node; sampling it exercises the pure binomial interval.
pub fn fair_coin_network() -> Network {
    build(NetworkFile {
        variables: vec![binary_var("C")],
        chance: vec![ChanceDecl {
            id: "C".into(),
            parents: vec![],
            cpt: Some(vec![0.5, 0.5]),
            arc_importance: None,
            noisy_or: None,
        }],
        decisions: vec![],
        values: vec![],
    })
}

/// Random binary DAG: node i draws up to `max_parents` parents among earlier
/// nodes; CPT entries are kept away from 0 and 1 so any evidence has
/// positive mass. Deterministic in the seed.
pub fn random_network(n_nodes: usize, max_parents: usize, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let variables: Vec<Variable> = (0..n_nodes).map(|i| binary_var(&format!("v{i:02}"))).collect();
    let mut chance = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let mut parents = Vec::new();
        for j in 0..i {
            if parents.len() < max_parents && rng.gen_bool(0.35) {
                parents.push(format!("v{j:02}"));
            }
        }
        let rows = 1usize << parents.len();
        let mut cpt = Vec::with_capacity(rows * 2);
        for _ in 0..rows {
            let p: f64 = rng.gen_range(0.05..0.95);
            cpt.push(p);
            cpt.push(1.0 - p);
        }
        let arc_importance = Some(parents.iter().map(|_| rng.gen_range(0.0..1.0)).collect());
        chance.push(ChanceDecl {
            id: format!("v{i:02}"),
            parents,
            cpt: Some(cpt),
            arc_importance,
            noisy_or: None,
        });
    }
    build(NetworkFile {
        variables,
        chance,
        decisions: vec![],
        values: vec![],
    })
}

/// Random problem on a random network: each non-query variable is observed
/// with probability 0.3.
pub fn random_problem(n_nodes: usize, max_parents: usize, seed: u64) -> Problem {
    let net = Arc::new(random_network(n_nodes, max_parents, seed));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5_5a5a);
    let query_var = rng.gen_range(0..n_nodes);
    let query_state = if rng.gen_bool(0.5) { "t" } else { "f" };
    let mut pairs = Vec::new();
    for i in 0..n_nodes {
        if i != query_var && rng.gen_bool(0.3) {
            let state = if rng.gen_bool(0.5) { "t" } else { "f" };
            pairs.push((format!("v{i:02}"), state.to_string()));
        }
    }
    Problem {
        net: net.clone(),
        evidence: Evidence::new(pairs).unwrap(),
        query: Query::new(format!("v{query_var:02}"), query_state),
    }
}
