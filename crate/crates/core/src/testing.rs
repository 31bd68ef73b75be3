//! Random networks, example networks and exhaustive evidence sweeps for
//! test suites.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::network::{instantiations, BeliefNetwork, Instantiation, NetworkBuilder, VarId};
use crate::oracle::joint_probability;
use crate::qdag::{EvarId, Evidence, QDag};

#[derive(Debug, Clone, Copy)]
pub struct NetworkShape {
    pub max_vars: usize,
    pub max_values: usize,
    pub max_parents: usize,
    /// Probability that a CPT entry is exactly zero.
    pub zero_rate: f64,
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape {
            max_vars: 8,
            max_values: 3,
            max_parents: 3,
            zero_rate: 0.1,
        }
    }
}

/// A network with a random DAG and random CPTs. Variables are declared in
/// an order unrelated to the DAG's topological order.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, shape: NetworkShape) -> BeliefNetwork {
    let n = rng.gen_range(1..=shape.max_vars.max(1));
    let cards: Vec<usize> = (0..n)
        .map(|_| {
            if shape.max_values < 2 || rng.gen_bool(0.1) {
                1
            } else {
                rng.gen_range(2..=shape.max_values)
            }
        })
        .collect();
    let names: Vec<String> = (0..n).map(|i| format!("X{i}")).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut parents: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
    for (pos, &child) in order.iter().enumerate() {
        let mut earlier: Vec<usize> = order[..pos].to_vec();
        earlier.shuffle(rng);
        for p in earlier {
            if parents[child].len() < shape.max_parents && rng.gen_bool(0.4) {
                parents[child].push(p);
            }
        }
    }

    let mut b = NetworkBuilder::new();
    for i in 0..n {
        b.variable(names[i].clone(), (0..cards[i]).map(|v| format!("v{v}")));
    }
    for child in 0..n {
        let rows: usize = parents[child].iter().map(|&p| cards[p]).product();
        let mut table = Vec::with_capacity(rows * cards[child]);
        for _ in 0..rows {
            table.extend(random_row(rng, cards[child], shape.zero_rate));
        }
        b.cpt(
            names[child].clone(),
            parents[child].iter().map(|&p| names[p].clone()),
            table,
        );
    }
    b.build().expect("generated network is valid")
}

fn random_row<R: Rng + ?Sized>(rng: &mut R, card: usize, zero_rate: f64) -> Vec<f64> {
    let mut row: Vec<f64> = (0..card)
        .map(|_| {
            if rng.gen_bool(zero_rate) {
                0.0
            } else {
                rng.gen_range(0.05..1.0)
            }
        })
        .collect();
    if row.iter().all(|&x| x == 0.0) {
        row[rng.gen_range(0..card)] = 1.0;
    }
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= total);
    row
}

/// A nonempty query set and an evidence set of at most `max_evidence`
/// variables. The two may overlap.
pub fn random_split<R: Rng + ?Sized>(
    rng: &mut R,
    net: &BeliefNetwork,
    max_evidence: usize,
) -> (Vec<VarId>, Vec<VarId>) {
    let ids: Vec<VarId> = net.var_ids().collect();
    let mut query: Vec<VarId> = ids.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
    if query.is_empty() {
        query.push(*ids.choose(rng).expect("nonempty network"));
    }
    let k = rng.gen_range(0..=max_evidence.min(ids.len()));
    let mut evidence: Vec<VarId> = ids.choose_multiple(rng, k).copied().collect();
    evidence.sort();
    (query, evidence)
}

/// Every evidence function over the dag's evidence variables, each
/// variable ranging over its values and ⋄.
pub fn all_evidence(dag: &QDag) -> Vec<Evidence> {
    let mut out = alloc::vec![Evidence::unknown(dag)];
    for (i, var) in dag.evidence_vars().iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * (var.values.len() + 1));
        for e in &out {
            next.push(e.clone());
            for v in 0..var.values.len() {
                let mut e = e.clone();
                e.set(EvarId(i), Some(v));
                next.push(e);
            }
        }
        out = next;
    }
    out
}

/// The network instantiation named by a dag's evidence function.
pub fn instantiation_of(net: &BeliefNetwork, dag: &QDag, evidence: &Evidence) -> Instantiation {
    let mut inst = Instantiation::new();
    for (i, var) in dag.evidence_vars().iter().enumerate() {
        if let Some(v) = evidence.get(EvarId(i)) {
            inst.bind(
                net.find(&var.name).expect("evidence variable in network"),
                v,
            );
        }
    }
    inst
}

/// Brute-force marginals from a precomputed joint table, for sweeps that
/// query the same network under many evidence functions.
#[derive(Debug, Clone)]
pub struct JointTable {
    assignments: Vec<Vec<usize>>,
    joint: Vec<f64>,
}

impl JointTable {
    pub fn new(net: &BeliefNetwork) -> Self {
        let all: Vec<VarId> = net.var_ids().collect();
        let assignments = instantiations(net, &all);
        let joint = assignments
            .iter()
            .map(|a| {
                let mut full = Instantiation::new();
                for (i, &x) in a.iter().enumerate() {
                    full.bind(VarId(i), x);
                }
                joint_probability(net, &full).expect("full instantiation")
            })
            .collect();
        JointTable { assignments, joint }
    }

    /// `Pr(var = x, e)` for every `x`, summed in the same order as
    /// [`crate::oracle::marginals_bruteforce`].
    pub fn marginal(&self, net: &BeliefNetwork, var: VarId, evidence: &Instantiation) -> Vec<f64> {
        let mut table = alloc::vec![0.0; net.cardinality(var)];
        for (a, p) in self.assignments.iter().zip(&self.joint) {
            if evidence.iter().all(|(v, x)| a[v.0] == x) {
                table[a[var.0]] += p;
            }
        }
        table
    }
}

/// `|a - b| <= tol * max(|a|, |b|)`.
pub fn close_relative(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn binary_network(cpts: &[(&str, &[&str], &[f64])], values: [&str; 2]) -> BeliefNetwork {
    let mut b = NetworkBuilder::new();
    for (name, _, _) in cpts {
        b.variable(*name, values);
    }
    for (name, parents, table) in cpts {
        b.cpt(*name, parents.iter().copied(), table.to_vec());
    }
    b.build().expect("example network is valid")
}

/// A → B, A → C.
pub fn fork() -> BeliefNetwork {
    binary_network(
        &[
            ("A", &[], &[0.3, 0.7]),
            ("B", &["A"], &[0.25, 0.75, 0.8, 0.2]),
            ("C", &["A"], &[0.9, 0.1, 0.5, 0.5]),
        ],
        ["ON", "OFF"],
    )
}

/// A → B over {true, false}.
pub fn pair() -> BeliefNetwork {
    binary_network(
        &[
            ("A", &[], &[0.3, 0.7]),
            ("B", &["A"], &[0.1, 0.9, 0.8, 0.2]),
        ],
        ["true", "false"],
    )
}

/// A → B → C. Rows are dyadic so each sums to exactly 1 in floating point.
pub fn chain3() -> BeliefNetwork {
    binary_network(
        &[
            ("A", &[], &[0.25, 0.75]),
            ("B", &["A"], &[0.625, 0.375, 0.125, 0.875]),
            ("C", &["B"], &[0.5, 0.5, 0.1875, 0.8125]),
        ],
        ["T", "F"],
    )
}

/// A → B → C → D with dyadic rows.
pub fn chain4() -> BeliefNetwork {
    binary_network(
        &[
            ("A", &[], &[0.25, 0.75]),
            ("B", &["A"], &[0.625, 0.375, 0.125, 0.875]),
            ("C", &["B"], &[0.5, 0.5, 0.1875, 0.8125]),
            ("D", &["C"], &[0.375, 0.625, 0.9375, 0.0625]),
        ],
        ["T", "F"],
    )
}
