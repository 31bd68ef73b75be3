//! Numeric reference inference.
//!
//! [`joint_probability`] and [`marginals_bruteforce`] define `Pr(x, e)` by
//! enumeration. [`cluster_infer`] is the textbook join tree algorithm:
//! cluster potentials are products of CPTs and likelihood vectors, messages
//! are collected toward the lowest-id cluster containing the query variable,
//! and every scalar operation is logged in an [`OpCounter`] so the compiler's
//! node constructions can be compared against it.

use alloc::vec;
use alloc::vec::Vec;

use crate::jointree::JoinTree;
use crate::network::{instantiations, BeliefNetwork, Instantiation, NetworkError, VarId};
use crate::qdag::{OpKind, OpRecord};
use crate::table::{self, Layout};

/// Dense table of numbers over a scope.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericPotential {
    pub layout: Layout,
    pub table: Vec<f64>,
}

impl NumericPotential {
    pub fn scope(&self) -> &[VarId] {
        &self.layout.scope
    }

    /// Value at a full assignment of the scope.
    pub fn get(&self, assignment: &[usize]) -> f64 {
        self.table[self.layout.index_of(assignment)]
    }

    fn unit() -> Self {
        NumericPotential {
            layout: Layout::default(),
            table: vec![1.0],
        }
    }
}

/// Log of the arithmetic performed by [`cluster_infer`]. An `n`-ary product
/// or sum counts as one operation of arity `n`; operations over a single
/// argument are not performed and not logged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub multiplications: usize,
    pub additions: usize,
    pub trace: Vec<OpRecord>,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    fn record(&mut self, kind: OpKind, arity: usize) {
        match kind {
            OpKind::Mul => self.multiplications += 1,
            OpKind::Add => self.additions += 1,
        }
        self.trace.push(OpRecord { kind, arity });
    }
}

/// `∏_X Pr(x | parents)` for a full instantiation.
pub fn joint_probability(net: &BeliefNetwork, full: &Instantiation) -> Result<f64, NetworkError> {
    full.validate(net)?;
    let mut product = 1.0;
    for v in net.var_ids() {
        product *= net
            .conditional(v, full)
            .ok_or_else(|| NetworkError::UnknownVariable(net.name(v).into()))?;
    }
    Ok(product)
}

/// `Pr(x, e)` for every value `x` of `var`, by summing the joint over all
/// full instantiations consistent with `x` and `e`.
pub fn marginals_bruteforce(
    net: &BeliefNetwork,
    var: VarId,
    evidence: &Instantiation,
) -> NumericPotential {
    let all: Vec<VarId> = net.var_ids().collect();
    let mut table = vec![0.0; net.cardinality(var)];
    for assignment in instantiations(net, &all) {
        if evidence.iter().any(|(v, value)| assignment[v.0] != value) {
            continue;
        }
        let mut full = Instantiation::new();
        for (i, &a) in assignment.iter().enumerate() {
            full.bind(VarId(i), a);
        }
        table[assignment[var.0]] += joint_probability(net, &full).expect("full instantiation");
    }
    NumericPotential {
        layout: Layout::new(vec![var], vec![net.cardinality(var)]),
        table,
    }
}

pub fn multiply(inputs: &[&NumericPotential], counter: &mut OpCounter) -> NumericPotential {
    assert!(!inputs.is_empty(), "multiply needs at least one potential");
    if inputs.len() == 1 {
        return inputs[0].clone();
    }
    let layouts: Vec<&Layout> = inputs.iter().map(|p| &p.layout).collect();
    let layout = table::union(&layouts);
    let plan = table::product_plan(&layout, &layouts);
    let table = plan
        .iter()
        .map(|cells| {
            counter.record(OpKind::Mul, cells.len());
            let mut values = cells.iter().zip(inputs).map(|(&c, p)| p.table[c]);
            let first = values.next().expect("nonempty");
            values.fold(first, |acc, x| acc * x)
        })
        .collect();
    NumericPotential { layout, table }
}

/// Sums out every variable not in `keep`. Returns `None` if `keep` is not a
/// subset of the scope.
pub fn marginalize(
    p: &NumericPotential,
    keep: &[VarId],
    counter: &mut OpCounter,
) -> Option<NumericPotential> {
    let layout = table::restrict(&p.layout, keep)?;
    if layout.scope.len() == p.layout.scope.len() {
        return Some(p.clone());
    }
    let table = table::marginal_plan(&p.layout, &layout)
        .iter()
        .map(|cells| {
            if cells.len() > 1 {
                counter.record(OpKind::Add, cells.len());
            }
            let mut values = cells.iter().map(|&c| p.table[c]);
            let first = values.next().expect("nonempty");
            values.fold(first, |acc, x| acc + x)
        })
        .collect();
    Some(NumericPotential { layout, table })
}

fn cpt_potential(net: &BeliefNetwork, v: VarId) -> NumericPotential {
    let scope = net.family(v);
    let cards = scope.iter().map(|s| net.cardinality(*s)).collect();
    NumericPotential {
        layout: Layout::new(scope, cards),
        table: net.cpt(v).table.clone(),
    }
}

/// `λ_X(x)`: 1 when `x` agrees with the evidence (or `X` is unobserved).
fn likelihood(net: &BeliefNetwork, v: VarId, evidence: &Instantiation) -> NumericPotential {
    let card = net.cardinality(v);
    let table = (0..card)
        .map(|x| match evidence.get(v) {
            Some(observed) if observed != x => 0.0,
            _ => 1.0,
        })
        .collect();
    NumericPotential {
        layout: Layout::new(vec![v], vec![card]),
        table,
    }
}

/// Initial cluster potentials `Ψ_i = ∏ Pr_X λ_X` over the families
/// assigned to each cluster, in cluster order.
pub fn cluster_potentials(
    net: &BeliefNetwork,
    jt: &JoinTree,
    evidence: &Instantiation,
    counter: &mut OpCounter,
) -> Vec<NumericPotential> {
    jt.clusters
        .iter()
        .map(|cluster| {
            if cluster.families.is_empty() {
                return NumericPotential::unit();
            }
            let mut factors: Vec<NumericPotential> = cluster
                .families
                .iter()
                .map(|&v| cpt_potential(net, v))
                .collect();
            factors.extend(
                cluster
                    .families
                    .iter()
                    .map(|&v| likelihood(net, v, evidence)),
            );
            let refs: Vec<&NumericPotential> = factors.iter().collect();
            multiply(&refs, counter)
        })
        .collect()
}

/// `Pr(var, e)` by join tree propagation toward the pivot cluster of `var`.
pub fn cluster_infer(
    net: &BeliefNetwork,
    jt: &JoinTree,
    var: VarId,
    evidence: &Instantiation,
    counter: &mut OpCounter,
) -> NumericPotential {
    let potentials = cluster_potentials(net, jt, evidence, counter);
    let pivot = jt.pivot(var).expect("every variable lies in a cluster");
    let mut messages: Vec<Vec<Option<NumericPotential>>> = vec![vec![None; jt.len()]; jt.len()];

    let gather = |cluster: usize,
                  except: Option<usize>,
                  messages: &Vec<Vec<Option<NumericPotential>>>,
                  counter: &mut OpCounter| {
        let mut inputs = vec![&potentials[cluster]];
        for k in jt.incoming(cluster, except) {
            inputs.push(messages[k][cluster].as_ref().expect("scheduled earlier"));
        }
        multiply(&inputs, counter)
    };

    for (from, to) in jt.collect_schedule(pivot) {
        let product = gather(from, Some(to), &messages, counter);
        let target = &jt.clusters[to];
        let keep: Vec<VarId> = product
            .scope()
            .iter()
            .copied()
            .filter(|v| target.contains(*v))
            .collect();
        let message = marginalize(&product, &keep, counter).expect("keep is a subset");
        messages[from][to] = Some(message);
    }

    let posterior = gather(pivot, None, &messages, counter);
    marginalize(&posterior, &[var], counter).expect("query variable reaches its pivot")
}
