//! Symbolic join tree propagation: the clustering algorithm run over Q-DAG
//! nodes instead of numbers.
//!
//! CPT entries become numeric leaves, the likelihood vector of each evidence
//! variable becomes its ESNs, and every product or sum the numeric algorithm
//! would perform becomes a node constructor. The message schedule is the one
//! [`crate::oracle::cluster_infer`] uses, so the sequence of node
//! constructions matches the oracle's operation trace one for one.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::jointree::JoinTree;
use crate::network::{BeliefNetwork, VarId};
use crate::qdag::{EvarId, Leaf, NodeId, OpKind, OpRecord, QDag, QDagError};
use crate::table::{self, Layout};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("no query variables")]
    EmptyQuery,
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error(transparent)]
    Dag(#[from] QDagError),
}

/// Mapping from instantiations of a scope to Q-DAG nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicPotential {
    pub layout: Layout,
    pub table: Vec<NodeId>,
}

impl SymbolicPotential {
    pub fn scope(&self) -> &[VarId] {
        &self.layout.scope
    }

    pub fn get(&self, assignment: &[usize]) -> NodeId {
        self.table[self.layout.index_of(assignment)]
    }
}

/// Records every operation node construction request of arity two or more,
/// whether or not hash-consing finds an existing node.
struct Builder<'a> {
    dag: &'a mut QDag,
    trace: Vec<OpRecord>,
}

impl Builder<'_> {
    fn op(&mut self, kind: OpKind, operands: &[NodeId]) -> NodeId {
        if operands.len() > 1 {
            self.trace.push(OpRecord {
                kind,
                arity: operands.len(),
            });
        }
        self.dag
            .make_op(kind, operands)
            .expect("operands come from the same dag")
    }

    fn multiply(&mut self, inputs: &[&SymbolicPotential]) -> SymbolicPotential {
        assert!(!inputs.is_empty(), "multiply needs at least one potential");
        if inputs.len() == 1 {
            return inputs[0].clone();
        }
        let layouts: Vec<&Layout> = inputs.iter().map(|p| &p.layout).collect();
        let layout = table::union(&layouts);
        let table = table::product_plan(&layout, &layouts)
            .iter()
            .map(|cells| {
                let operands: Vec<NodeId> =
                    cells.iter().zip(inputs).map(|(&c, p)| p.table[c]).collect();
                self.op(OpKind::Mul, &operands)
            })
            .collect();
        SymbolicPotential { layout, table }
    }

    fn marginalize(&mut self, p: &SymbolicPotential, keep: &[VarId]) -> Option<SymbolicPotential> {
        let layout = table::restrict(&p.layout, keep)?;
        if layout.scope.len() == p.layout.scope.len() {
            return Some(p.clone());
        }
        let table = table::marginal_plan(&p.layout, &layout)
            .iter()
            .map(|cells| {
                let operands: Vec<NodeId> = cells.iter().map(|&c| p.table[c]).collect();
                self.op(OpKind::Add, &operands)
            })
            .collect();
        Some(SymbolicPotential { layout, table })
    }
}

/// Cell-wise product of potentials over the ordered union of their scopes.
/// Each cell is one product node whose operands are the compatible cells of
/// the inputs, in input order.
pub fn symbolic_multiply(dag: &mut QDag, inputs: &[&SymbolicPotential]) -> SymbolicPotential {
    Builder {
        dag,
        trace: Vec::new(),
    }
    .multiply(inputs)
}

/// Sums out every variable not in `keep`; `None` if `keep` is not a subset
/// of the scope.
pub fn symbolic_marginalize(
    dag: &mut QDag,
    p: &SymbolicPotential,
    keep: &[VarId],
) -> Option<SymbolicPotential> {
    Builder {
        dag,
        trace: Vec::new(),
    }
    .marginalize(p, keep)
}

fn cpt_potential(dag: &mut QDag, net: &BeliefNetwork, v: VarId) -> SymbolicPotential {
    let scope = net.family(v);
    let cards = scope.iter().map(|s| net.cardinality(*s)).collect();
    let table = net
        .cpt(v)
        .table
        .iter()
        .map(|&p| dag.make_leaf(Leaf::Num(p)).expect("validated CPT entry"))
        .collect();
    SymbolicPotential {
        layout: Layout::new(scope, cards),
        table,
    }
}

fn likelihood_potential(
    dag: &mut QDag,
    net: &BeliefNetwork,
    v: VarId,
    evar: EvarId,
) -> SymbolicPotential {
    let card = net.cardinality(v);
    let table = (0..card)
        .map(|value| {
            dag.make_leaf(Leaf::Esn { var: evar, value })
                .expect("registered")
        })
        .collect();
    SymbolicPotential {
        layout: Layout::new(vec![v], vec![card]),
        table,
    }
}

/// Registers the evidence variables (in network order) and returns the
/// registry slot of each network variable.
fn register_evidence(
    dag: &mut QDag,
    net: &BeliefNetwork,
    evidence: &[VarId],
) -> Result<Vec<Option<EvarId>>, CompileError> {
    let mut slots = vec![None; net.len()];
    for v in net.var_ids().filter(|v| evidence.contains(v)) {
        let var = net.variable(v);
        slots[v.0] = Some(dag.register_evidence_var(var.name.clone(), var.values.clone())?);
    }
    Ok(slots)
}

/// `Ψ_i`: for each cluster, the product of the numeric CPT potentials of
/// its assigned families followed by the ESN vectors of those families that
/// are evidence variables. A cluster with nothing assigned gets the scalar 1.
pub fn init_symbolic_potentials(
    dag: &mut QDag,
    net: &BeliefNetwork,
    jt: &JoinTree,
    evidence: &[VarId],
) -> Result<Vec<SymbolicPotential>, CompileError> {
    let slots = register_evidence(dag, net, evidence)?;
    let mut builder = Builder {
        dag,
        trace: Vec::new(),
    };
    Ok(init_potentials(&mut builder, net, jt, &slots))
}

fn init_potentials(
    builder: &mut Builder<'_>,
    net: &BeliefNetwork,
    jt: &JoinTree,
    slots: &[Option<EvarId>],
) -> Vec<SymbolicPotential> {
    jt.clusters
        .iter()
        .map(|cluster| {
            if cluster.families.is_empty() {
                let one = builder.dag.make_num(1.0).expect("unit");
                return SymbolicPotential {
                    layout: Layout::default(),
                    table: vec![one],
                };
            }
            let mut factors: Vec<SymbolicPotential> = cluster
                .families
                .iter()
                .map(|&v| cpt_potential(builder.dag, net, v))
                .collect();
            for &v in &cluster.families {
                if let Some(evar) = slots[v.0] {
                    factors.push(likelihood_potential(builder.dag, net, v, evar));
                }
            }
            let refs: Vec<&SymbolicPotential> = factors.iter().collect();
            builder.multiply(&refs)
        })
        .collect()
}

/// A compiled dag with the join tree it was built on and the sequence of
/// operation constructions performed.
#[derive(Debug, Clone)]
pub struct Compilation {
    pub dag: QDag,
    pub jointree: JoinTree,
    pub trace: Vec<OpRecord>,
}

/// Compiles `net` into a Q-DAG answering `Pr(x, e)` for every value `x` of
/// each query variable and every evidence `e` over `evidence`.
pub fn compile(
    net: &BeliefNetwork,
    query: &[VarId],
    evidence: &[VarId],
) -> Result<QDag, CompileError> {
    compile_traced(net, query, evidence).map(|c| c.dag)
}

/// [`compile`] with variables given by name.
pub fn compile_named(
    net: &BeliefNetwork,
    query: &[&str],
    evidence: &[&str],
) -> Result<QDag, CompileError> {
    let resolve = |names: &[&str]| -> Result<Vec<VarId>, CompileError> {
        names
            .iter()
            .map(|n| {
                net.find(n)
                    .ok_or_else(|| CompileError::UnknownVariable((*n).into()))
            })
            .collect()
    };
    compile(net, &resolve(query)?, &resolve(evidence)?)
}

pub fn compile_traced(
    net: &BeliefNetwork,
    query: &[VarId],
    evidence: &[VarId],
) -> Result<Compilation, CompileError> {
    if query.is_empty() {
        return Err(CompileError::EmptyQuery);
    }
    if let Some(bad) = query.iter().chain(evidence).find(|v| v.0 >= net.len()) {
        return Err(CompileError::UnknownVariable(alloc::format!("#{}", bad.0)));
    }

    let jt = JoinTree::build(net);
    let mut dag = QDag::new();
    let slots = register_evidence(&mut dag, net, evidence)?;
    let mut builder = Builder {
        dag: &mut dag,
        trace: Vec::new(),
    };
    let potentials = init_potentials(&mut builder, net, &jt, &slots);

    let mut messages: Vec<Vec<Option<SymbolicPotential>>> = vec![vec![None; jt.len()]; jt.len()];
    let mut posteriors: Vec<Option<SymbolicPotential>> = vec![None; jt.len()];
    let mut queries = Vec::new();

    fn gather(
        builder: &mut Builder<'_>,
        jt: &JoinTree,
        potentials: &[SymbolicPotential],
        messages: &[Vec<Option<SymbolicPotential>>],
        cluster: usize,
        except: Option<usize>,
    ) -> SymbolicPotential {
        let mut inputs = vec![&potentials[cluster]];
        for k in jt.incoming(cluster, except) {
            inputs.push(messages[k][cluster].as_ref().expect("scheduled earlier"));
        }
        builder.multiply(&inputs)
    }

    for x in net.var_ids().filter(|v| query.contains(v)) {
        let pivot = jt.pivot(x).expect("every variable lies in a cluster");
        for (from, to) in jt.collect_schedule(pivot) {
            if messages[from][to].is_some() {
                continue;
            }
            let product = gather(&mut builder, &jt, &potentials, &messages, from, Some(to));
            let target = &jt.clusters[to];
            let keep: Vec<VarId> = product
                .scope()
                .iter()
                .copied()
                .filter(|v| target.contains(*v))
                .collect();
            messages[from][to] = builder.marginalize(&product, &keep);
        }
        if posteriors[pivot].is_none() {
            posteriors[pivot] = Some(gather(
                &mut builder,
                &jt,
                &potentials,
                &messages,
                pivot,
                None,
            ));
        }
        let posterior = posteriors[pivot].as_ref().expect("just computed");
        let qnode = builder
            .marginalize(posterior, &[x])
            .expect("query variable reaches its pivot");
        for (value, &node) in net.variable(x).values.iter().zip(&qnode.table) {
            queries.push((net.name(x), value.clone(), node));
        }
    }

    let trace = builder.trace;
    for (var, value, node) in queries {
        dag.add_query(var, value, node)?;
    }
    Ok(Compilation {
        dag,
        jointree: jt,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkBuilder;
    use crate::qdag::{Evidence, Node};

    fn fork() -> BeliefNetwork {
        let mut b = NetworkBuilder::new();
        b.variable("A", ["ON", "OFF"])
            .variable("B", ["ON", "OFF"])
            .variable("C", ["ON", "OFF"])
            .cpt("A", [] as [&str; 0], [0.3, 0.7])
            .cpt("B", ["A"], [0.25, 0.75, 0.8, 0.2])
            .cpt("C", ["A"], [0.9, 0.1, 0.5, 0.5]);
        b.build().unwrap()
    }

    #[test]
    fn fork_cluster_potentials() {
        let net = fork();
        let jt = JoinTree::build(&net);
        let mut dag = QDag::new();
        let c = net.find("C").unwrap();
        let psi = init_symbolic_potentials(&mut dag, &net, &jt, &[c]).unwrap();
        // {A,C}: n(.9)*n(C,ON), n(.1)*n(C,OFF), n(.5)*n(C,ON), n(.5)*n(C,OFF)
        let on = dag.make_esn("C", "ON").unwrap();
        let off = dag.make_esn("C", "OFF").unwrap();
        let expect = [(0.9, on), (0.1, off), (0.5, on), (0.5, off)];
        for (cell, (p, esn)) in psi[1].table.iter().zip(expect) {
            let Node::Mul(ops) = dag.node(*cell) else {
                panic!("product expected")
            };
            assert_eq!(ops.len(), 2);
            assert_eq!(dag.node(ops[0]).as_num(), Some(p));
            assert_eq!(ops[1], esn);
        }
        // {A,B}: Pr_A * Pr_B, evaluating to .075, .225, .56, .14
        let values = dag.node_values(&Evidence::unknown(&dag));
        for (cell, p) in psi[0].table.iter().zip([0.075, 0.225, 0.56, 0.14]) {
            assert!((values[cell.0] - p).abs() < 1e-15);
        }
    }

    #[test]
    fn three_valued_evidence_adds_three_esns() {
        let mut b = NetworkBuilder::new();
        b.variable("X", ["a", "b"])
            .variable("S", ["lo", "mid", "hi"])
            .cpt("X", [] as [&str; 0], [0.4, 0.6])
            .cpt("S", ["X"], [0.2, 0.3, 0.5, 0.6, 0.3, 0.1]);
        let net = b.build().unwrap();
        let dag = compile_named(&net, &["X"], &["S"]).unwrap();
        let esns = dag
            .nodes()
            .iter()
            .filter(|n| matches!(n, Node::Esn { .. }))
            .count();
        assert_eq!(esns, 3);
    }

    #[test]
    fn no_evidence_means_numeric_roots_only() {
        let net = fork();
        let dag = compile_named(&net, &["B"], &[]).unwrap();
        assert!(dag.nodes().iter().all(|n| !matches!(n, Node::Esn { .. })));
        let out = dag.evaluate(&Evidence::unknown(&dag));
        assert!((out.get("B", "ON").unwrap() - 0.635).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_requests() {
        let net = fork();
        assert_eq!(
            compile_named(&net, &[], &["C"]).unwrap_err(),
            CompileError::EmptyQuery
        );
        assert!(matches!(
            compile_named(&net, &["Q"], &["C"]),
            Err(CompileError::UnknownVariable(_))
        ));
    }

    #[test]
    fn multiply_by_scalar_adds_one_operand() {
        let mut dag = QDag::new();
        let a = dag.make_num(0.2).unwrap();
        let b = dag.make_num(0.8).unwrap();
        let s = dag.make_num(0.5).unwrap();
        let p = SymbolicPotential {
            layout: Layout::new(vec![VarId(0)], vec![2]),
            table: vec![a, b],
        };
        let scalar = SymbolicPotential {
            layout: Layout::default(),
            table: vec![s],
        };
        let out = symbolic_multiply(&mut dag, &[&p, &scalar]);
        assert_eq!(out.layout, p.layout);
        assert_eq!(dag.node(out.table[1]), &Node::Mul(vec![b, s]));
        let all = symbolic_marginalize(&mut dag, &p, &[]).unwrap();
        assert_eq!(dag.node(all.table[0]), &Node::Add(vec![a, b]));
        assert_eq!(symbolic_marginalize(&mut dag, &p, &[VarId(0)]).unwrap(), p);
        assert!(symbolic_marginalize(&mut dag, &p, &[VarId(5)]).is_none());
    }
}
