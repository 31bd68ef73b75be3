//! The query DAG: a hash-consed store of numeric leaves, evidence-specific
//! nodes (ESNs) and n-ary product/sum nodes, with a registry of evidence
//! variables and named query nodes.
//!
//! Node ids are dense and topologically ordered (operands always have
//! smaller ids), so evaluation is a single forward pass over the store.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::network::UNKNOWN_TOKEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of an evidence variable in the registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EvarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpKind {
    Mul,
    Add,
}

/// Kind and arity of one arithmetic operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpRecord {
    pub kind: OpKind,
    pub arity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Esn { var: EvarId, value: usize },
    Mul(Vec<NodeId>),
    Add(Vec<NodeId>),
}

impl Node {
    pub fn op(kind: OpKind, operands: Vec<NodeId>) -> Node {
        match kind {
            OpKind::Mul => Node::Mul(operands),
            OpKind::Add => Node::Add(operands),
        }
    }

    pub fn as_op(&self) -> Option<(OpKind, &[NodeId])> {
        match self {
            Node::Mul(ops) => Some((OpKind::Mul, ops)),
            Node::Add(ops) => Some((OpKind::Add, ops)),
            _ => None,
        }
    }

    pub fn operands(&self) -> &[NodeId] {
        self.as_op().map_or(&[], |(_, ops)| ops)
    }

    pub fn is_op(&self) -> bool {
        self.as_op().is_some()
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Node::Num(p) => Some(*p),
            _ => None,
        }
    }
}

/// A root node: a number in `[0, 1]` or an evidence indicator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Leaf {
    Num(f64),
    Esn { var: EvarId, value: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Num(u64),
    Esn(EvarId, usize),
    Op(OpKind, Vec<NodeId>),
}

impl Key {
    fn of(node: &Node) -> Key {
        match node {
            Node::Num(p) => Key::Num(p.to_bits()),
            Node::Esn { var, value } => Key::Esn(*var, *value),
            Node::Mul(ops) => Key::Op(OpKind::Mul, ops.clone()),
            Node::Add(ops) => Key::Op(OpKind::Add, ops.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceVar {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryNode {
    pub variable: String,
    pub value: String,
    pub node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QDagError {
    #[error("number {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("unknown evidence variable {0}")]
    UnknownVariable(String),
    #[error("evidence variable {variable} has no value {value}")]
    UnknownValue { variable: String, value: String },
    #[error("evidence variable {0} registered twice")]
    DuplicateVariable(String),
    #[error("evidence variable {0} has an invalid value list")]
    InvalidValues(String),
    #[error("operation node needs at least one operand")]
    EmptyOperands,
    #[error("node id {0} does not exist")]
    InvalidNode(usize),
    #[error("forward reference: node {node} uses node {operand}")]
    ForwardReference { node: usize, operand: usize },
    #[error("duplicate evidence-specific node for {variable}={value}")]
    DuplicateEsn { variable: String, value: String },
    #[error("query {variable}={value} registered twice")]
    DuplicateQuery { variable: String, value: String },
    #[error("{0} is not a query variable")]
    NotQueryVariable(String),
    #[error("evidence has zero probability")]
    ZeroProbability,
}

#[derive(Debug, Clone, Default)]
pub struct QDag {
    evars: Vec<EvidenceVar>,
    nodes: Vec<Node>,
    queries: Vec<QueryNode>,
    index: BTreeMap<Key, NodeId>,
}

/// Structural equality: registry, node store and query bindings.
impl PartialEq for QDag {
    fn eq(&self, other: &Self) -> bool {
        self.evars == other.evars && self.nodes == other.nodes && self.queries == other.queries
    }
}

impl QDag {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a dag from its parts, checking every structural invariant.
    /// Nodes are taken verbatim: ids are positions, nothing is re-shared.
    pub fn from_parts(
        evars: Vec<EvidenceVar>,
        nodes: Vec<Node>,
        queries: Vec<QueryNode>,
    ) -> Result<QDag, QDagError> {
        let mut dag = QDag::new();
        for var in evars {
            dag.register_evidence_var(var.name, var.values)?;
        }
        for (id, node) in nodes.into_iter().enumerate() {
            match &node {
                Node::Num(p) => check_probability(*p)?,
                Node::Esn { var, value } => {
                    let evar = dag
                        .evars
                        .get(var.0)
                        .ok_or_else(|| QDagError::UnknownVariable(alloc::format!("#{}", var.0)))?;
                    let value_name =
                        evar.values
                            .get(*value)
                            .ok_or_else(|| QDagError::UnknownValue {
                                variable: evar.name.clone(),
                                value: alloc::format!("#{value}"),
                            })?;
                    if dag.index.contains_key(&Key::of(&node)) {
                        return Err(QDagError::DuplicateEsn {
                            variable: evar.name.clone(),
                            value: value_name.clone(),
                        });
                    }
                }
                Node::Mul(ops) | Node::Add(ops) => {
                    if ops.is_empty() {
                        return Err(QDagError::EmptyOperands);
                    }
                    if let Some(bad) = ops.iter().find(|o| o.0 >= id) {
                        return Err(QDagError::ForwardReference {
                            node: id,
                            operand: bad.0,
                        });
                    }
                }
            }
            dag.index.entry(Key::of(&node)).or_insert(NodeId(id));
            dag.nodes.push(node);
        }
        for q in queries {
            dag.add_query(q.variable, q.value, q.node)?;
        }
        Ok(dag)
    }

    /// An empty dag sharing `other`'s evidence registry.
    pub fn with_registry(other: &QDag) -> QDag {
        QDag {
            evars: other.evars.clone(),
            ..QDag::default()
        }
    }

    pub fn register_evidence_var<S: Into<String>>(
        &mut self,
        name: impl Into<String>,
        values: impl IntoIterator<Item = S>,
    ) -> Result<EvarId, QDagError> {
        let name = name.into();
        let values: Vec<String> = values.into_iter().map(Into::into).collect();
        if self.evars.iter().any(|v| v.name == name) {
            return Err(QDagError::DuplicateVariable(name));
        }
        let distinct = values.iter().collect::<BTreeSet<_>>().len() == values.len();
        if name.is_empty()
            || values.is_empty()
            || !distinct
            || values.iter().any(|v| v == UNKNOWN_TOKEN)
        {
            return Err(QDagError::InvalidValues(name));
        }
        self.evars.push(EvidenceVar { name, values });
        Ok(EvarId(self.evars.len() - 1))
    }

    pub fn evidence_vars(&self) -> &[EvidenceVar] {
        &self.evars
    }

    pub fn evidence_var(&self, name: &str) -> Option<EvarId> {
        self.evars.iter().position(|v| v.name == name).map(EvarId)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn queries(&self) -> &[QueryNode] {
        &self.queries
    }

    pub fn query_node(&self, variable: &str, value: &str) -> Option<NodeId> {
        self.queries
            .iter()
            .find(|q| q.variable == variable && q.value == value)
            .map(|q| q.node)
    }

    /// Query variables in order of first registration.
    pub fn query_variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for q in &self.queries {
            if !out.contains(&q.variable.as_str()) {
                out.push(&q.variable);
            }
        }
        out
    }

    fn intern(&mut self, node: Node) -> NodeId {
        let key = Key::of(&node);
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(node);
        self.index.insert(key, id);
        id
    }

    /// Returns the node for a leaf, creating it only if no identical leaf
    /// exists.
    pub fn make_leaf(&mut self, leaf: Leaf) -> Result<NodeId, QDagError> {
        match leaf {
            Leaf::Num(p) => {
                check_probability(p)?;
                // one node for zero, whatever its sign
                Ok(self.intern(Node::Num(if p == 0.0 { 0.0 } else { p })))
            }
            Leaf::Esn { var, value } => {
                let evar = self
                    .evars
                    .get(var.0)
                    .ok_or_else(|| QDagError::UnknownVariable(alloc::format!("#{}", var.0)))?;
                if value >= evar.values.len() {
                    return Err(QDagError::UnknownValue {
                        variable: evar.name.clone(),
                        value: alloc::format!("#{value}"),
                    });
                }
                Ok(self.intern(Node::Esn { var, value }))
            }
        }
    }

    pub fn make_num(&mut self, p: f64) -> Result<NodeId, QDagError> {
        self.make_leaf(Leaf::Num(p))
    }

    /// ESN for `(variable, value)` looked up by name.
    pub fn make_esn(&mut self, variable: &str, value: &str) -> Result<NodeId, QDagError> {
        let var = self
            .evidence_var(variable)
            .ok_or_else(|| QDagError::UnknownVariable(variable.into()))?;
        let value = self.evars[var.0]
            .values
            .iter()
            .position(|v| v == value)
            .ok_or_else(|| QDagError::UnknownValue {
                variable: variable.into(),
                value: value.into(),
            })?;
        self.make_leaf(Leaf::Esn { var, value })
    }

    /// Product or sum of `operands`, in the given order. A single operand is
    /// returned as is.
    pub fn make_op(&mut self, kind: OpKind, operands: &[NodeId]) -> Result<NodeId, QDagError> {
        if operands.is_empty() {
            return Err(QDagError::EmptyOperands);
        }
        if let Some(bad) = operands.iter().find(|o| o.0 >= self.nodes.len()) {
            return Err(QDagError::InvalidNode(bad.0));
        }
        if operands.len() == 1 {
            return Ok(operands[0]);
        }
        Ok(self.intern(Node::op(kind, operands.to_vec())))
    }

    pub fn add_query(
        &mut self,
        variable: impl Into<String>,
        value: impl Into<String>,
        node: NodeId,
    ) -> Result<(), QDagError> {
        let (variable, value) = (variable.into(), value.into());
        if node.0 >= self.nodes.len() {
            return Err(QDagError::InvalidNode(node.0));
        }
        if self.query_node(&variable, &value).is_some() {
            return Err(QDagError::DuplicateQuery { variable, value });
        }
        self.queries.push(QueryNode {
            variable,
            value,
            node,
        });
        Ok(())
    }

    /// Value of every node under `evidence`, computed in id order.
    pub fn node_values(&self, evidence: &Evidence) -> Vec<f64> {
        let mut values = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = node_value(node, evidence, &values);
            values.push(v);
        }
        values
    }

    pub fn evaluate(&self, evidence: &Evidence) -> Output {
        let values = self.node_values(evidence);
        self.output_from(&values)
    }

    fn output_from(&self, values: &[f64]) -> Output {
        Output {
            entries: self
                .queries
                .iter()
                .map(|q| OutputEntry {
                    variable: q.variable.clone(),
                    value: q.value.clone(),
                    probability: values[q.node.0],
                })
                .collect(),
        }
    }

    /// Nodes that some query node depends on.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        for q in &self.queries {
            seen[q.node.0] = true;
        }
        for id in (0..self.nodes.len()).rev() {
            if seen[id] {
                for op in self.nodes[id].operands() {
                    seen[op.0] = true;
                }
            }
        }
        seen
    }

    /// A copy holding only nodes reachable from query nodes, renumbered in
    /// their original relative order.
    pub fn collect_garbage(&self) -> QDag {
        let keep = self.reachable();
        let mut remap = vec![NodeId(usize::MAX); self.nodes.len()];
        let mut out = QDag::with_registry(self);
        for (id, node) in self.nodes.iter().enumerate() {
            if !keep[id] {
                continue;
            }
            let node = match node {
                Node::Mul(ops) => Node::Mul(ops.iter().map(|o| remap[o.0]).collect()),
                Node::Add(ops) => Node::Add(ops.iter().map(|o| remap[o.0]).collect()),
                leaf => leaf.clone(),
            };
            remap[id] = out.intern(node);
        }
        out.queries = self
            .queries
            .iter()
            .map(|q| QueryNode {
                node: remap[q.node.0],
                ..q.clone()
            })
            .collect();
        out
    }

    /// Ids of nodes depending on each node, ascending.
    pub fn dependents(&self) -> Vec<Vec<NodeId>> {
        let mut deps = vec![Vec::new(); self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            for op in node.operands() {
                if deps[op.0].last() != Some(&NodeId(id)) {
                    deps[op.0].push(NodeId(id));
                }
            }
        }
        deps
    }

    pub fn stats(&self) -> DagStats {
        let reachable = self.reachable();
        let mut stats = DagStats::default();
        for (node, live) in self.nodes.iter().zip(reachable) {
            if !live {
                continue;
            }
            stats.nodes += 1;
            match node {
                Node::Num(_) => stats.numeric += 1,
                Node::Esn { .. } => stats.esns += 1,
                Node::Mul(ops) | Node::Add(ops) => {
                    stats.operations += 1;
                    stats.operands += ops.len();
                }
            }
        }
        stats
    }
}

/// Counts over the nodes reachable from query nodes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DagStats {
    pub nodes: usize,
    pub numeric: usize,
    pub esns: usize,
    pub operations: usize,
    pub operands: usize,
}

fn check_probability(p: f64) -> Result<(), QDagError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(QDagError::ProbabilityOutOfRange(p))
    }
}

fn node_value(node: &Node, evidence: &Evidence, values: &[f64]) -> f64 {
    match node {
        Node::Num(p) => *p,
        Node::Esn { var, value } => match evidence.get(*var) {
            Some(observed) if observed != *value => 0.0,
            _ => 1.0,
        },
        Node::Mul(ops) => {
            let first = values[ops[0].0];
            ops[1..].iter().fold(first, |acc, o| acc * values[o.0])
        }
        Node::Add(ops) => {
            let first = values[ops[0].0];
            ops[1..].iter().fold(first, |acc, o| acc + values[o.0])
        }
    }
}

/// Observed value per evidence variable; `None` is the unknown value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evidence {
    values: Vec<Option<usize>>,
}

impl Evidence {
    /// Every evidence variable unknown.
    pub fn unknown(dag: &QDag) -> Self {
        Evidence {
            values: vec![None; dag.evars.len()],
        }
    }

    pub fn get(&self, var: EvarId) -> Option<usize> {
        self.values.get(var.0).copied().flatten()
    }

    pub fn set(&mut self, var: EvarId, value: Option<usize>) {
        self.values[var.0] = value;
    }

    /// Sets `variable` from its external spelling: a declared value or `?`.
    pub fn assign(&mut self, dag: &QDag, variable: &str, token: &str) -> Result<(), QDagError> {
        let (var, value) = resolve(dag, variable, token)?;
        self.set(var, value);
        Ok(())
    }

    pub fn with(mut self, dag: &QDag, variable: &str, token: &str) -> Result<Self, QDagError> {
        self.assign(dag, variable, token)?;
        Ok(self)
    }
}

fn resolve(dag: &QDag, variable: &str, token: &str) -> Result<(EvarId, Option<usize>), QDagError> {
    let var = dag
        .evidence_var(variable)
        .ok_or_else(|| QDagError::UnknownVariable(variable.into()))?;
    if token == UNKNOWN_TOKEN {
        return Ok((var, None));
    }
    let value = dag.evars[var.0]
        .values
        .iter()
        .position(|v| v == token)
        .ok_or_else(|| QDagError::UnknownValue {
            variable: variable.into(),
            value: token.into(),
        })?;
    Ok((var, Some(value)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputEntry {
    pub variable: String,
    pub value: String,
    pub probability: f64,
}

/// Values of the query nodes, in registration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub entries: Vec<OutputEntry>,
}

impl Output {
    pub fn get(&self, variable: &str, value: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.variable == variable && e.value == value)
            .map(|e| e.probability)
    }

    /// Entries of one query variable.
    pub fn distribution(&self, variable: &str) -> Vec<(&str, f64)> {
        self.entries
            .iter()
            .filter(|e| e.variable == variable)
            .map(|e| (e.value.as_str(), e.probability))
            .collect()
    }

    /// `Pr(variable | e)`: the entries of `variable` divided by their sum.
    pub fn conditional(&self, variable: &str) -> Result<Vec<(&str, f64)>, QDagError> {
        let entries = self.distribution(variable);
        if entries.is_empty() {
            return Err(QDagError::NotQueryVariable(variable.into()));
        }
        let total: f64 = entries.iter().map(|(_, p)| p).sum();
        if total <= 0.0 {
            return Err(QDagError::ZeroProbability);
        }
        Ok(entries.into_iter().map(|(v, p)| (v, p / total)).collect())
    }
}

impl fmt::Display for Output {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{}={} {}", e.variable, e.value, e.probability)?;
        }
        Ok(())
    }
}

/// Cached node values for event-driven re-evaluation.
#[derive(Debug, Clone)]
pub struct EvalState<'a> {
    dag: &'a QDag,
    values: Vec<f64>,
    dependents: Vec<Vec<NodeId>>,
    current: Evidence,
    esns: Vec<Vec<NodeId>>,
}

impl<'a> EvalState<'a> {
    pub fn new(dag: &'a QDag, evidence: Evidence) -> Self {
        let mut esns = vec![Vec::new(); dag.evars.len()];
        for (id, node) in dag.nodes.iter().enumerate() {
            if let Node::Esn { var, .. } = node {
                esns[var.0].push(NodeId(id));
            }
        }
        EvalState {
            dag,
            values: dag.node_values(&evidence),
            dependents: dag.dependents(),
            current: evidence,
            esns,
        }
    }

    pub fn output(&self) -> Output {
        self.dag.output_from(&self.values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn evidence(&self) -> &Evidence {
        &self.current
    }

    /// Changes one evidence variable and re-evaluates only what changed.
    /// Returns the new output and the number of operation nodes recomputed.
    pub fn update(&mut self, variable: &str, token: &str) -> Result<(Output, usize), QDagError> {
        let (var, value) = resolve(self.dag, variable, token)?;
        let recomputed = self.update_id(var, value);
        Ok((self.output(), recomputed))
    }

    pub fn update_id(&mut self, var: EvarId, value: Option<usize>) -> usize {
        if self.current.get(var) == value {
            return 0;
        }
        self.current.set(var, value);
        let mut pending = BTreeSet::new();
        for &esn in &self.esns[var.0] {
            let fresh = node_value(&self.dag.nodes[esn.0], &self.current, &self.values);
            if fresh != self.values[esn.0] {
                self.values[esn.0] = fresh;
                pending.extend(self.dependents[esn.0].iter().copied());
            }
        }
        let mut recomputed = 0;
        while let Some(id) = pending.pop_first() {
            recomputed += 1;
            let fresh = node_value(&self.dag.nodes[id.0], &self.current, &self.values);
            if fresh != self.values[id.0] {
                self.values[id.0] = fresh;
                pending.extend(self.dependents[id.0].iter().copied());
            }
        }
        recomputed
    }
}

impl fmt::Display for QDag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (id, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Num(p) => writeln!(f, "{id}: {p}")?,
                Node::Esn { var, value } => {
                    let evar = &self.evars[var.0];
                    writeln!(f, "{id}: ({}, {})", evar.name, evar.values[*value])?
                }
                Node::Mul(ops) | Node::Add(ops) => {
                    let sep = if matches!(node, Node::Mul(_)) {
                        " * "
                    } else {
                        " + "
                    };
                    let parts: Vec<String> = ops.iter().map(ToString::to_string).collect();
                    writeln!(f, "{id}: {}", parts.join(sep))?
                }
            }
        }
        for q in &self.queries {
            writeln!(f, "Pr({}={}, e) = {}", q.variable, q.value, q.node)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The compiled fork dag, built by hand.
    fn fork_dag() -> QDag {
        let mut dag = QDag::new();
        dag.register_evidence_var("C", ["ON", "OFF"]).unwrap();
        let on = dag.make_esn("C", "ON").unwrap();
        let off = dag.make_esn("C", "OFF").unwrap();
        let n = |dag: &mut QDag, p| dag.make_num(p).unwrap();
        let (p9, p1, p5) = (n(&mut dag, 0.9), n(&mut dag, 0.1), n(&mut dag, 0.5));
        let a = dag.make_op(OpKind::Mul, &[p9, on]).unwrap();
        let b = dag.make_op(OpKind::Mul, &[p1, off]).unwrap();
        let m_on = dag.make_op(OpKind::Add, &[a, b]).unwrap();
        let c = dag.make_op(OpKind::Mul, &[p5, on]).unwrap();
        let d = dag.make_op(OpKind::Mul, &[p5, off]).unwrap();
        let m_off = dag.make_op(OpKind::Add, &[c, d]).unwrap();
        let q = |dag: &mut QDag, x: f64, y: f64| {
            let (nx, ny) = (n(dag, x), n(dag, y));
            let l = dag.make_op(OpKind::Mul, &[nx, m_on]).unwrap();
            let r = dag.make_op(OpKind::Mul, &[ny, m_off]).unwrap();
            dag.make_op(OpKind::Add, &[l, r]).unwrap()
        };
        let on_q = q(&mut dag, 0.075, 0.56);
        let off_q = q(&mut dag, 0.225, 0.14);
        dag.add_query("B", "ON", on_q).unwrap();
        dag.add_query("B", "OFF", off_q).unwrap();
        dag
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn leaves_are_shared() {
        let mut dag = QDag::new();
        assert_eq!(dag.make_num(0.9).unwrap(), dag.make_num(0.9).unwrap());
        assert_eq!(dag.make_num(0.0).unwrap(), dag.make_num(-0.0).unwrap());
        assert!(matches!(
            dag.make_num(1.3),
            Err(QDagError::ProbabilityOutOfRange(_))
        ));
        assert!(dag.make_num(f64::NAN).is_err());
        dag.register_evidence_var("C", ["ON", "OFF"]).unwrap();
        let on = dag.make_esn("C", "ON").unwrap();
        let off = dag.make_esn("C", "OFF").unwrap();
        assert_ne!(on, off);
        assert!(matches!(
            dag.make_esn("D", "ON"),
            Err(QDagError::UnknownVariable(_))
        ));
        assert!(matches!(
            dag.make_esn("C", "MAYBE"),
            Err(QDagError::UnknownValue { .. })
        ));
    }

    #[test]
    fn operations_are_shared_by_exact_sequence() {
        let mut dag = QDag::new();
        let a = dag.make_num(0.9).unwrap();
        let b = dag.make_num(0.5).unwrap();
        let ab = dag.make_op(OpKind::Mul, &[a, b]).unwrap();
        assert_eq!(dag.make_op(OpKind::Mul, &[a, b]).unwrap(), ab);
        assert_ne!(dag.make_op(OpKind::Mul, &[b, a]).unwrap(), ab);
        assert_ne!(dag.make_op(OpKind::Add, &[a, b]).unwrap(), ab);
        assert_eq!(dag.make_op(OpKind::Add, &[a]).unwrap(), a);
        assert_eq!(dag.make_op(OpKind::Add, &[]), Err(QDagError::EmptyOperands));
        assert_eq!(
            dag.make_op(OpKind::Add, &[NodeId(99)]),
            Err(QDagError::InvalidNode(99))
        );
        assert_eq!(dag.node(ab), &Node::Mul(vec![a, b]));
    }

    #[test]
    fn fork_evaluations() {
        let dag = fork_dag();
        let on = Evidence::unknown(&dag).with(&dag, "C", "ON").unwrap();
        let out = dag.evaluate(&on);
        assert!(close(out.get("B", "ON").unwrap(), 0.3475));
        assert!(close(out.get("B", "OFF").unwrap(), 0.2725));
        let cond = out.conditional("B").unwrap();
        assert!(close(cond[0].1, 0.3475 / 0.62));

        let off = Evidence::unknown(&dag).with(&dag, "C", "OFF").unwrap();
        let out = dag.evaluate(&off);
        assert!(close(out.get("B", "ON").unwrap(), 0.2875));
        assert!(close(out.get("B", "OFF").unwrap(), 0.0925));

        let out = dag.evaluate(&Evidence::unknown(&dag));
        assert!(close(out.get("B", "ON").unwrap(), 0.635));
        assert!(close(out.get("B", "OFF").unwrap(), 0.365));
    }

    #[test]
    fn incremental_update_matches_batch() {
        let dag = fork_dag();
        let on = Evidence::unknown(&dag).with(&dag, "C", "ON").unwrap();
        let mut state = EvalState::new(&dag, on.clone());
        assert_eq!(state.output(), dag.evaluate(&on));
        assert_eq!(state.output(), state.output());

        let (out, recomputed) = state.update("C", "OFF").unwrap();
        assert!(close(out.get("B", "ON").unwrap(), 0.2875));
        assert!(close(out.get("B", "OFF").unwrap(), 0.0925));
        assert!(recomputed > 0);
        let off = Evidence::unknown(&dag).with(&dag, "C", "OFF").unwrap();
        assert_eq!(out, dag.evaluate(&off));

        let (again, recomputed) = state.update("C", "OFF").unwrap();
        assert_eq!(recomputed, 0);
        assert_eq!(again, out);
        assert!(state.update("Z", "OFF").is_err());
    }

    #[test]
    fn garbage_collection_keeps_query_ancestors() {
        let mut dag = fork_dag();
        let stray = dag.make_num(0.123).unwrap();
        let _ = dag.make_op(OpKind::Add, &[stray, NodeId(0)]).unwrap();
        let clean = dag.collect_garbage();
        assert_eq!(clean, fork_dag());
    }

    #[test]
    fn from_parts_rejects_forward_references() {
        let nodes = vec![
            Node::Num(0.5),
            Node::Mul(vec![NodeId(0), NodeId(2)]),
            Node::Num(0.1),
        ];
        assert_eq!(
            QDag::from_parts(vec![], nodes, vec![]),
            Err(QDagError::ForwardReference {
                node: 1,
                operand: 2
            })
        );
        let esn = Node::Esn {
            var: EvarId(0),
            value: 0,
        };
        let evars = vec![EvidenceVar {
            name: "C".into(),
            values: vec!["ON".into()],
        }];
        assert!(matches!(
            QDag::from_parts(evars, vec![esn.clone(), esn], vec![]),
            Err(QDagError::DuplicateEsn { .. })
        ));
    }
}
