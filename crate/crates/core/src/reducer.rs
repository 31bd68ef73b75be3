//! Q-DAG reduction by rewriting.
//!
//! Each rule is applied in one bottom-up pass that rebuilds the dag through
//! the hash-consing constructors, so nodes that become identical are merged
//! on the fly. Unreachable nodes are dropped after every pass.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::qdag::{DagStats, Node, NodeId, OpKind, QDag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RewriteRule {
    /// Drops 1 from products and 0 from sums.
    IdentityElimination,
    /// Replaces an operation over numbers by its value; folds runs of
    /// private numeric operands and annihilates products containing 0.
    NumericReduction,
    /// Inlines a same-label operand that has no other user.
    AssociativeMerging,
    /// Sorts operands canonically so that permutations share one node.
    CommutativeMerging,
}

impl RewriteRule {
    pub const ALL: [RewriteRule; 4] = [
        RewriteRule::IdentityElimination,
        RewriteRule::NumericReduction,
        RewriteRule::AssociativeMerging,
        RewriteRule::CommutativeMerging,
    ];

    /// Order in which [`reduce_fixpoint`] applies the rules in each round.
    pub const ROUND: [RewriteRule; 5] = [
        RewriteRule::NumericReduction,
        RewriteRule::IdentityElimination,
        RewriteRule::AssociativeMerging,
        RewriteRule::CommutativeMerging,
        RewriteRule::NumericReduction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RewriteRule::IdentityElimination => "identity-elimination",
            RewriteRule::NumericReduction => "numeric-reduction",
            RewriteRule::AssociativeMerging => "associative-merging",
            RewriteRule::CommutativeMerging => "commutative-merging",
        }
    }

    pub fn from_name(name: &str) -> Option<RewriteRule> {
        Self::ALL.into_iter().find(|r| r.name() == name)
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sums within this distance of 1 are taken to be exactly 1, so that
/// `Σ_c Pr(c | b)` collapses to the multiplicative identity.
const UNIT_SLACK: f64 = 4.0 * f64::EPSILON;

fn snap(v: f64) -> f64 {
    if (v - 1.0).abs() <= UNIT_SLACK {
        1.0
    } else {
        v
    }
}

fn fold(kind: OpKind, values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut values = values.into_iter();
    let first = values.next()?;
    let v = match kind {
        OpKind::Mul => values.fold(first, |acc, x| acc * x),
        OpKind::Add => values.fold(first, |acc, x| acc + x),
    };
    let v = snap(v);
    (0.0..=1.0).contains(&v).then_some(v)
}

/// Number of references to each node from reachable operation nodes and
/// from query bindings, counting repeats.
fn use_counts(dag: &QDag, live: &[bool]) -> Vec<usize> {
    let mut uses = vec![0; dag.len()];
    for (id, node) in dag.nodes().iter().enumerate() {
        if live[id] {
            for op in node.operands() {
                uses[op.0] += 1;
            }
        }
    }
    for q in dag.queries() {
        uses[q.node.0] += 1;
    }
    uses
}

struct Pass<'a> {
    old: &'a QDag,
    uses: Vec<usize>,
    out: QDag,
    applied: usize,
}

impl Pass<'_> {
    fn num(&mut self, p: f64) -> NodeId {
        self.out.make_num(p).expect("value checked")
    }

    fn out_num(&self, id: NodeId) -> Option<f64> {
        self.out.node(id).as_num()
    }

    fn rewrite(
        &mut self,
        rule: RewriteRule,
        kind: OpKind,
        old_ops: &[NodeId],
        ops: Vec<NodeId>,
    ) -> NodeId {
        let ops = match rule {
            RewriteRule::IdentityElimination => self.eliminate_identities(kind, ops),
            RewriteRule::NumericReduction => match self.reduce_numbers(kind, old_ops, ops) {
                Ok(ops) => ops,
                Err(folded) => return folded,
            },
            RewriteRule::AssociativeMerging => self.merge_associative(kind, old_ops, ops),
            RewriteRule::CommutativeMerging => self.sort_operands(ops),
        };
        self.out.make_op(kind, &ops).expect("operands exist")
    }

    fn eliminate_identities(&mut self, kind: OpKind, ops: Vec<NodeId>) -> Vec<NodeId> {
        let identity = match kind {
            OpKind::Mul => 1.0,
            OpKind::Add => 0.0,
        };
        let before = ops.len();
        let kept: Vec<NodeId> = ops
            .into_iter()
            .filter(|&o| self.out_num(o) != Some(identity))
            .collect();
        if kept.len() == before {
            return kept;
        }
        self.applied += 1;
        if kept.is_empty() {
            vec![self.num(identity)]
        } else {
            kept
        }
    }

    /// `Err` carries a node replacing the whole operation.
    fn reduce_numbers(
        &mut self,
        kind: OpKind,
        old_ops: &[NodeId],
        ops: Vec<NodeId>,
    ) -> Result<Vec<NodeId>, NodeId> {
        let values: Vec<Option<f64>> = ops.iter().map(|&o| self.out_num(o)).collect();
        if kind == OpKind::Mul && values.contains(&Some(0.0)) {
            self.applied += 1;
            return Err(self.num(0.0));
        }
        if values.iter().all(Option::is_some) {
            if let Some(v) = fold(kind, values.iter().map(|v| v.expect("numeric"))) {
                self.applied += 1;
                return Err(self.num(v));
            }
            return Ok(ops);
        }

        // Fold runs of adjacent numeric operands that nothing else uses, so
        // the folded leaves disappear and the dag does not grow.
        let private: Vec<bool> = old_ops
            .iter()
            .map(|o| self.uses[o.0] == old_ops.iter().filter(|&x| x == o).count())
            .collect();
        let mut out = Vec::with_capacity(ops.len());
        let mut changed = false;
        let mut i = 0;
        while i < ops.len() {
            let mut j = i;
            while j < ops.len() && values[j].is_some() && private[j] {
                j += 1;
            }
            if j - i >= 2 {
                if let Some(v) = fold(kind, values[i..j].iter().map(|v| v.expect("numeric"))) {
                    out.push(self.num(v));
                    changed = true;
                    i = j;
                    continue;
                }
            }
            out.push(ops[i]);
            i += 1;
        }
        if changed {
            self.applied += 1;
        }
        Ok(out)
    }

    fn merge_associative(
        &mut self,
        kind: OpKind,
        old_ops: &[NodeId],
        ops: Vec<NodeId>,
    ) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(ops.len());
        let mut changed = false;
        for (&old, &new) in old_ops.iter().zip(&ops) {
            let same_label = self.old.node(old).as_op().is_some_and(|(k, _)| k == kind);
            match self.out.node(new).as_op() {
                Some((k, inner)) if k == kind && same_label && self.uses[old.0] == 1 => {
                    out.extend_from_slice(inner);
                    changed = true;
                }
                _ => out.push(new),
            }
        }
        if changed {
            self.applied += 1;
        }
        out
    }

    fn sort_operands(&mut self, ops: Vec<NodeId>) -> Vec<NodeId> {
        let mut sorted = ops.clone();
        sorted.sort_by(|a, b| canonical_order(&self.out, *a, *b));
        if sorted != ops {
            self.applied += 1;
        }
        sorted
    }
}

/// Numbers by value, then ESNs by (variable, value), then operations by id.
fn canonical_order(dag: &QDag, a: NodeId, b: NodeId) -> Ordering {
    fn class(node: &Node) -> u8 {
        match node {
            Node::Num(_) => 0,
            Node::Esn { .. } => 1,
            _ => 2,
        }
    }
    let (na, nb) = (dag.node(a), dag.node(b));
    class(na).cmp(&class(nb)).then_with(|| match (na, nb) {
        (Node::Num(x), Node::Num(y)) => x.total_cmp(y),
        (Node::Esn { var: va, value: xa }, Node::Esn { var: vb, value: xb }) => {
            (va, xa).cmp(&(vb, xb))
        }
        _ => a.cmp(&b),
    })
}

/// Applies one rule exhaustively in a single bottom-up pass. Returns the
/// rewritten dag, with unreachable nodes removed, and the number of nodes
/// the rule changed.
pub fn apply_rule(dag: &QDag, rule: RewriteRule) -> (QDag, usize) {
    let live = dag.reachable();
    let mut pass = Pass {
        old: dag,
        uses: use_counts(dag, &live),
        out: QDag::with_registry(dag),
        applied: 0,
    };
    let mut map = vec![NodeId(usize::MAX); dag.len()];
    for (id, node) in dag.nodes().iter().enumerate() {
        if !live[id] {
            continue;
        }
        map[id] = match node {
            Node::Num(p) => pass.num(*p),
            Node::Esn { var, value } => pass
                .out
                .make_leaf(crate::qdag::Leaf::Esn {
                    var: *var,
                    value: *value,
                })
                .expect("same registry"),
            Node::Mul(old_ops) | Node::Add(old_ops) => {
                let kind = node.as_op().expect("operation").0;
                let ops = old_ops.iter().map(|o| map[o.0]).collect();
                pass.rewrite(rule, kind, old_ops, ops)
            }
        };
    }
    for q in dag.queries() {
        pass.out
            .add_query(q.variable.clone(), q.value.clone(), map[q.node.0])
            .expect("queries were distinct");
    }
    (pass.out.collect_garbage(), pass.applied)
}

/// Outcome of [`reduce_fixpoint`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReductionStats {
    pub rounds: usize,
    /// Rewrites per rule, indexed like [`RewriteRule::ALL`].
    pub applied: [usize; 4],
    pub before: DagStats,
    pub after: DagStats,
}

impl ReductionStats {
    pub fn applied(&self, rule: RewriteRule) -> usize {
        self.applied[rule.slot()]
    }

    pub fn total(&self) -> usize {
        self.applied.iter().sum()
    }
}

/// Repeats [`RewriteRule::ROUND`] until a whole round rewrites nothing.
pub fn reduce_fixpoint(dag: &QDag) -> (QDag, ReductionStats) {
    let mut stats = ReductionStats {
        before: dag.stats(),
        ..ReductionStats::default()
    };
    let mut current = dag.collect_garbage();
    loop {
        stats.rounds += 1;
        let mut round = 0;
        for rule in RewriteRule::ROUND {
            let (next, applied) = apply_rule(&current, rule);
            stats.applied[rule.slot()] += applied;
            round += applied;
            current = next;
        }
        if round == 0 {
            break;
        }
    }
    stats.after = current.stats();
    (current, stats)
}
