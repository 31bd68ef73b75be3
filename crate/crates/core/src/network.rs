//! Discrete belief networks: variables, conditional probability tables and
//! barren-node pruning.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

/// Absolute tolerance on the sum of each CPT row.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Value token reserved for the unknown value in external formats.
pub const UNKNOWN_TOKEN: &str = "?";

/// Index of a variable within its network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("variable name must not be empty")]
    EmptyName,
    #[error("variable {0} has no values")]
    NoValues(String),
    #[error("duplicate variable {0}")]
    DuplicateVariable(String),
    #[error("variable {variable} declares value {value} twice")]
    DuplicateValue { variable: String, value: String },
    #[error("variable {0} uses the reserved value name \"?\"")]
    ReservedValue(String),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("unknown parent {parent} in the CPT of {child}")]
    UnknownParent { child: String, parent: String },
    #[error("variable {child} lists parent {parent} twice")]
    DuplicateParent { child: String, parent: String },
    #[error("duplicate CPT for {0}")]
    DuplicateCpt(String),
    #[error("missing CPT for {0}")]
    MissingCpt(String),
    #[error("CPT of {child} has {found} entries, expected {expected}")]
    TableShape {
        child: String,
        expected: usize,
        found: usize,
    },
    #[error("CPT of {child} has entry {value} outside [0, 1]")]
    ProbabilityOutOfRange { child: String, value: f64 },
    #[error("row {row} of the CPT of {child} not normalized (sums to {sum})")]
    RowNotNormalized { child: String, row: usize, sum: f64 },
    #[error("cyclic graph: {0} is its own ancestor")]
    Cyclic(String),
    #[error("value index {index} out of range for variable {variable}")]
    ValueOutOfRange { variable: String, index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub values: Vec<String>,
}

impl Variable {
    pub fn cardinality(&self) -> usize {
        self.values.len()
    }

    pub fn value_index(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }
}

/// Conditional probability table of one variable.
///
/// The table is row-major: one row per parent instantiation with the first
/// parent most significant, one column per child value in declared order.
/// Equivalently it is a dense table over the scope `parents ++ [child]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: VarId,
    pub parents: Vec<VarId>,
    pub table: Vec<f64>,
}

impl Cpt {
    /// Scope of the table in layout order (parents, then the child).
    pub fn scope(&self) -> Vec<VarId> {
        let mut scope = self.parents.clone();
        scope.push(self.child);
        scope
    }
}

/// An immutable, validated belief network.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefNetwork {
    variables: Vec<Variable>,
    cpts: Vec<Cpt>,
    children: Vec<Vec<VarId>>,
}

/// Incremental construction of a [`BeliefNetwork`]; validation happens in
/// [`NetworkBuilder::build`].
#[derive(Debug, Default, Clone)]
pub struct NetworkBuilder {
    variables: Vec<Variable>,
    cpts: Vec<(String, Vec<String>, Vec<f64>)>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variable<S: Into<String>>(
        &mut self,
        name: impl Into<String>,
        values: impl IntoIterator<Item = S>,
    ) -> &mut Self {
        self.variables.push(Variable {
            name: name.into(),
            values: values.into_iter().map(Into::into).collect(),
        });
        self
    }

    pub fn cpt<S: Into<String>>(
        &mut self,
        child: impl Into<String>,
        parents: impl IntoIterator<Item = S>,
        table: impl Into<Vec<f64>>,
    ) -> &mut Self {
        self.cpts.push((
            child.into(),
            parents.into_iter().map(Into::into).collect(),
            table.into(),
        ));
        self
    }

    pub fn build(&self) -> Result<BeliefNetwork, NetworkError> {
        let mut by_name = BTreeMap::new();
        for (i, var) in self.variables.iter().enumerate() {
            if var.name.is_empty() {
                return Err(NetworkError::EmptyName);
            }
            if var.values.is_empty() {
                return Err(NetworkError::NoValues(var.name.clone()));
            }
            for (j, value) in var.values.iter().enumerate() {
                if value == UNKNOWN_TOKEN {
                    return Err(NetworkError::ReservedValue(var.name.clone()));
                }
                if var.values[..j].contains(value) {
                    return Err(NetworkError::DuplicateValue {
                        variable: var.name.clone(),
                        value: value.clone(),
                    });
                }
            }
            if by_name.insert(var.name.as_str(), VarId(i)).is_some() {
                return Err(NetworkError::DuplicateVariable(var.name.clone()));
            }
        }

        let mut slots: Vec<Option<Cpt>> = vec![None; self.variables.len()];
        for (child, parents, table) in &self.cpts {
            let child_id = *by_name
                .get(child.as_str())
                .ok_or_else(|| NetworkError::UnknownVariable(child.clone()))?;
            let mut parent_ids = Vec::with_capacity(parents.len());
            for parent in parents {
                let id =
                    *by_name
                        .get(parent.as_str())
                        .ok_or_else(|| NetworkError::UnknownParent {
                            child: child.clone(),
                            parent: parent.clone(),
                        })?;
                if parent_ids.contains(&id) {
                    return Err(NetworkError::DuplicateParent {
                        child: child.clone(),
                        parent: parent.clone(),
                    });
                }
                parent_ids.push(id);
            }
            if slots[child_id.0].is_some() {
                return Err(NetworkError::DuplicateCpt(child.clone()));
            }
            let cpt = Cpt {
                child: child_id,
                parents: parent_ids,
                table: table.clone(),
            };
            check_table(&self.variables, &cpt)?;
            slots[child_id.0] = Some(cpt);
        }

        let mut cpts = Vec::with_capacity(slots.len());
        for (i, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(cpt) => cpts.push(cpt),
                None => return Err(NetworkError::MissingCpt(self.variables[i].name.clone())),
            }
        }
        BeliefNetwork::from_parts(self.variables.clone(), cpts)
    }
}

fn check_table(variables: &[Variable], cpt: &Cpt) -> Result<(), NetworkError> {
    let child = &variables[cpt.child.0];
    let columns = child.cardinality();
    let rows: usize = cpt
        .parents
        .iter()
        .map(|p| variables[p.0].cardinality())
        .product();
    if cpt.table.len() != rows * columns {
        return Err(NetworkError::TableShape {
            child: child.name.clone(),
            expected: rows * columns,
            found: cpt.table.len(),
        });
    }
    for &value in &cpt.table {
        if !(0.0..=1.0).contains(&value) {
            return Err(NetworkError::ProbabilityOutOfRange {
                child: child.name.clone(),
                value,
            });
        }
    }
    for (row, chunk) in cpt.table.chunks(columns).enumerate() {
        let sum: f64 = chunk.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(NetworkError::RowNotNormalized {
                child: child.name.clone(),
                row,
                sum,
            });
        }
    }
    Ok(())
}

impl BeliefNetwork {
    /// Assembles a network from already-resolved parts. `cpts[i].child` must
    /// be `VarId(i)`.
    fn from_parts(variables: Vec<Variable>, cpts: Vec<Cpt>) -> Result<Self, NetworkError> {
        let mut children = vec![Vec::new(); variables.len()];
        for cpt in &cpts {
            for p in &cpt.parents {
                children[p.0].push(cpt.child);
            }
        }
        let net = BeliefNetwork {
            variables,
            cpts,
            children,
        };
        net.check_acyclic()?;
        Ok(net)
    }

    fn check_acyclic(&self) -> Result<(), NetworkError> {
        // Kahn's algorithm; anything left over sits on a cycle.
        let mut indegree: Vec<usize> = self.cpts.iter().map(|c| c.parents.len()).collect();
        let mut ready: Vec<VarId> = (0..self.len())
            .filter(|&i| indegree[i] == 0)
            .map(VarId)
            .collect();
        let mut seen = 0;
        while let Some(v) = ready.pop() {
            seen += 1;
            for c in &self.children[v.0] {
                indegree[c.0] -= 1;
                if indegree[c.0] == 0 {
                    ready.push(*c);
                }
            }
        }
        if seen == self.len() {
            return Ok(());
        }
        let stuck = indegree.iter().position(|&d| d > 0).unwrap_or(0);
        Err(NetworkError::Cyclic(self.variables[stuck].name.clone()))
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.variables.len()).map(VarId)
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .map(VarId)
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.variables[id.0].name
    }

    pub fn cardinality(&self, id: VarId) -> usize {
        self.variables[id.0].cardinality()
    }

    pub fn cpt(&self, id: VarId) -> &Cpt {
        &self.cpts[id.0]
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn parents(&self, id: VarId) -> &[VarId] {
        &self.cpts[id.0].parents
    }

    pub fn children(&self, id: VarId) -> &[VarId] {
        &self.children[id.0]
    }

    /// The variable together with its parents.
    pub fn family(&self, id: VarId) -> Vec<VarId> {
        self.cpts[id.0].scope()
    }

    /// `Pr(child = value | parents)` looked up in a full instantiation.
    pub fn conditional(&self, child: VarId, full: &Instantiation) -> Option<f64> {
        let cpt = &self.cpts[child.0];
        let mut index = 0;
        for &p in cpt.parents.iter().chain(core::iter::once(&child)) {
            index = index * self.cardinality(p) + full.get(p)?;
        }
        Some(cpt.table[index])
    }

    /// Removes barren variables: leaves that are neither queried nor
    /// observed, repeatedly, until none remains. Surviving variables keep
    /// their relative order and CPTs.
    pub fn prune(&self, query: &[VarId], evidence: &[VarId]) -> BeliefNetwork {
        let mut alive = vec![true; self.len()];
        let mut live_children: Vec<usize> = self.children.iter().map(Vec::len).collect();
        let keep = |v: VarId| query.contains(&v) || evidence.contains(&v);
        let mut stack: Vec<VarId> = self
            .var_ids()
            .filter(|&v| live_children[v.0] == 0 && !keep(v))
            .collect();
        while let Some(v) = stack.pop() {
            if !alive[v.0] {
                continue;
            }
            alive[v.0] = false;
            for &p in self.parents(v) {
                live_children[p.0] -= 1;
                if live_children[p.0] == 0 && alive[p.0] && !keep(p) {
                    stack.push(p);
                }
            }
        }

        let mut remap = vec![None; self.len()];
        let mut variables = Vec::new();
        for v in self.var_ids().filter(|v| alive[v.0]) {
            remap[v.0] = Some(VarId(variables.len()));
            variables.push(self.variables[v.0].clone());
        }
        let cpts = self
            .cpts
            .iter()
            .filter(|c| alive[c.child.0])
            .map(|c| Cpt {
                child: remap[c.child.0].expect("survivor"),
                // a live variable's parents all have a live child, so they survive
                parents: c
                    .parents
                    .iter()
                    .map(|p| remap[p.0].expect("live parent"))
                    .collect(),
                table: c.table.clone(),
            })
            .collect();
        BeliefNetwork::from_parts(variables, cpts).expect("pruning preserves acyclicity")
    }

    /// Same as [`BeliefNetwork::prune`] with variables named.
    pub fn prune_named(
        &self,
        query: &[&str],
        evidence: &[&str],
    ) -> Result<BeliefNetwork, NetworkError> {
        let q = self.resolve(query)?;
        let e = self.resolve(evidence)?;
        Ok(self.prune(&q, &e))
    }

    pub fn resolve(&self, names: &[&str]) -> Result<Vec<VarId>, NetworkError> {
        names
            .iter()
            .map(|n| {
                self.find(n)
                    .ok_or_else(|| NetworkError::UnknownVariable((*n).into()))
            })
            .collect()
    }

    /// Variables in an order where every parent precedes its children.
    pub fn topological_order(&self) -> Vec<VarId> {
        let mut indegree: Vec<usize> = self.cpts.iter().map(|c| c.parents.len()).collect();
        let mut order = Vec::with_capacity(self.len());
        let mut frontier: alloc::collections::BTreeSet<VarId> =
            self.var_ids().filter(|v| indegree[v.0] == 0).collect();
        while let Some(v) = frontier.pop_first() {
            order.push(v);
            for c in &self.children[v.0] {
                indegree[c.0] -= 1;
                if indegree[c.0] == 0 {
                    frontier.insert(*c);
                }
            }
        }
        order
    }
}

/// A partial assignment of value indices to variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Instantiation {
    bindings: BTreeMap<VarId, usize>,
}

impl Instantiation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, var: VarId, value: usize) -> &mut Self {
        self.bindings.insert(var, value);
        self
    }

    pub fn with(mut self, var: VarId, value: usize) -> Self {
        self.bindings.insert(var, value);
        self
    }

    pub fn unbind(&mut self, var: VarId) {
        self.bindings.remove(&var);
    }

    pub fn get(&self, var: VarId) -> Option<usize> {
        self.bindings.get(&var).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.bindings.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// Checks every binding against the network's variables.
    pub fn validate(&self, net: &BeliefNetwork) -> Result<(), NetworkError> {
        for (var, index) in self.iter() {
            if var.0 >= net.len() {
                return Err(NetworkError::UnknownVariable(alloc::format!("#{}", var.0)));
            }
            if index >= net.cardinality(var) {
                return Err(NetworkError::ValueOutOfRange {
                    variable: net.name(var).into(),
                    index,
                });
            }
        }
        Ok(())
    }

    /// Builds an instantiation from `(variable, value)` names.
    pub fn from_names(net: &BeliefNetwork, pairs: &[(&str, &str)]) -> Result<Self, NetworkError> {
        let mut inst = Instantiation::new();
        for (var, value) in pairs {
            let id = net
                .find(var)
                .ok_or_else(|| NetworkError::UnknownVariable((*var).into()))?;
            let index = net
                .variable(id)
                .value_index(value)
                .ok_or_else(|| NetworkError::UnknownVariable(alloc::format!("{var}={value}")))?;
            inst.bind(id, index);
        }
        Ok(inst)
    }
}

/// Enumerates all full instantiations of `scope` in row-major order (first
/// variable most significant).
pub fn instantiations(net: &BeliefNetwork, scope: &[VarId]) -> Vec<Vec<usize>> {
    let cards: Vec<usize> = scope.iter().map(|v| net.cardinality(*v)).collect();
    let total: usize = cards.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut current = vec![0; scope.len()];
    for _ in 0..total {
        out.push(current.clone());
        for k in (0..current.len()).rev() {
            current[k] += 1;
            if current[k] < cards[k] {
                break;
            }
            current[k] = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn builds_fork() {
        let net = fork();
        assert_eq!(net.len(), 3);
        assert_eq!(net.parents(VarId(1)), &[VarId(0)]);
        assert_eq!(net.children(VarId(0)), &[VarId(1), VarId(2)]);
        assert_eq!(net.family(VarId(2)), [VarId(0), VarId(2)]);
    }

    #[test]
    fn rejects_unnormalized_row() {
        let mut b = NetworkBuilder::new();
        b.variable("X", ["a", "b"])
            .cpt("X", [] as [&str; 0], [0.6, 0.5]);
        assert!(matches!(
            b.build(),
            Err(NetworkError::RowNotNormalized { row: 0, .. })
        ));
    }

    #[test]
    fn single_value_variable_is_valid() {
        let mut b = NetworkBuilder::new();
        b.variable("X", ["a"]).cpt("X", [] as [&str; 0], [1.0]);
        let net = b.build().unwrap();
        assert_eq!(net.cardinality(VarId(0)), 1);
    }

    #[test]
    fn rejects_cycles_and_bad_references() {
        let mut b = NetworkBuilder::new();
        b.variable("X", ["a", "b"])
            .variable("Y", ["a", "b"])
            .cpt("X", ["Y"], [0.5, 0.5, 0.5, 0.5])
            .cpt("Y", ["X"], [0.5, 0.5, 0.5, 0.5]);
        assert!(matches!(b.build(), Err(NetworkError::Cyclic(_))));

        let mut b = NetworkBuilder::new();
        b.variable("X", ["a", "b"]).cpt("X", ["Z"], [0.5, 0.5]);
        assert!(matches!(b.build(), Err(NetworkError::UnknownParent { .. })));

        let mut b = NetworkBuilder::new();
        b.variable("X", ["a"]).variable("X", ["b"]);
        assert!(matches!(b.build(), Err(NetworkError::DuplicateVariable(_))));

        let mut b = NetworkBuilder::new();
        b.variable("X", ["a", "?"])
            .cpt("X", [] as [&str; 0], [0.5, 0.5]);
        assert!(matches!(b.build(), Err(NetworkError::ReservedValue(_))));

        let mut b = NetworkBuilder::new();
        b.variable("X", ["a", "b"]);
        assert!(matches!(b.build(), Err(NetworkError::MissingCpt(_))));

        let mut b = NetworkBuilder::new();
        b.variable("X", ["a", "b"]).cpt("X", [] as [&str; 0], [1.0]);
        assert!(matches!(
            b.build(),
            Err(NetworkError::TableShape {
                expected: 2,
                found: 1,
                ..
            })
        ));
    }

    #[test]
    fn prune_chain() {
        let mut b = NetworkBuilder::new();
        b.variable("A", ["ON", "OFF"])
            .variable("B", ["ON", "OFF"])
            .variable("C", ["ON", "OFF"])
            .cpt("A", [] as [&str; 0], [0.4, 0.6])
            .cpt("B", ["A"], [0.3, 0.7, 0.9, 0.1])
            .cpt("C", ["B"], [0.2, 0.8, 0.5, 0.5]);
        let net = b.build().unwrap();
        let pruned = net.prune_named(&["A"], &["B"]).unwrap();
        assert_eq!(pruned.len(), 2);
        assert_eq!(pruned.name(VarId(0)), "A");
        assert_eq!(pruned.name(VarId(1)), "B");
        assert_eq!(pruned.cpt(VarId(1)).table, [0.3, 0.7, 0.9, 0.1]);

        let all = net.prune_named(&["A", "B", "C"], &["A", "B", "C"]).unwrap();
        assert_eq!(all, net);
    }

    #[test]
    fn topological_order_puts_parents_first() {
        let net = fork();
        let order = net.topological_order();
        assert_eq!(order, [VarId(0), VarId(1), VarId(2)]);
    }

    #[test]
    fn instantiations_are_row_major() {
        let net = fork();
        let all = instantiations(&net, &[VarId(0), VarId(2)]);
        assert_eq!(all, [[0, 0], [0, 1], [1, 0], [1, 1]]);
        assert_eq!(instantiations(&net, &[]), [Vec::<usize>::new()]);
    }
}
