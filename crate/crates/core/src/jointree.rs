//! Join tree construction: moralization, min-fill triangulation, clique
//! extraction, maximum spanning tree over separators and CPT assignment.
//!
//! Both the numeric oracle and the compiler walk the tree with the same
//! message schedule, see [`JoinTree::collect_schedule`].

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::network::{BeliefNetwork, VarId};

/// Moral graph with min-fill fill-in edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triangulation {
    /// Adjacency of the filled (chordal) graph.
    pub adjacency: Vec<BTreeSet<VarId>>,
    /// Edges added by marrying parents.
    pub marriages: Vec<(VarId, VarId)>,
    /// Edges added during elimination.
    pub fill_in: Vec<(VarId, VarId)>,
    pub order: Vec<VarId>,
    /// Clique formed by each eliminated variable and its remaining neighbours,
    /// parallel to `order`.
    pub elimination_cliques: Vec<BTreeSet<VarId>>,
}

impl Triangulation {
    pub fn edges(&self) -> Vec<(VarId, VarId)> {
        let mut out = Vec::new();
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            for &j in nbrs.range(VarId(i + 1)..) {
                out.push((VarId(i), j));
            }
        }
        out
    }
}

fn ordered(a: VarId, b: VarId) -> (VarId, VarId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Moralizes the network and triangulates it with the min-fill heuristic,
/// breaking ties by the lowest variable index.
pub fn moralize_and_triangulate(net: &BeliefNetwork) -> Triangulation {
    let n = net.len();
    let mut adjacency = vec![BTreeSet::new(); n];
    let mut marriages = Vec::new();
    for v in net.var_ids() {
        let parents = net.parents(v);
        for &p in parents {
            adjacency[v.0].insert(p);
            adjacency[p.0].insert(v);
        }
        for (i, &p) in parents.iter().enumerate() {
            for &q in &parents[i + 1..] {
                if adjacency[p.0].insert(q) {
                    adjacency[q.0].insert(p);
                    marriages.push(ordered(p, q));
                }
            }
        }
    }

    let mut work = adjacency.clone();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut fill_in = Vec::new();
    let mut elimination_cliques = Vec::with_capacity(n);
    for _ in 0..n {
        let next = (0..n)
            .filter(|&v| !eliminated[v])
            .min_by_key(|&v| (missing_edges(&work, v).len(), v))
            .expect("a variable remains");
        for (a, b) in missing_edges(&work, next) {
            work[a.0].insert(b);
            work[b.0].insert(a);
            adjacency[a.0].insert(b);
            adjacency[b.0].insert(a);
            fill_in.push((a, b));
        }
        let mut clique: BTreeSet<VarId> = work[next].clone();
        clique.insert(VarId(next));
        elimination_cliques.push(clique);
        for nb in core::mem::take(&mut work[next]) {
            work[nb.0].remove(&VarId(next));
        }
        eliminated[next] = true;
        order.push(VarId(next));
    }

    Triangulation {
        adjacency,
        marriages,
        fill_in,
        order,
        elimination_cliques,
    }
}

fn missing_edges(graph: &[BTreeSet<VarId>], v: usize) -> Vec<(VarId, VarId)> {
    let nbrs: Vec<VarId> = graph[v].iter().copied().collect();
    let mut missing = Vec::new();
    for (i, &a) in nbrs.iter().enumerate() {
        for &b in &nbrs[i + 1..] {
            if !graph[a.0].contains(&b) {
                missing.push((a, b));
            }
        }
    }
    missing
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub id: usize,
    /// Sorted by variable index.
    pub scope: Vec<VarId>,
    /// Variables whose CPT (and likelihood vector) is attached here.
    pub families: Vec<VarId>,
}

impl Cluster {
    pub fn contains(&self, v: VarId) -> bool {
        self.scope.binary_search(&v).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Separator {
    pub a: usize,
    pub b: usize,
    pub scope: Vec<VarId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinTree {
    pub clusters: Vec<Cluster>,
    pub edges: Vec<Separator>,
    neighbors: Vec<Vec<usize>>,
}

fn intersection(a: &[VarId], b: &[VarId]) -> Vec<VarId> {
    a.iter()
        .filter(|v| b.binary_search(v).is_ok())
        .copied()
        .collect()
}

impl JoinTree {
    /// Builds the join tree of a network. Clusters are the maximal cliques
    /// of the min-fill triangulation, numbered in elimination order.
    pub fn build(net: &BeliefNetwork) -> JoinTree {
        let tri = moralize_and_triangulate(net);
        let cliques = &tri.elimination_cliques;
        let mut scopes: Vec<Vec<VarId>> = Vec::new();
        for (i, c) in cliques.iter().enumerate() {
            let dominated = cliques
                .iter()
                .enumerate()
                .any(|(j, d)| j != i && c.is_subset(d) && (c.len() < d.len() || j < i));
            if !dominated {
                scopes.push(c.iter().copied().collect());
            }
        }

        let mut candidates = Vec::new();
        for i in 0..scopes.len() {
            for j in i + 1..scopes.len() {
                let weight = intersection(&scopes[i], &scopes[j]).len();
                candidates.push((weight, i, j));
            }
        }
        candidates.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

        let mut components: Vec<usize> = (0..scopes.len()).collect();
        fn root(components: &mut [usize], mut x: usize) -> usize {
            while components[x] != x {
                components[x] = components[components[x]];
                x = components[x];
            }
            x
        }
        let mut edges = Vec::new();
        let mut neighbors = vec![Vec::new(); scopes.len()];
        for (_, i, j) in candidates {
            let (ri, rj) = (root(&mut components, i), root(&mut components, j));
            if ri == rj {
                continue;
            }
            components[ri] = rj;
            edges.push(Separator {
                a: i,
                b: j,
                scope: intersection(&scopes[i], &scopes[j]),
            });
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for nbrs in &mut neighbors {
            nbrs.sort_unstable();
        }

        let mut clusters: Vec<Cluster> = scopes
            .into_iter()
            .enumerate()
            .map(|(id, scope)| Cluster {
                id,
                scope,
                families: Vec::new(),
            })
            .collect();
        for v in net.var_ids() {
            let family = net.family(v);
            let home = clusters
                .iter()
                .filter(|c| family.iter().all(|f| c.contains(*f)))
                .min_by_key(|c| (c.scope.len(), c.id))
                .expect("every family lies in some clique of the moral graph")
                .id;
            clusters[home].families.push(v);
        }

        JoinTree {
            clusters,
            edges,
            neighbors,
        }
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn neighbors(&self, cluster: usize) -> &[usize] {
        &self.neighbors[cluster]
    }

    pub fn separator(&self, a: usize, b: usize) -> Option<&[VarId]> {
        self.edges
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
            .map(|e| e.scope.as_slice())
    }

    /// Lowest-id cluster containing `var`.
    pub fn pivot(&self, var: VarId) -> Option<usize> {
        self.clusters.iter().find(|c| c.contains(var)).map(|c| c.id)
    }

    /// Cluster holding the CPT of `var`.
    pub fn home(&self, var: VarId) -> Option<usize> {
        self.clusters
            .iter()
            .find(|c| c.families.contains(&var))
            .map(|c| c.id)
    }

    /// Directed edges `(from, to)` whose messages must be computed, in
    /// order, to collect everything toward `pivot`: depth first, children
    /// visited in ascending id, each message emitted after the messages it
    /// depends on.
    pub fn collect_schedule(&self, pivot: usize) -> Vec<(usize, usize)> {
        let mut schedule = Vec::with_capacity(self.len().saturating_sub(1));
        // (cluster, parent, next neighbour position)
        let mut stack: Vec<(usize, usize, usize)> = Vec::new();
        for &k in &self.neighbors[pivot] {
            stack.push((k, pivot, 0));
            while let Some(top) = stack.last_mut() {
                let (node, parent, pos) = *top;
                let next = self.neighbors[node][pos..]
                    .iter()
                    .position(|&c| c != parent)
                    .map(|offset| pos + offset);
                match next {
                    Some(i) => {
                        top.2 = i + 1;
                        stack.push((self.neighbors[node][i], node, 0));
                    }
                    None => {
                        schedule.push((node, parent));
                        stack.pop();
                    }
                }
            }
        }
        schedule
    }

    /// Neighbours of `cluster` other than `except`, ascending.
    pub fn incoming(
        &self,
        cluster: usize,
        except: Option<usize>,
    ) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[cluster]
            .iter()
            .copied()
            .filter(move |&k| Some(k) != except)
    }

    pub fn is_tree(&self) -> bool {
        if self.clusters.is_empty() {
            return self.edges.is_empty();
        }
        if self.edges.len() != self.clusters.len() - 1 {
            return false;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0];
        while let Some(c) = stack.pop() {
            if !core::mem::replace(&mut seen[c], true) {
                stack.extend(self.neighbors[c].iter().copied());
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let mut parent = vec![usize::MAX; self.len()];
        parent[from] = from;
        let mut queue = alloc::collections::VecDeque::from([from]);
        while let Some(c) = queue.pop_front() {
            for &n in &self.neighbors[c] {
                if parent[n] == usize::MAX {
                    parent[n] = c;
                    queue.push_back(n);
                }
            }
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = parent[cur];
            path.push(cur);
        }
        path
    }

    /// Checks the running intersection property by walking the path
    /// between every pair of clusters.
    pub fn has_running_intersection(&self) -> bool {
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let shared = intersection(&self.clusters[i].scope, &self.clusters[j].scope);
                for c in self.path(i, j) {
                    if !shared.iter().all(|v| self.clusters[c].contains(*v)) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Checks that every family is assigned to exactly one cluster that
    /// contains it.
    pub fn families_covered(&self, net: &BeliefNetwork) -> bool {
        net.var_ids().all(|v| {
            let homes: Vec<&Cluster> = self
                .clusters
                .iter()
                .filter(|c| c.families.contains(&v))
                .collect();
            homes.len() == 1 && net.family(v).iter().all(|f| homes[0].contains(*f))
        })
    }

    /// Largest cluster size, i.e. treewidth + 1 of the triangulation.
    pub fn max_cluster_size(&self) -> usize {
        self.clusters
            .iter()
            .map(|c| c.scope.len())
            .max()
            .unwrap_or(0)
    }

    /// Sum over clusters of the number of entries in the cluster table.
    pub fn total_table_size(&self, net: &BeliefNetwork) -> usize {
        self.clusters
            .iter()
            .map(|c| {
                c.scope
                    .iter()
                    .map(|v| net.cardinality(*v))
                    .product::<usize>()
            })
            .sum()
    }
}
