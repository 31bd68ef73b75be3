//! Query DAG compilation for discrete belief networks.
//!
//! A belief network is compiled, once and off-line, into an arithmetic
//! expression DAG whose roots are probabilities and evidence indicators and
//! whose query nodes evaluate to `Pr(x, e)` for any evidence `e` over the
//! declared evidence variables. The compiled DAG can then be reduced with
//! algebraic rewrite rules and evaluated, either in one forward pass or
//! incrementally as evidence changes.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line
//! driver and other IO live in the `qdagc` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod compiler;
pub mod jointree;
pub mod network;
pub mod oracle;
pub mod qdag;
pub mod reducer;
pub mod table;
#[cfg(feature = "testing")]
pub mod testing;
pub mod voi;

pub use compiler::{compile, compile_traced, Compilation, CompileError, SymbolicPotential};
pub use jointree::{Cluster, JoinTree, Triangulation};
pub use network::{
    BeliefNetwork, Cpt, Instantiation, NetworkBuilder, NetworkError, VarId, Variable,
};
pub use oracle::{NumericPotential, OpCounter};
pub use qdag::{
    DagStats, EvalState, EvarId, Evidence, Leaf, Node, NodeId, OpKind, OpRecord, Output, QDag,
    QDagError,
};
pub use reducer::{reduce_fixpoint, ReductionStats, RewriteRule};
