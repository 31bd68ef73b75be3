//! Index bookkeeping shared by numeric and symbolic potentials. Tables are
//! dense and row-major over their scope, first variable most significant.

use alloc::vec;
use alloc::vec::Vec;

use crate::network::VarId;

/// Scope of a dense table together with the cardinality of each variable.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Layout {
    pub scope: Vec<VarId>,
    pub cards: Vec<usize>,
}

impl Layout {
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>) -> Self {
        debug_assert_eq!(scope.len(), cards.len());
        Layout { scope, cards }
    }

    pub fn size(&self) -> usize {
        self.cards.iter().product()
    }

    pub fn position(&self, v: VarId) -> Option<usize> {
        self.scope.iter().position(|&s| s == v)
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![0; self.cards.len()];
        let mut acc = 1;
        for k in (0..self.cards.len()).rev() {
            strides[k] = acc;
            acc *= self.cards[k];
        }
        strides
    }

    /// Row-major index of a full assignment to this layout's scope.
    pub fn index_of(&self, assignment: &[usize]) -> usize {
        assignment
            .iter()
            .zip(&self.cards)
            .fold(0, |acc, (&a, &c)| acc * c + a)
    }
}

/// Steps a row-major odometer; returns false after the last assignment.
fn advance(current: &mut [usize], cards: &[usize]) -> bool {
    for k in (0..current.len()).rev() {
        current[k] += 1;
        if current[k] < cards[k] {
            return true;
        }
        current[k] = 0;
    }
    false
}

/// Union of the input scopes in order of first appearance.
pub fn union(inputs: &[&Layout]) -> Layout {
    let mut out = Layout::default();
    for layout in inputs {
        for (&v, &c) in layout.scope.iter().zip(&layout.cards) {
            if !out.scope.contains(&v) {
                out.scope.push(v);
                out.cards.push(c);
            }
        }
    }
    out
}

/// For every cell of `out`, the compatible cell index in each input.
pub fn product_plan(out: &Layout, inputs: &[&Layout]) -> Vec<Vec<usize>> {
    // stride of each output position within each input (0 when absent)
    let per_input: Vec<Vec<usize>> = inputs
        .iter()
        .map(|layout| {
            let strides = layout.strides();
            out.scope
                .iter()
                .map(|v| layout.position(*v).map_or(0, |p| strides[p]))
                .collect()
        })
        .collect();
    let mut plan = Vec::with_capacity(out.size());
    let mut current = vec![0; out.scope.len()];
    loop {
        plan.push(
            per_input
                .iter()
                .map(|strides| current.iter().zip(strides).map(|(a, s)| a * s).sum())
                .collect(),
        );
        if !advance(&mut current, &out.cards) {
            break;
        }
    }
    plan
}

/// Restricts `layout` to the variables in `keep`, preserving its order.
/// Returns `None` when `keep` mentions a variable outside the scope.
pub fn restrict(layout: &Layout, keep: &[VarId]) -> Option<Layout> {
    if keep.iter().any(|v| !layout.scope.contains(v)) {
        return None;
    }
    let mut out = Layout::default();
    for (&v, &c) in layout.scope.iter().zip(&layout.cards) {
        if keep.contains(&v) {
            out.scope.push(v);
            out.cards.push(c);
        }
    }
    Some(out)
}

/// For every cell of `kept` (a restriction of `layout`), the indices of the
/// `layout` cells that agree with it, ascending.
pub fn marginal_plan(layout: &Layout, kept: &Layout) -> Vec<Vec<usize>> {
    let mut plan = vec![Vec::new(); kept.size()];
    let positions: Vec<usize> = kept
        .scope
        .iter()
        .map(|v| layout.position(*v).expect("restriction"))
        .collect();
    let mut current = vec![0; layout.scope.len()];
    let mut projected = vec![0; kept.scope.len()];
    let mut index = 0;
    loop {
        for (slot, &p) in projected.iter_mut().zip(&positions) {
            *slot = current[p];
        }
        plan[kept.index_of(&projected)].push(index);
        index += 1;
        if !advance(&mut current, &layout.cards) {
            break;
        }
    }
    plan
}
