use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::CoastTree;
use crate::error::{Error, Result};

/// Nested subtrees of a grown tree, one per leaf count from `K` down to 1.
///
/// Stored as the collapse order rather than as materialized trees; use
/// [`PruneSequence::subtree`] to obtain the tree with a given leaf count.
#[derive(Clone, Debug)]
pub struct PruneSequence {
    tree: CoastTree,
    /// Internal nodes in the order they are collapsed.
    order: Vec<usize>,
    /// `criteria[k - 1]` is the criterion of the subtree with `k` leaves.
    criteria: Vec<f64>,
}

impl PruneSequence {
    /// Leaf count of the largest subtree.
    pub fn max_leaves(&self) -> usize {
        self.criteria.len()
    }

    pub fn criterion(&self, leaves: usize) -> Option<f64> {
        leaves.checked_sub(1).and_then(|k| self.criteria.get(k)).copied()
    }

    /// Criteria indexed by leaf count minus one.
    pub fn criteria(&self) -> &[f64] {
        &self.criteria
    }

    /// Node ids of the full tree in collapse order.
    pub fn collapse_order(&self) -> &[usize] {
        &self.order
    }

    pub fn subtree(&self, leaves: usize) -> Result<CoastTree> {
        let k_max = self.max_leaves();
        if leaves == 0 || leaves > k_max {
            return Err(Error::InvalidInput(format!("no subtree with {} leaves (1..={})", leaves, k_max)));
        }
        let mut collapsed = vec![false; self.tree.nodes().len()];
        for &id in &self.order[..k_max - leaves] {
            collapsed[id] = true;
        }
        Ok(self.tree.collapse(&collapsed))
    }

    /// All subtrees, largest first.
    pub fn trees(&self) -> Result<Vec<CoastTree>> {
        (1..=self.max_leaves()).rev().map(|k| self.subtree(k)).collect()
    }
}

struct Collapse {
    increase: f64,
    id: usize,
}

impl PartialEq for Collapse {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Collapse {}

impl PartialOrd for Collapse {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Collapse {
    // reversed so the max-heap pops the smallest increase, then the smallest id
    fn cmp(&self, other: &Self) -> Ordering {
        other.increase.total_cmp(&self.increase).then_with(|| other.id.cmp(&self.id))
    }
}

/// Weakest-link pruning: repeatedly collapses the internal node with two
/// leaf children whose collapse increases the criterion least, using the
/// cached node weights and variabilities.
pub fn prune_sequence(tree: &CoastTree) -> PruneSequence {
    let nodes = tree.nodes();
    let cost = |id: usize| nodes[id].weight * nodes[id].v_hat;
    let mut is_leaf: Vec<bool> = nodes.iter().map(|n| n.is_leaf()).collect();
    let increase = |id: usize| {
        let [a, b] = nodes[id].split.expect("internal node").children;
        cost(id) - cost(a) - cost(b)
    };
    let ready =
        |id: usize, is_leaf: &[bool]| nodes[id].split.is_some_and(|s| is_leaf[s.children[0]] && is_leaf[s.children[1]]);

    let mut heap: BinaryHeap<Collapse> =
        (0..nodes.len()).filter(|&id| ready(id, &is_leaf)).map(|id| Collapse { increase: increase(id), id }).collect();
    let k_max = tree.leaf_count();
    let mut criteria = vec![0.0; k_max];
    criteria[k_max - 1] = tree.criterion();
    let mut order = Vec::with_capacity(k_max - 1);
    let mut k = k_max;
    while let Some(Collapse { increase: inc, id }) = heap.pop() {
        is_leaf[id] = true;
        order.push(id);
        k -= 1;
        criteria[k - 1] = criteria[k] + inc;
        if let Some(p) = nodes[id].parent {
            if ready(p, &is_leaf) {
                heap.push(Collapse { increase: increase(p), id: p });
            }
        }
    }
    debug_assert_eq!(k, 1);
    PruneSequence { tree: tree.clone(), order, criteria }
}

/// Subtree minimizing `criterion + lambda · leaves`; ties go to fewer leaves.
pub fn select_subtree(seq: &PruneSequence, lambda: f64) -> Result<CoastTree> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be nonnegative, got {}", lambda)));
    }
    let objective = |k: usize| seq.criteria[k - 1] + lambda * k as f64;
    let mut best = 1;
    for k in 2..=seq.max_leaves() {
        let (v, b) = (objective(k), objective(best));
        if v < b - 1e-12 * b.abs().max(1.0) {
            best = k;
        }
    }
    seq.subtree(best)
}
