//! Consensus ranking trees: recursive pairwise splits of `𝔖_n` whose leaves
//! carry local medians, and the consensus distribution they induce.

mod grow;
mod prune;

pub use grow::{
    choose_split_balanced, choose_split_min_distortion, grow, GrowConfig, GrowthRecord, GrowthTrace, SplitRule,
};
pub use prune::{prune_sequence, select_subtree, PruneSequence};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{Cell, CellSpec, VarianceEstimator};
use crate::perm::{check_dims, DiscreteRankingDistribution, Permutation, RankingSample, WEIGHT_SUM_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeSplit {
    /// Child 0 holds `σ(i) < σ(j)`, child 1 the reverse.
    pub pair: (usize, usize),
    pub children: [usize; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoastNode {
    pub id: usize,
    pub cell: Cell,
    /// Empirical mass `N_C / N`.
    pub weight: f64,
    pub v_hat: f64,
    pub split: Option<NodeSplit>,
    pub median: Option<Permutation>,
    pub depth: usize,
    pub parent: Option<usize>,
}

impl CoastNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// Binary partition tree over `𝔖_n`. Node 0 is the root; every node's id is
/// its index.
#[derive(Clone, Debug, PartialEq)]
pub struct CoastTree {
    n: usize,
    sample_size: usize,
    estimator: VarianceEstimator,
    nodes: Vec<CoastNode>,
}

impl CoastTree {
    pub(crate) fn from_parts(
        n: usize,
        sample_size: usize,
        estimator: VarianceEstimator,
        nodes: Vec<CoastNode>,
    ) -> Self {
        CoastTree { n, sample_size, estimator, nodes }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn estimator(&self) -> VarianceEstimator {
        self.estimator
    }

    pub fn nodes(&self) -> &[CoastNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> Option<&CoastNode> {
        self.nodes.get(id)
    }

    pub fn root(&self) -> &CoastNode {
        &self.nodes[0]
    }

    /// Leaf ids in increasing order.
    pub fn leaves(&self) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.id).collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// `Σ_leaves weight · v_hat`.
    pub fn criterion(&self) -> f64 {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.weight * n.v_hat).sum()
    }

    /// Leaf containing `sigma`. Leaves tile `𝔖_n`, so routing is total.
    pub fn leaf_of(&self, sigma: &Permutation) -> usize {
        let mut id = 0;
        while let Some(split) = self.nodes[id].split {
            let (i, j) = split.pair;
            id = split.children[if sigma.prefers(i, j) { 0 } else { 1 }];
        }
        id
    }

    /// Leaf id of every ranking of `s`.
    pub fn route(&self, s: &RankingSample) -> Result<Vec<usize>> {
        check_dims(self.n, s.n())?;
        Ok(s.rankings().iter().map(|r| self.leaf_of(r)).collect())
    }

    /// Indices of the rankings of `s` falling in each node (all nodes, not
    /// only leaves).
    pub fn members(&self, s: &RankingSample) -> Result<Vec<Vec<usize>>> {
        check_dims(self.n, s.n())?;
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (k, r) in s.rankings().iter().enumerate() {
            let mut id = 0;
            loop {
                out[id].push(k);
                match self.nodes[id].split {
                    Some(split) => {
                        let (i, j) = split.pair;
                        id = split.children[if r.prefers(i, j) { 0 } else { 1 }];
                    }
                    None => break,
                }
            }
        }
        Ok(out)
    }

    /// Copy keeping only the nodes reachable from the root without passing
    /// below a node in `collapsed`; those become leaves. Ids are renumbered
    /// preserving their relative order.
    pub(crate) fn collapse(&self, collapsed: &[bool]) -> CoastTree {
        let mut keep = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            keep[id] = true;
            if !collapsed[id] {
                if let Some(split) = self.nodes[id].split {
                    stack.extend(split.children);
                }
            }
        }
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        let mut next = 0;
        for id in 0..self.nodes.len() {
            if keep[id] {
                new_id[id] = next;
                next += 1;
            }
        }
        let nodes = self
            .nodes
            .iter()
            .filter(|n| keep[n.id])
            .map(|n| {
                let mut m = n.clone();
                m.id = new_id[n.id];
                m.parent = n.parent.map(|p| new_id[p]);
                m.split = if collapsed[n.id] {
                    None
                } else {
                    n.split
                        .map(|s| NodeSplit { pair: s.pair, children: [new_id[s.children[0]], new_id[s.children[1]]] })
                };
                m
            })
            .collect();
        CoastTree { n: self.n, sample_size: self.sample_size, estimator: self.estimator, nodes }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&RawTree::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawTree = serde_json::from_str(text)?;
        raw.try_into()
    }
}

/// Consensus ranking distribution: leaf masses on leaf medians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCrd", into = "RawCrd")]
pub struct Crd {
    pub n: usize,
    pub atoms: Vec<CrdAtom>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrdAtom {
    pub weight: f64,
    pub median: Permutation,
    pub cell: Cell,
}

impl Crd {
    /// Distribution with atoms sharing a median merged.
    pub fn to_distribution(&self) -> Result<DiscreteRankingDistribution> {
        DiscreteRankingDistribution::from_weighted(self.n, self.atoms.iter().map(|a| (a.median.clone(), a.weight)))
    }
}

pub fn crd_of(tree: &CoastTree) -> Result<Crd> {
    let atoms = tree
        .nodes
        .iter()
        .filter(|n| n.is_leaf() && n.weight > 0.0)
        .map(|n| {
            let median =
                n.median.clone().ok_or_else(|| Error::State(format!("leaf {} has no aggregated median", n.id)))?;
            Ok(CrdAtom { weight: n.weight, median, cell: n.cell.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::State(format!("leaf weights sum to {}", total)));
    }
    Ok(Crd { n: tree.n, atoms })
}

#[derive(Serialize, Deserialize)]
struct RawTree {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sample_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    estimator: Option<VarianceEstimator>,
    nodes: Vec<RawNode>,
}

#[derive(Serialize, Deserialize)]
struct RawNode {
    id: usize,
    constraints: CellSpec,
    weight: f64,
    v_hat: f64,
    split: Option<[usize; 2]>,
    children: Option<[usize; 2]>,
    median: Option<Vec<usize>>,
}

impl From<&CoastTree> for RawTree {
    fn from(t: &CoastTree) -> Self {
        RawTree {
            n: t.n,
            sample_size: Some(t.sample_size),
            estimator: Some(t.estimator),
            nodes: t
                .nodes
                .iter()
                .map(|n| RawNode {
                    id: n.id,
                    constraints: CellSpec(n.cell.constraints_one_based()),
                    weight: n.weight,
                    v_hat: n.v_hat,
                    split: n.split.map(|s| [s.pair.0 + 1, s.pair.1 + 1]),
                    children: n.split.map(|s| s.children),
                    median: n.median.as_ref().map(|m| m.ranks_one_based()),
                })
                .collect(),
        }
    }
}

impl TryFrom<RawTree> for CoastTree {
    type Error = Error;

    fn try_from(raw: RawTree) -> Result<Self> {
        let bad = |msg: String| Error::InvalidInput(format!("tree document: {}", msg));
        if raw.nodes.is_empty() {
            return Err(bad("no nodes".into()));
        }
        let count = raw.nodes.len();
        let mut nodes: Vec<CoastNode> = Vec::with_capacity(count);
        for (idx, rn) in raw.nodes.into_iter().enumerate() {
            if rn.id != idx {
                return Err(bad(format!("node at position {} has id {}", idx, rn.id)));
            }
            let split = match (rn.split, rn.children) {
                (None, None) => None,
                (Some([i, j]), Some([c0, c1])) => {
                    if i == 0 || j == 0 || i > raw.n || j > raw.n {
                        return Err(bad(format!("node {} splits on an invalid pair", idx)));
                    }
                    if c0 <= idx || c1 <= idx || c0 >= count || c1 >= count || c0 == c1 {
                        return Err(bad(format!("node {} has invalid children", idx)));
                    }
                    Some(NodeSplit { pair: (i - 1, j - 1), children: [c0, c1] })
                }
                _ => return Err(bad(format!("node {} has a split without children or vice versa", idx))),
            };
            let median = rn.median.map(|m| Permutation::from_ranks_one_based(&m)).transpose()?;
            if let Some(m) = &median {
                check_dims(raw.n, m.n())?;
            }
            nodes.push(CoastNode {
                id: idx,
                cell: rn.constraints.into_cell(raw.n)?,
                weight: rn.weight,
                v_hat: rn.v_hat,
                split,
                median,
                depth: 0,
                parent: None,
            });
        }
        // link parents and check that each child's cell is its parent's plus the split constraint
        for id in 0..count {
            if let Some(split) = nodes[id].split {
                let (i, j) = split.pair;
                let (c0, c1) = nodes[id].cell.split(i, j)?;
                for (k, expected) in [c0, c1].into_iter().enumerate() {
                    let child = split.children[k];
                    if nodes[child].parent.is_some() {
                        return Err(bad(format!("node {} has two parents", child)));
                    }
                    if nodes[child].cell != expected {
                        return Err(bad(format!("node {} cell does not refine node {}", child, id)));
                    }
                    nodes[child].parent = Some(id);
                    nodes[child].depth = nodes[id].depth + 1;
                }
            }
        }
        if nodes.iter().skip(1).any(|n| n.parent.is_none()) {
            return Err(bad("unreachable nodes".into()));
        }
        Ok(CoastTree {
            n: raw.n,
            sample_size: raw.sample_size.unwrap_or(0),
            estimator: raw.estimator.unwrap_or_default(),
            nodes,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct RawCrd {
    n: usize,
    atoms: Vec<RawAtom>,
}

#[derive(Serialize, Deserialize)]
struct RawAtom {
    weight: f64,
    median: Vec<usize>,
    cell: CellSpec,
}

impl From<Crd> for RawCrd {
    fn from(c: Crd) -> Self {
        RawCrd {
            n: c.n,
            atoms: c
                .atoms
                .into_iter()
                .map(|a| RawAtom {
                    weight: a.weight,
                    median: a.median.ranks_one_based(),
                    cell: CellSpec(a.cell.constraints_one_based()),
                })
                .collect(),
        }
    }
}

impl TryFrom<RawCrd> for Crd {
    type Error = Error;

    fn try_from(raw: RawCrd) -> Result<Self> {
        let atoms = raw
            .atoms
            .into_iter()
            .map(|a| {
                if !(a.weight > 0.0) {
                    return Err(Error::InvalidInput("atom weights must be positive".into()));
                }
                let median = Permutation::from_ranks_one_based(&a.median)?;
                check_dims(raw.n, median.n())?;
                Ok(CrdAtom { weight: a.weight, median, cell: a.cell.into_cell(raw.n)? })
            })
            .collect::<Result<Vec<_>>>()?;
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!("atom weights sum to {}", total)));
        }
        Ok(Crd { n: raw.n, atoms })
    }
}
