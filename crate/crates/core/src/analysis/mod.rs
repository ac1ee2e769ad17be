//! Statistics on a fitted tree: local and global depths, anomaly scores,
//! DD-plot tables, co-membership, smoothing, homogeneity tests and the
//! chain factorization of a ranking distribution.

mod chain;
mod homogeneity;
mod smoothing;

pub use chain::{argmax_pair, chain_pmf, condition_on_pair};
pub use homogeneity::{auc, homogeneity_test, mann_whitney_exact, HomogeneityResult, EXACT_LIMIT};
pub use smoothing::{
    entry_discrepancies, smooth_cell, uniform_cell_marginals, EntryDiscrepancy, EntryTable, SmoothMethod,
    SmoothedCellDistribution,
};

use crate::coast::CoastTree;
use crate::error::{Error, Result};
use crate::perm::{check_dims, n_pairs, PairCounts, PairwiseMatrix, Permutation, RankingSample};

#[derive(Clone, Debug, PartialEq)]
pub struct DepthRecord {
    /// Position of the ranking in the query sample.
    pub index: usize,
    pub local_depth: f64,
    pub global_depth: f64,
    /// Node id of the cell the local depth refers to.
    pub cell: usize,
    pub label: Option<usize>,
}

fn depth_at(m: &PairwiseMatrix, sigma: &Permutation) -> f64 {
    n_pairs(m.n()) as f64 - m.risk_of(sigma)
}

fn global_marginals(fit: &RankingSample) -> Result<PairwiseMatrix> {
    if fit.is_empty() {
        return Err(Error::InvalidInput("fit sample is empty".into()));
    }
    Ok(PairCounts::from_rankings(fit.n(), fit.rankings()).marginals())
}

/// Empirical marginals of the fit rankings in each node, indexed by node id.
/// A node holding no fit ranking gets the uniform marginals.
fn node_marginals(tree: &CoastTree, fit: &RankingSample) -> Result<Vec<PairwiseMatrix>> {
    let members = tree.members(fit)?;
    Ok(members
        .iter()
        .map(|idx| {
            if idx.is_empty() {
                PairwiseMatrix::uniform(fit.n())
            } else {
                PairCounts::from_rankings(fit.n(), idx.iter().map(|&k| fit.get(k))).marginals()
            }
        })
        .collect())
}

fn check_query(tree: &CoastTree, fit: &RankingSample, query: &RankingSample) -> Result<()> {
    check_dims(tree.n(), fit.n())?;
    check_dims(tree.n(), query.n())
}

/// Depth of every query ranking within the fit conditional of its leaf, and
/// under the whole fit sample.
pub fn local_depths(tree: &CoastTree, fit: &RankingSample, query: &RankingSample) -> Result<Vec<DepthRecord>> {
    check_query(tree, fit, query)?;
    let global = global_marginals(fit)?;
    let local = node_marginals(tree, fit)?;
    let labels = query.labels();
    Ok(query
        .rankings()
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let leaf = tree.leaf_of(r);
            DepthRecord {
                index: k,
                local_depth: depth_at(&local[leaf], r),
                global_depth: depth_at(&global, r),
                cell: leaf,
                label: labels.map(|l| l[k]),
            }
        })
        .collect())
}

/// Negated local depth: larger means more anomalous.
pub fn anomaly_scores(tree: &CoastTree, fit: &RankingSample, query: &RankingSample) -> Result<Vec<f64>> {
    Ok(local_depths(tree, fit, query)?.into_iter().map(|d| -d.local_depth).collect())
}

/// Depth records where every local depth is taken against the fit conditional
/// of the leaf `reference_cell`, whichever leaf the query falls in.
pub fn ddplot_table(
    tree: &CoastTree,
    fit: &RankingSample,
    query: &RankingSample,
    reference_cell: usize,
) -> Result<Vec<DepthRecord>> {
    check_query(tree, fit, query)?;
    match tree.node(reference_cell) {
        Some(node) if node.is_leaf() => {}
        Some(_) => return Err(Error::InvalidInput(format!("node {} is not a leaf", reference_cell))),
        None => return Err(Error::InvalidInput(format!("unknown cell id {}", reference_cell))),
    }
    let global = global_marginals(fit)?;
    let reference = node_marginals(tree, fit)?.swap_remove(reference_cell);
    let labels = query.labels();
    Ok(query
        .rankings()
        .iter()
        .enumerate()
        .map(|(k, r)| DepthRecord {
            index: k,
            local_depth: depth_at(&reference, r),
            global_depth: depth_at(&global, r),
            cell: reference_cell,
            label: labels.map(|l| l[k]),
        })
        .collect())
}

/// `m[k][l]` is true when rankings `k` and `l` of `s` share a leaf.
pub fn co_membership(tree: &CoastTree, s: &RankingSample) -> Result<Vec<Vec<bool>>> {
    let leaf = tree.route(s)?;
    Ok(leaf.iter().map(|a| leaf.iter().map(|b| a == b).collect()).collect())
}
