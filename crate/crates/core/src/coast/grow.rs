use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CoastNode, CoastTree, NodeSplit};
use crate::consensus::Aggregator;
use crate::error::{Error, Result};
use crate::partition::{Cell, VarianceEstimator};
use crate::perm::{check_dims, kendall_tau_unchecked, PairCounts, Permutation, RankingSample};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Pair minimizing the weighted variability of the two children.
    #[default]
    MinDistortion,
    /// Pair whose local marginal is closest to 1/2.
    Balanced,
}

impl std::str::FromStr for SplitRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-distortion" | "min_distortion" => Ok(SplitRule::MinDistortion),
            "balanced" => Ok(SplitRule::Balanced),
            other => Err(Error::InvalidInput(format!("unknown split rule {:?}", other))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowConfig {
    /// Leaves with `v_hat ≤ epsilon` are not split.
    pub epsilon: f64,
    pub rule: SplitRule,
    /// Defaults to the sample size.
    pub max_leaves: Option<usize>,
    /// Split only the leaf with the largest criterion decrease per iteration
    /// instead of every eligible leaf.
    pub one_split_per_iter: bool,
    /// Stops after this many iterations.
    pub max_iterations: Option<usize>,
    pub aggregator: Aggregator,
    pub estimator: VarianceEstimator,
    /// Seeds the randomized aggregators.
    pub seed: u64,
}

impl Default for GrowConfig {
    fn default() -> Self {
        GrowConfig {
            epsilon: 0.0,
            rule: SplitRule::MinDistortion,
            max_leaves: None,
            one_split_per_iter: false,
            max_iterations: None,
            aggregator: Aggregator::Auto,
            estimator: VarianceEstimator::Unbiased,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthRecord {
    pub iteration: usize,
    pub leaves: usize,
    /// `Σ_leaves (N_C / N) v_hat(C)` after the iteration.
    pub criterion: f64,
    /// `(node id, pair)` of every split made in the iteration.
    pub splits: Vec<(usize, (usize, usize))>,
    /// Seconds since growth started.
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GrowthTrace {
    pub records: Vec<GrowthRecord>,
}

impl GrowthTrace {
    pub fn criteria(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.criterion).collect()
    }

    /// First record with at least `k` leaves.
    pub fn at_leaves(&self, k: usize) -> Option<&GrowthRecord> {
        self.records.iter().find(|r| r.leaves >= k)
    }
}

/// Evaluated split of one cell.
#[derive(Clone, Debug)]
struct Candidate {
    pair: (usize, usize),
    /// Weighted children criterion `Σ_k (N_k / N) v(C_k)`.
    value: f64,
}

struct Leaf {
    members: Vec<usize>,
    counts: PairCounts,
    distance_sum: u64,
}

impl Leaf {
    fn new(s: &RankingSample, members: Vec<usize>) -> Self {
        let counts = PairCounts::from_rankings(s.n(), members.iter().map(|&k| s.get(k)));
        let distance_sum = counts.sum_pairwise_distances();
        Leaf { members, counts, distance_sum }
    }
}

/// Relative slack under which two criterion values count as tied.
const VALUE_TIE: f64 = 1e-12;

fn better(value: f64, best: f64) -> bool {
    value < best - VALUE_TIE * best.abs().max(1.0)
}

fn children_value(counts: [usize; 2], sums: [u64; 2], est: VarianceEstimator, total: usize) -> f64 {
    let t = total as f64;
    (0..2).map(|k| counts[k] as f64 / t * est.estimate(sums[k], counts[k])).sum()
}

/// Child sizes and pairwise distance sums obtained by counting child 0 and
/// subtracting it from the parent counts.
fn child_sums_by_counts(
    s: &RankingSample,
    members: &[usize],
    parent: &PairCounts,
    (i, j): (usize, usize),
) -> ([usize; 2], [u64; 2]) {
    let c0 = PairCounts::from_rankings(s.n(), members.iter().map(|&k| s.get(k)).filter(|r| r.prefers(i, j)));
    let c1 = parent.minus(&c0);
    ([c0.total(), c1.total()], [c0.sum_pairwise_distances(), c1.sum_pairwise_distances()])
}

/// Child sizes and distance sums from a precomputed member distance matrix.
fn child_sums_by_matrix(
    s: &RankingSample,
    members: &[usize],
    dist: &[u32],
    (i, j): (usize, usize),
) -> ([usize; 2], [u64; 2]) {
    let m = members.len();
    let side: Vec<usize> = members.iter().map(|&k| if s.get(k).prefers(i, j) { 0 } else { 1 }).collect();
    let mut sums = [0u64; 2];
    let mut counts = [0usize; 2];
    for a in 0..m {
        counts[side[a]] += 1;
        let row = &dist[a * m..(a + 1) * m];
        for b in a + 1..m {
            if side[a] == side[b] {
                sums[side[a]] += row[b] as u64;
            }
        }
    }
    (counts, sums)
}

/// Distance matrices are used when their quadratic cost undercuts repeated
/// pair counting and they fit comfortably in memory.
const MATRIX_MEMBER_LIMIT: usize = 4000;

fn use_distance_matrix(m: usize, n: usize, pairs: usize) -> bool {
    m <= MATRIX_MEMBER_LIMIT && (m as f64 / 2.0) * (pairs + n) as f64 <= pairs as f64 * (n * n) as f64 / 4.0
}

fn best_min_distortion(
    s: &RankingSample,
    members: &[usize],
    counts: &PairCounts,
    pairs: &[(usize, usize)],
    est: VarianceEstimator,
    total: usize,
) -> Option<Candidate> {
    if pairs.is_empty() {
        return None;
    }
    let m = members.len();
    let values: Vec<f64> = if use_distance_matrix(m, s.n(), pairs.len()) {
        let mut dist = vec![0u32; m * m];
        for a in 0..m {
            for b in a + 1..m {
                let d = kendall_tau_unchecked(s.get(members[a]), s.get(members[b])) as u32;
                dist[a * m + b] = d;
                dist[b * m + a] = d;
            }
        }
        pairs
            .par_iter()
            .map(|&p| {
                let (c, sums) = child_sums_by_matrix(s, members, &dist, p);
                children_value(c, sums, est, total)
            })
            .collect()
    } else {
        pairs
            .par_iter()
            .map(|&p| {
                let (c, sums) = child_sums_by_counts(s, members, counts, p);
                children_value(c, sums, est, total)
            })
            .collect()
    };
    let mut best = 0;
    for k in 1..values.len() {
        if better(values[k], values[best]) {
            best = k;
        }
    }
    Some(Candidate { pair: pairs[best], value: values[best] })
}

fn best_balanced(
    s: &RankingSample,
    members: &[usize],
    counts: &PairCounts,
    pairs: &[(usize, usize)],
    est: VarianceEstimator,
    total: usize,
) -> Option<Candidate> {
    let m = counts.total() as i64;
    // |p_ij - 1/2| compared exactly as |2 c_ij - N_C|
    let &pair = pairs.iter().min_by_key(|&&(i, j)| (2 * counts.before(i, j) as i64 - m).abs())?;
    let (c, sums) = child_sums_by_counts(s, members, counts, pair);
    Some(Candidate { pair, value: children_value(c, sums, est, total) })
}

fn best_split(
    s: &RankingSample,
    cell: &Cell,
    leaf: &Leaf,
    rule: SplitRule,
    est: VarianceEstimator,
    total: usize,
) -> Option<Candidate> {
    // only pairs on which the cell's rankings disagree produce two nonempty children
    let m = leaf.counts.total();
    let pairs: Vec<(usize, usize)> = cell
        .admissible_pairs()
        .into_iter()
        .filter(|&(i, j)| {
            let c = leaf.counts.before(i, j);
            c > 0 && c < m
        })
        .collect();
    match rule {
        SplitRule::MinDistortion => best_min_distortion(s, &leaf.members, &leaf.counts, &pairs, est, total),
        SplitRule::Balanced => best_balanced(s, &leaf.members, &leaf.counts, &pairs, est, total),
    }
}

fn cell_members(s: &RankingSample, c: &Cell) -> Result<Vec<usize>> {
    check_dims(c.n(), s.n())?;
    Ok((0..s.len()).filter(|&k| c.contains(s.get(k))).collect())
}

/// Admissible pair of `c` minimizing the weighted unbiased variability of
/// the two children on `s`; ties go to the lexicographically first pair.
pub fn choose_split_min_distortion(c: &Cell, s: &RankingSample) -> Result<(usize, usize)> {
    let pairs = c.admissible_pairs();
    if pairs.is_empty() {
        return Err(Error::CannotSplit);
    }
    let members = cell_members(s, c)?;
    let counts = PairCounts::from_rankings(s.n(), members.iter().map(|&k| s.get(k)));
    let total = s.len().max(1);
    Ok(best_min_distortion(s, &members, &counts, &pairs, VarianceEstimator::Unbiased, total)
        .expect("nonempty candidate set")
        .pair)
}

/// Admissible pair of `c` whose local marginal is closest to 1/2; ties go to
/// the lexicographically first pair.
pub fn choose_split_balanced(c: &Cell, s: &RankingSample) -> Result<(usize, usize)> {
    let pairs = c.admissible_pairs();
    if pairs.is_empty() {
        return Err(Error::CannotSplit);
    }
    let members = cell_members(s, c)?;
    let counts = PairCounts::from_rankings(s.n(), members.iter().map(|&k| s.get(k)));
    let m = counts.total() as i64;
    Ok(*pairs.iter().min_by_key(|&&(i, j)| (2 * counts.before(i, j) as i64 - m).abs()).expect("nonempty candidate set"))
}

fn node_seed(seed: u64, id: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add((id as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Grows a tree on `s` and aggregates a median in every node.
pub fn grow(s: &RankingSample, config: &GrowConfig) -> Result<(CoastTree, GrowthTrace)> {
    if s.is_empty() {
        return Err(Error::InvalidInput("cannot grow a tree on an empty sample".into()));
    }
    if !(config.epsilon >= 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be nonnegative, got {}", config.epsilon)));
    }
    let start = Instant::now();
    let n = s.n();
    let total = s.len();
    let est = config.estimator;
    let max_leaves = config.max_leaves.unwrap_or(total).max(1);

    let root_leaf = Leaf::new(s, (0..total).collect());
    let mut nodes = vec![CoastNode {
        id: 0,
        cell: Cell::root(n),
        weight: 1.0,
        v_hat: est.estimate(root_leaf.distance_sum, total),
        split: None,
        median: None,
        depth: 0,
        parent: None,
    }];
    let mut members: Vec<Vec<usize>> = vec![Vec::new()];
    let mut leaves: Vec<Option<Leaf>> = vec![Some(root_leaf)];
    let mut cache: Vec<Option<Candidate>> = vec![None];
    let mut leaf_count = 1;

    let criterion =
        |nodes: &[CoastNode]| -> f64 { nodes.iter().filter(|n| n.is_leaf()).map(|n| n.weight * n.v_hat).sum() };
    let mut trace = GrowthTrace {
        records: vec![GrowthRecord {
            iteration: 0,
            leaves: 1,
            criterion: criterion(&nodes),
            splits: Vec::new(),
            seconds: 0.0,
        }],
    };

    for iteration in 1.. {
        if config.max_iterations.is_some_and(|m| iteration > m) {
            break;
        }
        let eligible: Vec<usize> = (0..nodes.len())
            .filter(|&id| leaves[id].as_ref().is_some_and(|l| l.distance_sum > 0) && nodes[id].v_hat > config.epsilon)
            .collect();
        if eligible.is_empty() {
            break;
        }
        let missing: Vec<usize> = eligible.iter().copied().filter(|&id| cache[id].is_none()).collect();
        let found: Vec<(usize, Option<Candidate>)> = missing
            .par_iter()
            .map(|&id| {
                (id, best_split(s, &nodes[id].cell, leaves[id].as_ref().expect("leaf"), config.rule, est, total))
            })
            .collect();
        for (id, cand) in found {
            cache[id] = cand;
        }
        let ready: Vec<usize> = eligible.into_iter().filter(|&id| cache[id].is_some()).collect();
        if ready.is_empty() {
            break;
        }
        let chosen: Vec<usize> = if config.one_split_per_iter {
            if leaf_count + 1 > max_leaves {
                break;
            }
            let decrease = |id: usize| nodes[id].weight * nodes[id].v_hat - cache[id].as_ref().expect("cached").value;
            let mut best = ready[0];
            for &id in &ready[1..] {
                if better(-decrease(id), -decrease(best)) {
                    best = id;
                }
            }
            vec![best]
        } else {
            if leaf_count + ready.len() > max_leaves {
                break;
            }
            ready
        };

        let mut splits = Vec::with_capacity(chosen.len());
        for id in chosen {
            let cand = cache[id].take().expect("cached candidate");
            let leaf = leaves[id].take().expect("splitting a leaf");
            let (i, j) = cand.pair;
            let (c0, c1) = nodes[id].cell.split(i, j)?;
            let (m0, m1): (Vec<usize>, Vec<usize>) = leaf.members.iter().partition(|&&k| s.get(k).prefers(i, j));
            let l0 = Leaf::new(s, m0);
            let counts1 = leaf.counts.minus(&l0.counts);
            let l1 = Leaf { distance_sum: counts1.sum_pairwise_distances(), counts: counts1, members: m1 };
            let base = nodes.len();
            for (k, (cell, l)) in [(c0, l0), (c1, l1)].into_iter().enumerate() {
                nodes.push(CoastNode {
                    id: base + k,
                    cell,
                    weight: l.members.len() as f64 / total as f64,
                    v_hat: est.estimate(l.distance_sum, l.members.len()),
                    split: None,
                    median: None,
                    depth: nodes[id].depth + 1,
                    parent: Some(id),
                });
                leaves.push(Some(l));
                members.push(Vec::new());
                cache.push(None);
            }
            nodes[id].split = Some(NodeSplit { pair: (i, j), children: [base, base + 1] });
            members[id] = leaf.members;
            leaf_count += 1;
            splits.push((id, (i, j)));
        }
        trace.records.push(GrowthRecord {
            iteration,
            leaves: leaf_count,
            criterion: criterion(&nodes),
            splits,
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    for (id, leaf) in leaves.into_iter().enumerate() {
        if let Some(l) = leaf {
            members[id] = l.members;
        }
    }
    let medians: Vec<Permutation> = members
        .par_iter()
        .enumerate()
        .map(|(id, m)| {
            let refs: Vec<&Permutation> = m.iter().map(|&k| s.get(k)).collect();
            config.aggregator.aggregate_rankings(n, &refs, node_seed(config.seed, id)).map(|r| r.median().clone())
        })
        .collect::<Result<_>>()?;
    for (node, median) in nodes.iter_mut().zip(medians) {
        node.median = Some(median);
    }
    Ok((CoastTree::from_parts(n, total, est, nodes), trace))
}
