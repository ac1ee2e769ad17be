//! Ranking medians (exact, Copeland, depth climbing), dispersion measures and
//! stochastic-transitivity diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{
    for_each_permutation, pairs, DiscreteRankingDistribution, PairCounts, PairwiseMatrix, Permutation, RankingSample,
    DEFAULT_ENUMERATION_LIMIT,
};

/// Entries within this distance of 1/2 count as ties.
pub const TIE_TOL: f64 = 1e-12;

/// Risks within this distance of the minimum belong to the argmin set.
pub const RISK_TIE_TOL: f64 = 1e-9;

/// Largest `n` for which the automatic aggregator enumerates `𝔖_n`.
pub const AUTO_EXACT_LIMIT: usize = 7;

/// Restarts used by the automatic aggregator when it falls back to depth climbing.
pub const AUTO_RESTARTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SstKind {
    NotTransitive,
    Weak,
    Strict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SstStatus {
    pub kind: SstKind,
    /// First violating triple `(i, j, k)` in lexicographic order: `p_ij ≥ 1/2`,
    /// `p_jk ≥ 1/2` but `p_ik < 1/2`.
    pub witness: Option<(usize, usize, usize)>,
    /// `min_{i<j} |p_ij - 1/2|`.
    pub margin: f64,
}

fn at_least_half(p: f64) -> bool {
    p >= 0.5 - TIE_TOL
}

fn is_tie(p: f64) -> bool {
    (p - 0.5).abs() <= TIE_TOL
}

pub fn sst_status(m: &PairwiseMatrix) -> SstStatus {
    let n = m.n();
    let margin = pairs(n).map(|(i, j)| (m.get(i, j) - 0.5).abs()).fold(0.5, f64::min);
    let witness = find_intransitive_triple(m);
    let kind = if witness.is_some() {
        SstKind::NotTransitive
    } else if first_tie(m).is_some() {
        SstKind::Weak
    } else {
        SstKind::Strict
    };
    SstStatus { kind, witness, margin }
}

fn find_intransitive_triple(m: &PairwiseMatrix) -> Option<(usize, usize, usize)> {
    let n = m.n();
    for i in 0..n {
        for j in 0..n {
            if j == i || !at_least_half(m.get(i, j)) {
                continue;
            }
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                if at_least_half(m.get(j, k)) && !at_least_half(m.get(i, k)) {
                    return Some((i, j, k));
                }
            }
        }
    }
    None
}

fn first_tie(m: &PairwiseMatrix) -> Option<(usize, usize)> {
    pairs(m.n()).find(|&(i, j)| is_tie(m.get(i, j)))
}

/// Copeland ranking `σ*(i) = 1 + #{j ≠ i : p_ij < 1/2}`; requires strict
/// stochastic transitivity and fails otherwise.
pub fn copeland_median(m: &PairwiseMatrix) -> Result<Permutation> {
    if let Some(w) = find_intransitive_triple(m) {
        return Err(Error::NotStrictlyTransitive { witness: Some(w), tie: None });
    }
    if let Some(t) = first_tie(m) {
        return Err(Error::NotStrictlyTransitive { witness: None, tie: Some(t) });
    }
    let n = m.n();
    let ranks = (0..n).map(|i| (0..n).filter(|&j| j != i && m.get(i, j) < 0.5).count()).collect();
    Permutation::from_ranks(ranks)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedianMethod {
    Exact,
    Copeland,
    DepthClimb,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MedianResult {
    /// Sorted; the first entry is the lexicographically smallest median.
    pub medians: Vec<Permutation>,
    pub risk: f64,
    pub method: MedianMethod,
}

impl MedianResult {
    pub fn median(&self) -> &Permutation {
        &self.medians[0]
    }
}

/// Exhaustive Kemeny aggregation of a distribution.
pub fn exact_kemeny(dist: &DiscreteRankingDistribution) -> Result<MedianResult> {
    exact_kemeny_marginals(&dist.marginals(), DEFAULT_ENUMERATION_LIMIT)
}

/// Exhaustive minimization of the risk determined by `m`; the risk of any
/// ranking depends on the distribution only through its pairwise marginals.
pub fn exact_kemeny_marginals(m: &PairwiseMatrix, limit: usize) -> Result<MedianResult> {
    let mut best = f64::INFINITY;
    let mut medians: Vec<Permutation> = Vec::new();
    for_each_permutation(m.n(), limit, |sigma| {
        let r = m.risk_of(sigma);
        if r < best - RISK_TIE_TOL {
            best = r;
            medians.clear();
            medians.push(sigma.clone());
        } else if r <= best + RISK_TIE_TOL {
            if r < best {
                best = r;
            }
            medians.push(sigma.clone());
        }
    })?;
    // a later, slightly smaller minimum may leave stale entries behind
    medians.retain(|s| m.risk_of(s) <= best + RISK_TIE_TOL);
    medians.sort();
    Ok(MedianResult { medians, risk: best.max(0.0), method: MedianMethod::Exact })
}

/// Greedy climb on the empirical depth from random starts.
pub fn depth_climb_median<R: Rng + ?Sized>(s: &RankingSample, restarts: usize, rng: &mut R) -> Result<MedianResult> {
    if s.is_empty() {
        return Err(Error::InvalidInput("depth climbing on an empty sample".into()));
    }
    let m = PairCounts::from_rankings(s.n(), s.rankings()).marginals();
    depth_climb_marginals(&m, restarts, rng.gen())
}

/// Depth climbing on the risk determined by `m`. Restart `r` draws its start
/// from a generator keyed by `(seed, r)`, so results do not depend on
/// scheduling.
pub fn depth_climb_marginals(m: &PairwiseMatrix, restarts: usize, seed: u64) -> Result<MedianResult> {
    if restarts == 0 {
        return Err(Error::InvalidInput("depth climbing needs at least one restart".into()));
    }
    let n = m.n();
    let ends: Vec<(f64, Permutation)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let start = Permutation::random(n, &mut rng);
            let end = climb(m, start);
            (m.risk_of(&end), end)
        })
        .collect();
    let (risk, median) =
        ends.into_iter().min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1))).expect("at least one restart");
    Ok(MedianResult { medians: vec![median], risk: risk.max(0.0), method: MedianMethod::DepthClimb })
}

/// Moves to the adjacent transposition with the largest depth gain until none
/// is positive. Swapping `a` (ahead) with `b` changes the risk by `2 p_ab - 1`.
fn climb(m: &PairwiseMatrix, start: Permutation) -> Permutation {
    let mut order = start.ordering();
    loop {
        let mut best: Option<(f64, usize)> = None;
        for r in 0..order.len().saturating_sub(1) {
            let delta = 2.0 * m.get(order[r], order[r + 1]) - 1.0;
            if delta < -TIE_TOL && best.is_none_or(|(d, _)| delta < d) {
                best = Some((delta, r));
            }
        }
        match best {
            Some((_, r)) => order.swap(r, r + 1),
            None => break,
        }
    }
    Permutation::from_ordering(&order).expect("swaps preserve the permutation")
}

/// `Σ_{i<j} min{p_ij, 1 - p_ij}`: the Kemeny risk of an SST distribution, and
/// a lower bound on it in general.
pub fn dispersion_v(m: &PairwiseMatrix) -> f64 {
    pairs(m.n()).map(|(i, j)| m.get(i, j).min(m.get(j, i))).sum()
}

/// `Σ_{i<j} p_ij (1 - p_ij)`, half the expected distance between two
/// independent draws.
pub fn dispersion_v_prime(m: &PairwiseMatrix) -> f64 {
    pairs(m.n()).map(|(i, j)| m.get(i, j) * m.get(j, i)).sum()
}

/// Local aggregation algorithm used on each leaf of a tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum Aggregator {
    Exact,
    Copeland,
    DepthClimb {
        restarts: usize,
    },
    /// Exact when `n ≤ AUTO_EXACT_LIMIT`, else Copeland when strictly SST,
    /// else depth climbing with `AUTO_RESTARTS` restarts.
    #[default]
    Auto,
}

impl std::str::FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Aggregator::Exact),
            "copeland" => Ok(Aggregator::Copeland),
            "depth-climb" | "depth_climb" => Ok(Aggregator::DepthClimb { restarts: AUTO_RESTARTS }),
            "auto" => Ok(Aggregator::Auto),
            other => Err(Error::InvalidInput(format!("unknown aggregator {:?}", other))),
        }
    }
}

impl Aggregator {
    /// Median of the local distribution with marginals `m`.
    pub fn aggregate(&self, m: &PairwiseMatrix, seed: u64) -> Result<MedianResult> {
        match *self {
            Aggregator::Exact => exact_kemeny_marginals(m, DEFAULT_ENUMERATION_LIMIT),
            Aggregator::Copeland => {
                let median = copeland_median(m)?;
                Ok(MedianResult { risk: m.risk_of(&median), medians: vec![median], method: MedianMethod::Copeland })
            }
            Aggregator::DepthClimb { restarts } => depth_climb_marginals(m, restarts, seed),
            Aggregator::Auto => {
                if m.n() <= AUTO_EXACT_LIMIT {
                    return exact_kemeny_marginals(m, AUTO_EXACT_LIMIT);
                }
                match copeland_median(m) {
                    Ok(median) => Ok(MedianResult {
                        risk: m.risk_of(&median),
                        medians: vec![median],
                        method: MedianMethod::Copeland,
                    }),
                    Err(_) => depth_climb_marginals(m, AUTO_RESTARTS, seed),
                }
            }
        }
    }

    /// Median of a multiset of rankings. A multiset with a single distinct
    /// ranking is its own median regardless of the algorithm.
    pub fn aggregate_rankings(&self, n: usize, rankings: &[&Permutation], seed: u64) -> Result<MedianResult> {
        if let Some(first) = rankings.first() {
            if rankings.iter().all(|r| r == first) {
                return Ok(MedianResult { medians: vec![(*first).clone()], risk: 0.0, method: MedianMethod::Exact });
            }
        }
        let m = PairCounts::from_rankings(n, rankings.iter().copied()).marginals();
        self.aggregate(&m, seed)
    }
}
