//! Permutations, Kendall tau distance, pairwise marginals and ranking risk.
//!
//! A [`Permutation`] stores the item-to-rank map: `rank(i)` is the position of
//! item `i` in the ranking, 0 being the most preferred. Items and ranks are
//! 0-based in memory and 1-based in every external format.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest `n` for which exhaustive enumeration of the symmetric group is
/// allowed unless a caller overrides it (9! = 362 880).
pub const DEFAULT_ENUMERATION_LIMIT: usize = 9;

/// Tolerance used when checking that probability vectors sum to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-10;

/// A full ranking of `n` items, stored as item -> rank.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    ranks: Vec<usize>,
}

impl Permutation {
    /// Builds a permutation from 0-based ranks, validating bijectivity.
    pub fn from_ranks(ranks: Vec<usize>) -> Result<Self> {
        let n = ranks.len();
        if n == 0 {
            return Err(Error::InvalidInput("a permutation needs at least one item".into()));
        }
        let mut seen = vec![false; n];
        for &r in &ranks {
            if r >= n || seen[r] {
                return Err(Error::InvalidInput(format!("ranks {:?} are not a bijection onto 0..{}", ranks, n)));
            }
            seen[r] = true;
        }
        Ok(Permutation { ranks })
    }

    /// Builds a permutation from 1-based ranks `σ(1), …, σ(n)`.
    pub fn from_ranks_one_based(ranks: &[usize]) -> Result<Self> {
        if ranks.contains(&0) {
            return Err(Error::InvalidInput("1-based ranks must be positive".into()));
        }
        Self::from_ranks(ranks.iter().map(|&r| r - 1).collect())
    }

    /// Builds a permutation from an ordering: `ordering[r]` is the 0-based item
    /// placed at rank `r`.
    pub fn from_ordering(ordering: &[usize]) -> Result<Self> {
        let n = ordering.len();
        if n == 0 {
            return Err(Error::InvalidInput("a permutation needs at least one item".into()));
        }
        let mut ranks = vec![usize::MAX; n];
        for (r, &item) in ordering.iter().enumerate() {
            if item >= n || ranks[item] != usize::MAX {
                return Err(Error::InvalidInput(format!("ordering {:?} is not a bijection onto 0..{}", ordering, n)));
            }
            ranks[item] = r;
        }
        Ok(Permutation { ranks })
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1);
        Permutation { ranks: (0..n).collect() }
    }

    pub fn reverse(n: usize) -> Self {
        assert!(n >= 1);
        Permutation { ranks: (0..n).rev().collect() }
    }

    /// Uniform draw from the symmetric group.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut ranks: Vec<usize> = (0..n).collect();
        ranks.shuffle(rng);
        Permutation { ranks }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.ranks.len()
    }

    #[inline]
    pub fn rank(&self, item: usize) -> usize {
        self.ranks[item]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn ranks_one_based(&self) -> Vec<usize> {
        self.ranks.iter().map(|r| r + 1).collect()
    }

    /// `true` when `a` is ranked ahead of `b`.
    #[inline]
    pub fn prefers(&self, a: usize, b: usize) -> bool {
        self.ranks[a] < self.ranks[b]
    }

    /// Rank -> item view (`σ⁻¹`).
    pub fn ordering(&self) -> Vec<usize> {
        let mut inv = vec![0; self.n()];
        for (item, &r) in self.ranks.iter().enumerate() {
            inv[r] = item;
        }
        inv
    }

    pub fn inverse(&self) -> Permutation {
        Permutation { ranks: self.ordering() }
    }

    /// Relabels items through `c`: the result maps item `i` to `self(c(i))`.
    pub fn compose(&self, c: &Permutation) -> Result<Permutation> {
        check_dims(self.n(), c.n())?;
        Ok(Permutation { ranks: c.ranks.iter().map(|&ci| self.ranks[ci]).collect() })
    }

    /// Swaps the two items occupying ranks `r` and `r + 1`.
    pub fn swap_adjacent(&self, r: usize) -> Permutation {
        let ordering = self.ordering();
        let mut ranks = self.ranks.clone();
        ranks.swap(ordering[r], ordering[r + 1]);
        Permutation { ranks }
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation{:?}", self.ranks_one_based())
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.ranks.iter().map(|r| (r + 1).to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl Serialize for Permutation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.ranks_one_based().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let ranks = Vec::<usize>::deserialize(deserializer)?;
        Permutation::from_ranks_one_based(&ranks).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Number of item pairs, `n(n-1)/2`; also the Kendall tau diameter of `𝔖_n`.
#[inline]
pub fn n_pairs(n: usize) -> usize {
    n * (n.saturating_sub(1)) / 2
}

/// Unordered pairs `(i, j)` with `i < j` in lexicographic order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Kendall tau distance: number of item pairs ordered differently.
///
/// Runs in `O(n log n)` by counting inversions with a merge sort.
pub fn kendall_tau(a: &Permutation, b: &Permutation) -> Result<usize> {
    check_dims(a.n(), b.n())?;
    Ok(kendall_tau_unchecked(a, b))
}

pub(crate) fn kendall_tau_unchecked(a: &Permutation, b: &Permutation) -> usize {
    let n = a.n();
    // b's ranks listed in a's order; discordant pairs are its inversions.
    let mut seq = vec![0usize; n];
    for item in 0..n {
        seq[a.ranks[item]] = b.ranks[item];
    }
    let mut buf = vec![0usize; n];
    count_inversions(&mut seq, &mut buf)
}

fn count_inversions(xs: &mut [usize], buf: &mut [usize]) -> usize {
    let n = xs.len();
    if n < 2 {
        return 0;
    }
    if n <= 16 {
        // insertion sort; shifts equal the inversion count
        let mut inv = 0;
        for i in 1..n {
            let v = xs[i];
            let mut j = i;
            while j > 0 && xs[j - 1] > v {
                xs[j] = xs[j - 1];
                j -= 1;
            }
            inv += i - j;
            xs[j] = v;
        }
        return inv;
    }
    let mid = n / 2;
    let mut inv = {
        let (left, right) = xs.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        count_inversions(left, bl) + count_inversions(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if xs[i] <= xs[j] {
            buf[k] = xs[i];
            i += 1;
        } else {
            buf[k] = xs[j];
            inv += mid - i;
            j += 1;
        }
        k += 1;
    }
    while i < mid {
        buf[k] = xs[i];
        i += 1;
        k += 1;
    }
    while j < n {
        buf[k] = xs[j];
        j += 1;
        k += 1;
    }
    xs.copy_from_slice(&buf[..n]);
    inv
}

/// Reference `O(n²)` Kendall tau by direct pair enumeration.
pub fn kendall_tau_pairwise(a: &Permutation, b: &Permutation) -> Result<usize> {
    check_dims(a.n(), b.n())?;
    Ok(pairs(a.n())
        .filter(|&(i, j)| {
            let da = a.rank(i) as isize - a.rank(j) as isize;
            let db = b.rank(i) as isize - b.rank(j) as isize;
            da * db < 0
        })
        .count())
}

/// An ordered multiset of full rankings over the same `n` items.
#[derive(Clone, Debug, PartialEq)]
pub struct RankingSample {
    n: usize,
    rankings: Vec<Permutation>,
    labels: Option<Vec<usize>>,
}

impl RankingSample {
    pub fn new(n: usize, rankings: Vec<Permutation>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        for r in &rankings {
            check_dims(n, r.n())?;
        }
        Ok(RankingSample { n, rankings, labels: None })
    }

    pub fn with_labels(n: usize, rankings: Vec<Permutation>, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != rankings.len() {
            return Err(Error::InvalidInput(format!("{} labels for {} rankings", labels.len(), rankings.len())));
        }
        let mut s = Self::new(n, rankings)?;
        s.labels = Some(labels);
        Ok(s)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.rankings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rankings.is_empty()
    }

    pub fn rankings(&self) -> &[Permutation] {
        &self.rankings
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn get(&self, k: usize) -> &Permutation {
        &self.rankings[k]
    }

    /// Subsample at the given indices, keeping labels aligned.
    pub fn select(&self, indices: &[usize]) -> RankingSample {
        RankingSample {
            n: self.n,
            rankings: indices.iter().map(|&k| self.rankings[k].clone()).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&k| l[k]).collect()),
        }
    }

    pub fn drop_labels(mut self) -> Self {
        self.labels = None;
        self
    }
}

/// Matrix of pairwise probabilities `p[i][j] = P{Σ(i) < Σ(j)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseMatrix {
    n: usize,
    p: Vec<f64>,
}

impl PairwiseMatrix {
    /// The matrix with every off-diagonal entry at 1/2.
    pub fn uniform(n: usize) -> Self {
        PairwiseMatrix { n, p: vec![0.5; n * n] }
    }

    /// Builds a matrix from its strictly upper triangle, given row by row as a
    /// function of `(i, j)` with `i < j`; lower entries are complements.
    pub fn from_upper<F: FnMut(usize, usize) -> f64>(n: usize, mut upper: F) -> Result<Self> {
        let mut m = Self::uniform(n);
        for (i, j) in pairs(n) {
            let v = upper(i, j);
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("p[{}][{}] = {} lies outside [0, 1]", i + 1, j + 1, v)));
            }
            m.p[i * n + j] = v;
            m.p[j * n + i] = 1.0 - v;
        }
        Ok(m)
    }

    /// Validates a full row-major matrix.
    pub fn from_rows(n: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != n * n {
            return Err(Error::InvalidInput(format!("expected {} entries, found {}", n * n, p.len())));
        }
        for (i, j) in pairs(n) {
            let (a, b) = (p[i * n + j], p[j * n + i]);
            if !(0.0..=1.0).contains(&a) || (a + b - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "entries ({0},{1}) and ({1},{0}) violate p + p' = 1",
                    i + 1,
                    j + 1
                )));
            }
        }
        let mut m = PairwiseMatrix { n, p };
        for i in 0..n {
            m.p[i * n + i] = 0.5;
        }
        Ok(m)
    }

    /// Row-major matrix taken as is, for tables that need not satisfy
    /// `p[a][b] + p[b][a] = 1`.
    pub(crate) fn from_rows_unchecked(n: usize, p: Vec<f64>) -> Self {
        debug_assert_eq!(p.len(), n * n);
        PairwiseMatrix { n, p }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }

    /// Risk of `σ` under any distribution with these marginals:
    /// `Σ_{i<j}` of the probability of disagreeing with `σ` on `{i, j}`.
    pub fn risk_of(&self, sigma: &Permutation) -> f64 {
        pairs(self.n).map(|(i, j)| if sigma.prefers(i, j) { self.get(j, i) } else { self.get(i, j) }).sum()
    }
}

/// Integer pair counts `c[i][j] = #{k : Σ_k(i) < Σ_k(j)}` over a multiset of
/// rankings.
#[derive(Clone, Debug)]
pub struct PairCounts {
    n: usize,
    total: usize,
    before: Vec<u32>,
}

impl PairCounts {
    pub fn new(n: usize) -> Self {
        PairCounts { n, total: 0, before: vec![0; n * n] }
    }

    pub fn from_rankings<'a, I: IntoIterator<Item = &'a Permutation>>(n: usize, rankings: I) -> Self {
        let mut c = Self::new(n);
        for r in rankings {
            c.add(r);
        }
        c
    }

    pub fn add(&mut self, sigma: &Permutation) {
        let n = self.n;
        let ordering = sigma.ordering();
        for (r, &a) in ordering.iter().enumerate() {
            let row = &mut self.before[a * n..(a + 1) * n];
            for &b in &ordering[r + 1..] {
                row[b] += 1;
            }
        }
        self.total += 1;
    }

    #[inline]
    pub fn total(&self) -> usize {
        self.total
    }

    #[inline]
    pub fn before(&self, i: usize, j: usize) -> usize {
        self.before[i * self.n + j] as usize
    }

    /// Empirical marginals; all entries 1/2 when no ranking was added.
    pub fn marginals(&self) -> PairwiseMatrix {
        let n = self.n;
        let mut m = PairwiseMatrix::uniform(n);
        if self.total == 0 {
            return m;
        }
        let t = self.total as f64;
        for (i, j) in pairs(n) {
            let c = self.before(i, j);
            m.p[i * n + j] = c as f64 / t;
            // written from the complementary count so p + p' = 1 holds exactly
            m.p[j * n + i] = (self.total - c) as f64 / t;
        }
        m
    }

    /// `Σ_{k<l} d(Σ_k, Σ_l)`, computed as `Σ_{i<j} c_ij (N - c_ij)`.
    pub fn sum_pairwise_distances(&self) -> u64 {
        pairs(self.n)
            .map(|(i, j)| {
                let c = self.before(i, j) as u64;
                c * (self.total as u64 - c)
            })
            .sum()
    }

    /// Element-wise difference, used to derive one split child from its parent.
    pub fn minus(&self, other: &PairCounts) -> PairCounts {
        PairCounts {
            n: self.n,
            total: self.total - other.total,
            before: self.before.iter().zip(&other.before).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Empirical pairwise marginals of a sample.
pub fn pairwise_marginals(sample: &RankingSample) -> Result<PairwiseMatrix> {
    if sample.is_empty() {
        return Err(Error::InvalidInput("pairwise marginals of an empty sample".into()));
    }
    Ok(PairCounts::from_rankings(sample.n(), sample.rankings()).marginals())
}

/// A probability distribution with finite support on `𝔖_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteRankingDistribution {
    n: usize,
    support: Vec<Permutation>,
    weights: Vec<f64>,
}

impl DiscreteRankingDistribution {
    pub fn new(n: usize, support: Vec<Permutation>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::InvalidInput("support and weights differ in length".into()));
        }
        if support.is_empty() {
            return Err(Error::InvalidInput("empty support".into()));
        }
        for s in &support {
            check_dims(n, s.n())?;
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!("weights sum to {}, not 1", total)));
        }
        let mut sorted: Vec<&Permutation> = support.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("support entries must be distinct".into()));
        }
        Ok(DiscreteRankingDistribution { n, support, weights })
    }

    /// Merges duplicate support points, drops zero masses and normalizes.
    /// Weights already summing to 1 within [`WEIGHT_SUM_TOL`] are kept as
    /// given. The resulting support is sorted.
    pub fn from_weighted<I: IntoIterator<Item = (Permutation, f64)>>(n: usize, items: I) -> Result<Self> {
        let mut merged: BTreeMap<Permutation, f64> = BTreeMap::new();
        for (p, w) in items {
            check_dims(n, p.n())?;
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
            }
            *merged.entry(p).or_insert(0.0) += w;
        }
        merged.retain(|_, w| *w > 0.0);
        let total: f64 = merged.values().sum();
        if merged.is_empty() || total <= 0.0 {
            return Err(Error::InvalidInput("distribution has no mass".into()));
        }
        let scale = if (total - 1.0).abs() <= WEIGHT_SUM_TOL { 1.0 } else { total };
        let (support, weights) = merged.into_iter().map(|(p, w)| (p, w / scale)).unzip();
        Ok(DiscreteRankingDistribution { n, support, weights })
    }

    /// Empirical distribution `(1/N) Σ δ_{Σ_k}` with duplicates merged.
    pub fn empirical(sample: &RankingSample) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::InvalidInput("empirical distribution of an empty sample".into()));
        }
        Self::from_weighted(sample.n(), sample.rankings().iter().map(|r| (r.clone(), 1.0)))
    }

    pub fn point_mass(sigma: Permutation) -> Self {
        DiscreteRankingDistribution { n: sigma.n(), support: vec![sigma], weights: vec![1.0] }
    }

    /// Uniform distribution over `𝔖_n` (enumerated, so `n` is bounded).
    pub fn uniform(n: usize) -> Result<Self> {
        let support = enumerate_permutations(n)?;
        let w = 1.0 / support.len() as f64;
        let weights = vec![w; support.len()];
        Ok(DiscreteRankingDistribution { n, support, weights })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support(&self) -> &[Permutation] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Permutation, f64)> {
        self.support.iter().zip(self.weights.iter().copied())
    }

    pub fn mass(&self, sigma: &Permutation) -> f64 {
        self.iter().filter(|(s, _)| *s == sigma).map(|(_, w)| w).sum()
    }

    pub fn marginals(&self) -> PairwiseMatrix {
        let n = self.n;
        let mut upper = vec![0.0; n * n];
        for (s, w) in self.iter() {
            for (i, j) in pairs(n) {
                if s.prefers(i, j) {
                    upper[i * n + j] += w;
                }
            }
        }
        let total: f64 = self.weights.iter().sum();
        PairwiseMatrix::from_upper(n, |i, j| (upper[i * n + j] / total).clamp(0.0, 1.0))
            .expect("entries clamped to [0, 1]")
    }

    /// Conditional distribution on the support points satisfying `keep`,
    /// together with its mass. `None` when the mass is zero.
    pub fn conditional<F: Fn(&Permutation) -> bool>(&self, keep: F) -> Option<(f64, Self)> {
        let items: Vec<(Permutation, f64)> =
            self.iter().filter(|(s, w)| *w > 0.0 && keep(s)).map(|(s, w)| (s.clone(), w)).collect();
        let mass: f64 = items.iter().map(|(_, w)| w).sum();
        if items.is_empty() || mass <= 0.0 {
            return None;
        }
        let dist = Self::from_weighted(self.n, items).ok()?;
        Some((mass, dist))
    }
}

/// Expected Kendall tau distance `L_P(σ) = Σ_s w_s d(s, σ)`.
pub fn ranking_risk(dist: &DiscreteRankingDistribution, sigma: &Permutation) -> Result<f64> {
    check_dims(dist.n(), sigma.n())?;
    Ok(dist.iter().map(|(s, w)| w * kendall_tau_unchecked(s, sigma) as f64).sum())
}

/// Ranking depth `n(n-1)/2 - L_P(σ)`.
pub fn ranking_depth(dist: &DiscreteRankingDistribution, sigma: &Permutation) -> Result<f64> {
    Ok(n_pairs(dist.n()) as f64 - ranking_risk(dist, sigma)?)
}

/// All `n!` permutations in lexicographic order of their rank vectors.
pub fn enumerate_permutations(n: usize) -> Result<Vec<Permutation>> {
    enumerate_permutations_with_limit(n, DEFAULT_ENUMERATION_LIMIT)
}

pub fn enumerate_permutations_with_limit(n: usize, limit: usize) -> Result<Vec<Permutation>> {
    let mut out = Vec::new();
    for_each_permutation(n, limit, |p| out.push(p.clone()))?;
    Ok(out)
}

/// Visits all `n!` permutations in the order of [`enumerate_permutations`]
/// without materializing them.
pub fn for_each_permutation<F: FnMut(&Permutation)>(n: usize, limit: usize, mut f: F) -> Result<()> {
    if n > limit {
        return Err(Error::Capacity { what: "permutation enumeration", n, limit });
    }
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let mut cur = Permutation { ranks: (0..n).collect() };
    loop {
        f(&cur);
        if !next_permutation(&mut cur.ranks) {
            break;
        }
    }
    Ok(())
}

fn next_permutation(xs: &mut [usize]) -> bool {
    let n = xs.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && xs[i - 1] >= xs[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while xs[j] <= xs[i - 1] {
        j -= 1;
    }
    xs.swap(i - 1, j);
    xs[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p1(r: &[usize]) -> Permutation {
        Permutation::from_ranks_one_based(r).unwrap()
    }

    #[test]
    fn kendall_tau_examples() {
        let id = Permutation::identity(3);
        assert_eq!(kendall_tau(&id, &id).unwrap(), 0);
        assert_eq!(kendall_tau(&id, &Permutation::reverse(3)).unwrap(), 3);
        assert_eq!(kendall_tau(&p1(&[2, 1, 3]), &id).unwrap(), 1);
    }

    #[test]
    fn kendall_tau_rejects_mismatched_sizes() {
        let err = kendall_tau(&Permutation::identity(3), &Permutation::identity(4));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn merge_count_matches_pair_enumeration_for_large_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 17, 40, 150] {
            for _ in 0..20 {
                let a = Permutation::random(n, &mut rng);
                let b = Permutation::random(n, &mut rng);
                assert_eq!(kendall_tau(&a, &b).unwrap(), kendall_tau_pairwise(&a, &b).unwrap());
            }
        }
    }

    #[test]
    fn invalid_rank_vectors_are_rejected() {
        assert!(Permutation::from_ranks_one_based(&[1, 1, 3]).is_err());
        assert!(Permutation::from_ranks_one_based(&[1, 2, 4]).is_err());
        assert!(Permutation::from_ranks(vec![]).is_err());
        assert!(Permutation::from_ordering(&[0, 2, 2]).is_err());
    }

    #[test]
    fn ordering_round_trip() {
        let s = Permutation::from_ordering(&[2, 0, 1]).unwrap();
        assert_eq!(s.ranks_one_based(), vec![2, 3, 1]);
        assert_eq!(s.ordering(), vec![2, 0, 1]);
        assert_eq!(s.inverse().inverse(), s);
    }

    #[test]
    fn marginals_examples() {
        let id = Permutation::identity(3);
        let s = RankingSample::new(3, vec![id.clone()]).unwrap();
        let m = pairwise_marginals(&s).unwrap();
        for (i, j) in pairs(3) {
            assert_eq!(m.get(i, j), 1.0);
            assert_eq!(m.get(j, i), 0.0);
        }
        let s = RankingSample::new(3, vec![id, Permutation::reverse(3)]).unwrap();
        let m = pairwise_marginals(&s).unwrap();
        for (i, j) in pairs(3) {
            assert_eq!(m.get(i, j), 0.5);
        }
        let all = RankingSample::new(3, enumerate_permutations(3).unwrap()).unwrap();
        let m = pairwise_marginals(&all).unwrap();
        for (i, j) in pairs(3) {
            assert_eq!(m.get(i, j), 0.5);
        }
        assert!(pairwise_marginals(&RankingSample::new(3, vec![]).unwrap()).is_err());
    }

    #[test]
    fn risk_and_depth_examples() {
        let id = Permutation::identity(3);
        let delta = DiscreteRankingDistribution::point_mass(id.clone());
        assert_eq!(ranking_risk(&delta, &id).unwrap(), 0.0);
        assert_eq!(ranking_depth(&delta, &id).unwrap(), 3.0);
        assert_eq!(ranking_depth(&delta, &Permutation::reverse(3)).unwrap(), 0.0);

        let uni = DiscreteRankingDistribution::uniform(3).unwrap();
        for s in enumerate_permutations(3).unwrap() {
            assert!((ranking_risk(&uni, &s).unwrap() - 1.5).abs() < 1e-12);
            assert!((ranking_depth(&uni, &s).unwrap() - 1.5).abs() < 1e-12);
        }

        let half =
            DiscreteRankingDistribution::new(3, vec![id.clone(), Permutation::reverse(3)], vec![0.5, 0.5]).unwrap();
        assert_eq!(ranking_risk(&half, &id).unwrap(), 1.5);
        assert!(ranking_risk(&half, &Permutation::identity(4)).is_err());
    }

    #[test]
    fn enumeration_sizes_and_limit() {
        assert_eq!(enumerate_permutations(1).unwrap(), vec![Permutation::identity(1)]);
        assert_eq!(enumerate_permutations(3).unwrap().len(), 6);
        let four = enumerate_permutations(4).unwrap();
        assert_eq!(four.len(), 24);
        let mut dedup = four.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 24);
        assert!(matches!(enumerate_permutations(10), Err(Error::Capacity { .. })));
        assert!(enumerate_permutations_with_limit(5, 4).is_err());
        assert_eq!(enumerate_permutations_with_limit(5, 5).unwrap().len(), 120);
    }

    #[test]
    fn distribution_validation() {
        let id = Permutation::identity(2);
        assert!(DiscreteRankingDistribution::new(2, vec![id.clone(), id.clone()], vec![0.5, 0.5]).is_err());
        assert!(DiscreteRankingDistribution::new(2, vec![id.clone()], vec![0.9]).is_err());
        let d = DiscreteRankingDistribution::from_weighted(2, vec![(id.clone(), 1.0), (id.clone(), 3.0)]).unwrap();
        assert_eq!(d.support().len(), 1);
        assert_eq!(d.weights(), &[1.0]);
    }

    #[test]
    fn pair_count_distance_sum_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rankings: Vec<_> = (0..30).map(|_| Permutation::random(7, &mut rng)).collect();
        let counts = PairCounts::from_rankings(7, &rankings);
        let mut direct = 0u64;
        for k in 0..rankings.len() {
            for l in k + 1..rankings.len() {
                direct += kendall_tau(&rankings[k], &rankings[l]).unwrap() as u64;
            }
        }
        assert_eq!(counts.sum_pairwise_distances(), direct);
    }

    #[test]
    fn swap_adjacent_moves_one_pair() {
        let s = p1(&[3, 1, 2, 4]);
        for r in 0..3 {
            assert_eq!(kendall_tau(&s, &s.swap_adjacent(r)).unwrap(), 1);
        }
    }
}
