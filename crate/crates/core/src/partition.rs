//! Cells of `𝔖_n` cut out by pairwise order constraints, their admissible
//! splits, and local statistics on a sample.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::perm::{
    check_dims, pairs, DiscreteRankingDistribution, PairCounts, PairwiseMatrix, Permutation, RankingSample,
};

/// Set of rankings satisfying `σ(a) < σ(b)` for every constraint `(a, b)`.
///
/// The transitive closure of the constraints is kept as one bit row per item:
/// bit `b` of row `a` is set when `a` is forced ahead of `b`.
#[derive(Clone, PartialEq, Eq)]
pub struct Cell {
    n: usize,
    constraints: Vec<(usize, usize)>,
    words: usize,
    closure: Vec<u64>,
}

impl Cell {
    /// The whole symmetric group.
    pub fn root(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Cell { n, constraints: Vec::new(), words, closure: vec![0; n * words] }
    }

    /// Builds a cell from 0-based constraints, rejecting out-of-range items
    /// and contradictory (cyclic) sets.
    pub fn new(n: usize, constraints: &[(usize, usize)]) -> Result<Self> {
        let mut cell = Self::root(n);
        for &(a, b) in constraints {
            if a >= n || b >= n {
                return Err(Error::InvalidInput(format!(
                    "constraint ({}, {}) out of range for n = {}",
                    a + 1,
                    b + 1,
                    n
                )));
            }
            if a == b || cell.precedes(b, a) {
                return Err(Error::InvalidInput(format!("constraint ({}, {}) creates a cycle", a + 1, b + 1)));
            }
            cell.push(a, b);
        }
        Ok(cell)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Constraints in insertion order (0-based).
    pub fn constraints(&self) -> &[(usize, usize)] {
        &self.constraints
    }

    pub fn is_root(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Whether `a` is forced ahead of `b` in every ranking of the cell.
    #[inline]
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.closure[a * self.words + b / 64] >> (b % 64) & 1 == 1
    }

    /// Adds `(a, b)` and propagates it: every item at or before `a` now
    /// precedes `b` and everything after `b`.
    fn push(&mut self, a: usize, b: usize) {
        let w = self.words;
        let mut add = self.closure[b * w..(b + 1) * w].to_vec();
        add[b / 64] |= 1 << (b % 64);
        for x in 0..self.n {
            if x == a || self.precedes(x, a) {
                for (dst, src) in self.closure[x * w..(x + 1) * w].iter_mut().zip(&add) {
                    *dst |= src;
                }
            }
        }
        self.constraints.push((a, b));
    }

    /// Membership test against the raw constraints.
    pub fn contains(&self, sigma: &Permutation) -> bool {
        self.constraints.iter().all(|&(a, b)| sigma.prefers(a, b))
    }

    /// Unordered pairs `(i, j)`, `i < j`, left free by the closure, in
    /// lexicographic order.
    pub fn admissible_pairs(&self) -> Vec<(usize, usize)> {
        pairs(self.n).filter(|&(i, j)| self.is_admissible(i, j)).collect()
    }

    pub fn is_admissible(&self, i: usize, j: usize) -> bool {
        i != j && i < self.n && j < self.n && !self.precedes(i, j) && !self.precedes(j, i)
    }

    /// Children `(σ(i) < σ(j), σ(j) < σ(i))`.
    pub fn split(&self, i: usize, j: usize) -> Result<(Cell, Cell)> {
        if !self.is_admissible(i, j) {
            return Err(Error::Precondition(format!("pair ({}, {}) is not admissible in this cell", i + 1, j + 1)));
        }
        let mut c0 = self.clone();
        c0.push(i, j);
        let mut c1 = self.clone();
        c1.push(j, i);
        Ok((c0, c1))
    }

    /// Whether no item appears in two constraints.
    pub fn is_item_disjoint(&self) -> bool {
        let mut seen = vec![false; self.n];
        for &(a, b) in &self.constraints {
            if seen[a] || seen[b] {
                return false;
            }
            seen[a] = true;
            seen[b] = true;
        }
        true
    }

    pub fn constraints_one_based(&self) -> Vec<[usize; 2]> {
        self.constraints.iter().map(|&(a, b)| [a + 1, b + 1]).collect()
    }

    pub fn from_one_based(n: usize, pairs: &[[usize; 2]]) -> Result<Self> {
        let zero: Vec<(usize, usize)> = pairs
            .iter()
            .map(|&[a, b]| {
                if a == 0 || b == 0 {
                    Err(Error::InvalidInput("item ids are 1-based".into()))
                } else {
                    Ok((a - 1, b - 1))
                }
            })
            .collect::<Result<_>>()?;
        Self::new(n, &zero)
    }
}

impl fmt::Debug for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cell(n={}, {:?})", self.n, self.constraints_one_based())
    }
}

/// Serialized as the list of 1-based constraint pairs; `n` travels with the
/// enclosing document.
impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.constraints_one_based().serialize(s)
    }
}

/// Raw constraint list; becomes a [`Cell`] once `n` is known.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellSpec(pub Vec<[usize; 2]>);

impl CellSpec {
    pub fn into_cell(self, n: usize) -> Result<Cell> {
        Cell::from_one_based(n, &self.0)
    }
}

impl<'de> Deserialize<'de> for Cell {
    /// Infers `n` as the largest referenced item; prefer [`CellSpec`] when
    /// `n` is known.
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = CellSpec::deserialize(d)?;
        let n = spec.0.iter().flat_map(|p| p.iter().copied()).max().unwrap_or(1);
        spec.into_cell(n).map_err(serde::de::Error::custom)
    }
}

pub fn cell_contains(c: &Cell, sigma: &Permutation) -> Result<bool> {
    check_dims(c.n(), sigma.n())?;
    Ok(c.contains(sigma))
}

/// How the local variability `V'(C) = E[d(Σ, Σ')]/2` is estimated from the
/// `N_C` rankings of a cell with pairwise distance sum `S = Σ_{k<l} d`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceEstimator {
    /// `S / (N_C (N_C - 1))`, unbiased for `V'(C)`.
    #[default]
    Unbiased,
    /// `S / N_C²`, the V-statistic `Σ_{i<j} p̂_ij (1 - p̂_ij)`. Weighted by
    /// `N_C / N` it never increases under refinement.
    PlugIn,
}

impl VarianceEstimator {
    pub fn estimate(self, distance_sum: u64, count: usize) -> f64 {
        if count <= 1 {
            return 0.0;
        }
        let c = count as f64;
        match self {
            VarianceEstimator::Unbiased => distance_sum as f64 / (c * (c - 1.0)),
            VarianceEstimator::PlugIn => distance_sum as f64 / (c * c),
        }
    }
}

impl std::str::FromStr for VarianceEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unbiased" => Ok(VarianceEstimator::Unbiased),
            "plug-in" | "plugin" | "plug_in" => Ok(VarianceEstimator::PlugIn),
            other => Err(Error::InvalidInput(format!("unknown estimator {:?}", other))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LocalStats {
    pub cell: Cell,
    pub count: usize,
    pub marginals: PairwiseMatrix,
    /// Unbiased estimate of `V'(C)`; 0 when `count ≤ 1`.
    pub v_hat: f64,
    /// Plug-in estimate `Σ p̂ (1 - p̂)` of `V'(C)`.
    pub v_plugin: f64,
}

pub fn local_stats(s: &RankingSample, c: &Cell) -> Result<LocalStats> {
    check_dims(c.n(), s.n())?;
    let counts = PairCounts::from_rankings(s.n(), s.rankings().iter().filter(|r| c.contains(r)));
    Ok(stats_from_counts(c.clone(), &counts))
}

pub(crate) fn stats_from_counts(cell: Cell, counts: &PairCounts) -> LocalStats {
    let d = counts.sum_pairwise_distances();
    LocalStats {
        cell,
        count: counts.total(),
        marginals: counts.marginals(),
        v_hat: VarianceEstimator::Unbiased.estimate(d, counts.total()),
        v_plugin: VarianceEstimator::PlugIn.estimate(d, counts.total()),
    }
}

/// Index of the unique cell containing each ranking; fails when a ranking is
/// in no cell or in several.
pub fn assign_cells(s: &RankingSample, cells: &[Cell]) -> Result<Vec<usize>> {
    for c in cells {
        check_dims(c.n(), s.n())?;
    }
    s.rankings()
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut hits = cells.iter().enumerate().filter(|(_, c)| c.contains(r)).map(|(i, _)| i);
            match (hits.next(), hits.next()) {
                (Some(i), None) => Ok(i),
                (None, _) => Err(Error::PartitionIntegrity(format!("ranking {} lies in no cell", k + 1))),
                (Some(a), Some(b)) => {
                    Err(Error::PartitionIntegrity(format!("ranking {} lies in cells {} and {}", k + 1, a + 1, b + 1)))
                }
            }
        })
        .collect()
}

/// `Σ_C (N_C / N) v_hat(C)` with the unbiased estimator.
pub fn partition_criterion(s: &RankingSample, cells: &[Cell]) -> Result<f64> {
    partition_criterion_with(s, cells, VarianceEstimator::Unbiased)
}

pub fn partition_criterion_with(s: &RankingSample, cells: &[Cell], est: VarianceEstimator) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::InvalidInput("criterion of an empty sample".into()));
    }
    let owner = assign_cells(s, cells)?;
    let mut counts: Vec<PairCounts> = cells.iter().map(|_| PairCounts::new(s.n())).collect();
    for (r, &c) in s.rankings().iter().zip(&owner) {
        counts[c].add(r);
    }
    let n = s.len() as f64;
    Ok(counts.iter().map(|c| c.total() as f64 / n * est.estimate(c.sum_pairwise_distances(), c.total())).sum())
}

/// `Σ_C P(C) V'(C)` for an exactly known distribution, with `V'` computed from
/// the conditional marginals. Cells of zero mass contribute nothing.
pub fn population_criterion(dist: &DiscreteRankingDistribution, cells: &[Cell]) -> Result<f64> {
    let mut total = 0.0;
    let mut covered = 0.0;
    for c in cells {
        check_dims(c.n(), dist.n())?;
        if let Some((mass, cond)) = dist.conditional(|s| c.contains(s)) {
            total += mass * crate::consensus::dispersion_v_prime(&cond.marginals());
            covered += mass;
        }
    }
    let expected: f64 = dist.weights().iter().sum();
    if (covered - expected).abs() > 1e-9 {
        return Err(Error::PartitionIntegrity(format!("cells carry mass {} of {}", covered, expected)));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::enumerate_permutations;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cell(n: usize, c: &[(usize, usize)]) -> Cell {
        Cell::new(n, c).unwrap()
    }

    #[test]
    fn containment_examples() {
        let root = Cell::root(3);
        assert!(enumerate_permutations(3).unwrap().iter().all(|s| root.contains(s)));
        let c = cell(3, &[(0, 1)]);
        assert!(c.contains(&Permutation::identity(3)));
        assert!(!c.contains(&Permutation::from_ranks_one_based(&[2, 1, 3]).unwrap()));
        let chain = cell(3, &[(0, 1), (1, 2)]);
        let members: Vec<Permutation> =
            enumerate_permutations(3).unwrap().into_iter().filter(|s| chain.contains(s)).collect();
        assert_eq!(members, vec![Permutation::identity(3)]);
        assert!(cell_contains(&chain, &Permutation::identity(4)).is_err());
    }

    #[test]
    fn admissible_pair_examples() {
        assert_eq!(Cell::root(4).admissible_pairs().len(), 6);
        assert!(cell(3, &[(0, 1), (1, 2)]).admissible_pairs().is_empty());
        assert_eq!(cell(3, &[(0, 1)]).admissible_pairs(), vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn split_examples() {
        let (c0, c1) = Cell::root(3).split(0, 1).unwrap();
        let all = enumerate_permutations(3).unwrap();
        assert_eq!(all.iter().filter(|s| c0.contains(s)).count(), 3);
        assert_eq!(all.iter().filter(|s| c1.contains(s)).count(), 3);
        let chain = cell(3, &[(0, 1), (1, 2)]);
        assert!(matches!(chain.split(0, 2), Err(Error::Precondition(_))));
        assert!(Cell::root(3).split(1, 1).is_err());
    }

    #[test]
    fn cycles_are_rejected() {
        assert!(Cell::new(3, &[(0, 1), (1, 2), (2, 0)]).is_err());
        assert!(Cell::new(3, &[(0, 3)]).is_err());
        assert!(Cell::new(3, &[(1, 1)]).is_err());
    }

    #[test]
    fn closure_matches_brute_force_for_random_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let n = rng.gen_range(2..=6);
            let mut c = Cell::root(n);
            let depth = rng.gen_range(0..=n * (n - 1) / 2);
            for _ in 0..depth {
                let adm = c.admissible_pairs();
                if adm.is_empty() {
                    break;
                }
                let (i, j) = adm[rng.gen_range(0..adm.len())];
                let (c0, c1) = c.split(i, j).unwrap();
                c = if rng.gen() { c0 } else { c1 };
            }
            let members: Vec<Permutation> =
                enumerate_permutations(n).unwrap().into_iter().filter(|s| c.contains(s)).collect();
            assert!(!members.is_empty());
            for a in 0..n {
                for b in 0..n {
                    if a == b {
                        continue;
                    }
                    let forced = members.iter().all(|s| s.prefers(a, b));
                    assert_eq!(c.precedes(a, b), forced, "closure bit ({a},{b}) for {:?}", c);
                }
            }
        }
    }

    #[test]
    fn wide_closure_rows() {
        // items beyond the first 64-bit word
        let c = cell(130, &[(3, 70), (70, 129), (100, 3)]);
        assert!(c.precedes(100, 129));
        assert!(c.precedes(3, 129));
        assert!(!c.is_admissible(129, 100));
        assert!(c.is_admissible(0, 129));
    }

    #[test]
    fn local_stats_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = RankingSample::new(4, (0..20).map(|_| Permutation::random(4, &mut rng)).collect()).unwrap();
        let st = local_stats(&s, &Cell::root(4)).unwrap();
        assert_eq!(st.marginals, crate::perm::pairwise_marginals(&s).unwrap());
        assert_eq!(st.count, 20);

        let same = RankingSample::new(3, vec![Permutation::identity(3); 5]).unwrap();
        assert_eq!(local_stats(&same, &Cell::root(3)).unwrap().v_hat, 0.0);

        let two = RankingSample::new(3, vec![Permutation::identity(3), Permutation::reverse(3)]).unwrap();
        let st = local_stats(&two, &Cell::root(3)).unwrap();
        assert!((st.v_hat - 1.5).abs() < 1e-12);
        assert!((st.v_plugin - 0.75).abs() < 1e-12);

        let empty = local_stats(&two, &cell(3, &[(0, 1), (2, 1), (2, 0)])).unwrap();
        assert_eq!(empty.count, 0);
        assert_eq!(empty.v_hat, 0.0);
        assert_eq!(empty.marginals, PairwiseMatrix::uniform(3));
    }

    #[test]
    fn criterion_examples_and_integrity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rankings: Vec<Permutation> = (0..30).map(|_| Permutation::random(4, &mut rng)).collect();
        let s = RankingSample::new(4, rankings.clone()).unwrap();
        let global = local_stats(&s, &Cell::root(4)).unwrap().v_hat;
        assert!((partition_criterion(&s, &[Cell::root(4)]).unwrap() - global).abs() < 1e-12);

        // finest partition: one chain cell per permutation of 𝔖_4
        let finest: Vec<Cell> = enumerate_permutations(4)
            .unwrap()
            .iter()
            .map(|p| {
                let o = p.ordering();
                Cell::new(4, &o.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>()).unwrap()
            })
            .collect();
        assert_eq!(partition_criterion(&s, &finest).unwrap(), 0.0);

        let (c0, c1) = Cell::root(4).split(0, 1).unwrap();
        assert!(matches!(partition_criterion(&s, std::slice::from_ref(&c0)), Err(Error::PartitionIntegrity(_))));
        assert!(matches!(partition_criterion(&s, &[c0, c1, Cell::root(4)]), Err(Error::PartitionIntegrity(_))));
    }

    #[test]
    fn unbiased_criterion_can_increase_under_refinement() {
        // orderings 1234, 4312, 2134, 4321 split on (1, 2)
        let s = RankingSample::new(
            4,
            [[0, 1, 2, 3], [3, 2, 0, 1], [1, 0, 2, 3], [3, 2, 1, 0]]
                .iter()
                .map(|o| Permutation::from_ordering(o).unwrap())
                .collect(),
        )
        .unwrap();
        let (c0, c1) = Cell::root(4).split(0, 1).unwrap();
        let parent = partition_criterion(&s, &[Cell::root(4)]).unwrap();
        let children = partition_criterion(&s, &[c0.clone(), c1.clone()]).unwrap();
        assert!((parent - 2.0).abs() < 1e-12);
        assert!((children - 2.5).abs() < 1e-12);
        let pp = partition_criterion_with(&s, &[Cell::root(4)], VarianceEstimator::PlugIn).unwrap();
        let cp = partition_criterion_with(&s, &[c0, c1], VarianceEstimator::PlugIn).unwrap();
        assert!(cp <= pp);
    }

    #[test]
    fn forced_pair_and_mixture_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = RankingSample::new(5, (0..40).map(|_| Permutation::random(5, &mut rng)).collect()).unwrap();
        let (c0, c1) = Cell::root(5).split(1, 3).unwrap();
        let s0 = local_stats(&s, &c0).unwrap();
        let s1 = local_stats(&s, &c1).unwrap();
        assert_eq!(s0.marginals.get(1, 3), 1.0);
        assert_eq!(s1.marginals.get(3, 1), 1.0);
        assert_eq!(s0.count + s1.count, 40);
        let global = crate::perm::pairwise_marginals(&s).unwrap();
        for (i, j) in pairs(5) {
            let mix = (s0.count as f64 * s0.marginals.get(i, j) + s1.count as f64 * s1.marginals.get(i, j)) / 40.0;
            assert!((mix - global.get(i, j)).abs() < 1e-12);
        }
    }

    #[test]
    fn cell_json_round_trip() {
        let c = cell(4, &[(0, 1), (2, 0)]);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(text, "[[1,2],[3,1]]");
        let back = serde_json::from_str::<CellSpec>(&text).unwrap().into_cell(4).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<CellSpec>("[[1,2],[2,1]]").unwrap().into_cell(3).is_err());
    }
}
