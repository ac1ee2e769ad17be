use crate::error::{Error, Result};
use crate::perm::{
    check_dims, pairs, DiscreteRankingDistribution, PairwiseMatrix, Permutation, DEFAULT_ENUMERATION_LIMIT,
};

/// Mass of `sigma` rebuilt from conditional pairwise marginals: the product
/// over pairs `(i, j)` in lexicographic order of the probability that a
/// ranking agrees with `sigma` on `{i, j}` given that it agrees on every
/// earlier pair.
pub fn chain_pmf(dist: &DiscreteRankingDistribution, sigma: &Permutation) -> Result<f64> {
    check_dims(dist.n(), sigma.n())?;
    if dist.n() > DEFAULT_ENUMERATION_LIMIT {
        return Err(Error::Capacity { what: "chain factorization", n: dist.n(), limit: DEFAULT_ENUMERATION_LIMIT });
    }
    let mut alive: Vec<(&Permutation, f64)> = dist.iter().filter(|(_, w)| *w > 0.0).collect();
    let mut mass: f64 = alive.iter().map(|(_, w)| w).sum();
    let mut p = 1.0;
    for (i, j) in pairs(dist.n()) {
        let want = sigma.prefers(i, j);
        alive.retain(|(s, _)| s.prefers(i, j) == want);
        let agree: f64 = alive.iter().map(|(_, w)| w).sum();
        if alive.is_empty() {
            return Ok(0.0);
        }
        p *= agree / mass;
        mass = agree;
    }
    debug_assert!(alive.iter().all(|(s, _)| *s == sigma));
    Ok(p)
}

/// Ordered pair `(a, b)` with the largest `p[a][b]`; ties go to the first in
/// row-major order.
pub fn argmax_pair(m: &PairwiseMatrix) -> (usize, usize) {
    let n = m.n();
    let mut best = (0, 1.min(n - 1));
    for a in 0..n {
        for b in 0..n {
            if a != b && m.get(a, b) > m.get(best.0, best.1) {
                best = (a, b);
            }
        }
    }
    best
}

/// Conditional of `dist` on `σ(a) < σ(b)`; `None` when that event has no mass.
pub fn condition_on_pair(
    dist: &DiscreteRankingDistribution,
    a: usize,
    b: usize,
) -> Option<(f64, DiscreteRankingDistribution)> {
    dist.conditional(|s| s.prefers(a, b))
}
