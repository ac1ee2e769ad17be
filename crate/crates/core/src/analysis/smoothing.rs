use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::Cell;
use crate::perm::{
    check_dims, for_each_permutation, n_pairs, pairs, PairCounts, PairwiseMatrix, Permutation, RankingSample,
    DEFAULT_ENUMERATION_LIMIT,
};

/// Per-constraint rule for `P(σ(a) < σ(b))` under the uniform distribution
/// on an item-disjoint cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryTable {
    /// Exact values: for a constraint `i ≺ j` and a free item `b`,
    /// `P(i ≺ b) = 2/3` and `P(j ≺ b) = 1/3`; pairs spanning two constraints
    /// follow from independence of the two relative orders.
    Derived,
    /// The alternative closed-form table taken literally: `1` for `(i, j)`, `1/3` for
    /// `(i, b)`, `2/3` for `(a, j)`, `1/2` for free pairs, the complement for
    /// the reversed entries, and the product over the constraints touching
    /// the pair.
    Appendix,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothMethod {
    #[default]
    Enumeration,
    Factorized(EntryTable),
}

impl FromStr for SmoothMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "enumeration" => Ok(SmoothMethod::Enumeration),
            "factorized" | "factorized-derived" => Ok(SmoothMethod::Factorized(EntryTable::Derived)),
            "factorized-appendix" => Ok(SmoothMethod::Factorized(EntryTable::Appendix)),
            other => Err(Error::InvalidInput(format!("unknown smoothing method {:?}", other))),
        }
    }
}

/// A marginal of the uniform cell distribution on which the two entry tables
/// disagree, or where the appendix table disagrees with enumeration. Items
/// are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntryDiscrepancy {
    pub a: usize,
    pub b: usize,
    pub enumeration: Option<f64>,
    pub derived: f64,
    pub appendix: f64,
}

const DISCREPANCY_TOL: f64 = 1e-12;

/// Position of an item relative to the constraints of an item-disjoint cell.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Free,
    First(usize),
    Second(usize),
}

fn roles(c: &Cell) -> Result<Vec<Role>> {
    if !c.is_item_disjoint() {
        return Err(Error::InvalidInput("factorized marginals need item-disjoint constraints".into()));
    }
    let mut r = vec![Role::Free; c.n()];
    for (k, &(i, j)) in c.constraints().iter().enumerate() {
        r[i] = Role::First(k);
        r[j] = Role::Second(k);
    }
    Ok(r)
}

fn derived_entry(ra: Role, rb: Role) -> f64 {
    use Role::*;
    match (ra, rb) {
        (Free, Free) => 0.5,
        (First(x), Second(y)) if x == y => 1.0,
        (Second(x), First(y)) if x == y => 0.0,
        (First(_), Free) | (Free, Second(_)) => 2.0 / 3.0,
        (Second(_), Free) | (Free, First(_)) => 1.0 / 3.0,
        (First(_), First(_)) | (Second(_), Second(_)) => 0.5,
        (First(_), Second(_)) => 5.0 / 6.0,
        (Second(_), First(_)) => 1.0 / 6.0,
    }
}

/// Literal table entry of one constraint `(i, j)` at the ordered pair `(a, b)`.
fn appendix_single(i: usize, j: usize, a: usize, b: usize) -> f64 {
    let covered = |a: usize, b: usize| -> Option<f64> {
        if a == i && b == j {
            Some(1.0)
        } else if a == i {
            Some(1.0 / 3.0)
        } else if b == j && a != j {
            Some(2.0 / 3.0)
        } else if a != j && b != i && b != j {
            Some(0.5)
        } else {
            None
        }
    };
    covered(a, b).unwrap_or_else(|| 1.0 - covered(b, a).expect("reversed entry is covered"))
}

fn appendix_entry(c: &Cell, a: usize, b: usize) -> f64 {
    let touching: Vec<&(usize, usize)> =
        c.constraints().iter().filter(|&&(i, j)| i == a || j == a || i == b || j == b).collect();
    if touching.is_empty() {
        return 0.5;
    }
    touching.iter().map(|&&(i, j)| appendix_single(i, j, a, b)).product()
}

fn table_matrix(c: &Cell, table: EntryTable) -> Result<PairwiseMatrix> {
    let r = roles(c)?;
    let n = c.n();
    let mut p = vec![0.5; n * n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                p[a * n + b] = match table {
                    EntryTable::Derived => derived_entry(r[a], r[b]),
                    EntryTable::Appendix => appendix_entry(c, a, b),
                };
            }
        }
    }
    Ok(PairwiseMatrix::from_rows_unchecked(n, p))
}

fn enumerate_cell<F: FnMut(&Permutation)>(c: &Cell, mut f: F) -> Result<()> {
    for_each_permutation(c.n(), DEFAULT_ENUMERATION_LIMIT, |s| {
        if c.contains(s) {
            f(s)
        }
    })
}

fn enumerated_marginals(c: &Cell) -> Result<PairwiseMatrix> {
    let mut counts = PairCounts::new(c.n());
    enumerate_cell(c, |s| counts.add(s))?;
    Ok(counts.marginals())
}

/// `p'[a][b] = P(σ(a) < σ(b))` for `σ` uniform on the cell.
///
/// The factorized path falls back to enumeration when the constraints share
/// an item.
pub fn uniform_cell_marginals(c: &Cell, method: SmoothMethod) -> Result<PairwiseMatrix> {
    match method {
        SmoothMethod::Factorized(table) if c.is_item_disjoint() => table_matrix(c, table),
        _ => enumerated_marginals(c),
    }
}

/// Ordered pairs where the appendix table differs from the derived table or
/// from enumeration (the latter only when `n` is enumerable).
pub fn entry_discrepancies(c: &Cell) -> Result<Vec<EntryDiscrepancy>> {
    let derived = table_matrix(c, EntryTable::Derived)?;
    let appendix = table_matrix(c, EntryTable::Appendix)?;
    let exact = if c.n() <= DEFAULT_ENUMERATION_LIMIT { Some(enumerated_marginals(c)?) } else { None };
    let n = c.n();
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let e = exact.as_ref().map(|m| m.get(a, b));
            let (d, x) = (derived.get(a, b), appendix.get(a, b));
            if (d - x).abs() > DISCREPANCY_TOL || e.is_some_and(|e| (e - x).abs() > DISCREPANCY_TOL) {
                out.push(EntryDiscrepancy { a, b, enumeration: e, derived: d, appendix: x });
            }
        }
    }
    Ok(out)
}

/// Smoothed conditional distribution of a cell:
/// `P̃(σ) = Σ_{a ≺_σ b} p̂_ab(C) / z` over the rankings of the cell.
#[derive(Clone, Debug)]
pub struct SmoothedCellDistribution {
    pub cell: Cell,
    /// Empirical marginals of the sample rankings in the cell.
    pub marginals: PairwiseMatrix,
    /// Unnormalized scores of every ranking of the cell, in lexicographic
    /// order. Empty when the cell is too large to enumerate.
    pub scores: Vec<(Permutation, f64)>,
    pub z: f64,
    /// `Σ_{i<j} p̂_ij (1 - p'_ij)` with `p'` from the same method, kept for
    /// comparison with `z`.
    pub appendix_z: f64,
    pub method: SmoothMethod,
    /// Entry-table disagreements; filled by the factorized method.
    pub discrepancies: Vec<EntryDiscrepancy>,
}

impl SmoothedCellDistribution {
    /// `Σ_{a ≺_σ b} p̂_ab`, equal to `n(n-1)/2` minus the local risk of `σ`.
    pub fn score(&self, sigma: &Permutation) -> f64 {
        pairs(self.cell.n())
            .map(|(i, j)| if sigma.prefers(i, j) { self.marginals.get(i, j) } else { self.marginals.get(j, i) })
            .sum()
    }

    /// Smoothed mass; zero outside the cell.
    pub fn probability(&self, sigma: &Permutation) -> f64 {
        if self.cell.contains(sigma) {
            self.score(sigma) / self.z
        } else {
            0.0
        }
    }

    /// Enumerated rankings of maximal score (ties within `1e-12`).
    pub fn argmax(&self) -> Vec<Permutation> {
        let best = self.scores.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
        self.scores.iter().filter(|(_, s)| *s >= best - 1e-12).map(|(p, _)| p.clone()).collect()
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Smooths the empirical conditional of `s` on `c`. Fails when no ranking of
/// `s` lies in `c`.
pub fn smooth_cell(s: &RankingSample, c: &Cell, method: SmoothMethod) -> Result<SmoothedCellDistribution> {
    check_dims(c.n(), s.n())?;
    let counts = PairCounts::from_rankings(s.n(), s.rankings().iter().filter(|r| c.contains(r)));
    if counts.total() == 0 {
        return Err(Error::InvalidInput("no sample ranking lies in the cell".into()));
    }
    let n = c.n();
    let mut out = SmoothedCellDistribution {
        cell: c.clone(),
        marginals: counts.marginals(),
        scores: Vec::new(),
        z: 0.0,
        appendix_z: 0.0,
        method,
        discrepancies: Vec::new(),
    };
    let uniform = match method {
        SmoothMethod::Enumeration => {
            let mut scores = Vec::new();
            enumerate_cell(c, |p| scores.push((p.clone(), out.score(p))))?;
            out.z = scores.iter().map(|(_, v)| v).sum();
            out.scores = scores;
            enumerated_marginals(c)?
        }
        SmoothMethod::Factorized(table) => {
            let u = table_matrix(c, table)?;
            let size = factorial(n) / 2f64.powi(c.constraints().len() as i32);
            let cross: f64 = (0..n)
                .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
                .map(|(a, b)| out.marginals.get(a, b) * u.get(a, b))
                .sum();
            out.z = size * cross;
            out.discrepancies = entry_discrepancies(c)?;
            if n <= DEFAULT_ENUMERATION_LIMIT {
                let mut scores = Vec::new();
                enumerate_cell(c, |p| scores.push((p.clone(), out.score(p))))?;
                out.scores = scores;
            }
            u
        }
    };
    out.appendix_z = pairs(n).map(|(i, j)| out.marginals.get(i, j) * (1.0 - uniform.get(i, j))).sum();
    debug_assert!(out.scores.iter().all(|(_, v)| *v >= 0.0 && *v <= n_pairs(n) as f64 + 1e-9));
    Ok(out)
}
