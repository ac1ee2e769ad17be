//! Exact optimal transport between finitely supported ranking distributions
//! with Kendall tau cost, and the distortion of a consensus distribution.

use std::collections::VecDeque;
use std::fmt::Debug;
use std::ops::{Add, Sub};

use crate::consensus::{dispersion_v, dispersion_v_prime, exact_kemeny};
use crate::error::{Error, Result};
use crate::partition::Cell;
use crate::perm::{
    check_dims, kendall_tau_unchecked, ranking_risk, DiscreteRankingDistribution, Permutation,
    DEFAULT_ENUMERATION_LIMIT,
};

/// Largest number of cost-matrix cells accepted by the solver.
pub const TRANSPORT_CELL_LIMIT: usize = 4_000_000;

/// Tolerance for mass balance checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Consecutive degenerate pivots after which pricing switches to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

/// Scalar used for transported mass.
pub trait Mass: Copy + Default + PartialOrd + Debug + Add<Output = Self> + Sub<Output = Self> {
    fn to_f64(self) -> f64;
    fn times(self, cost: i64) -> Self;
    /// Rounds away negative residue left by floating point updates.
    fn clamp_nonneg(self) -> Self;
}

impl Mass for f64 {
    fn to_f64(self) -> f64 {
        self
    }

    fn times(self, cost: i64) -> Self {
        self * cost as f64
    }

    fn clamp_nonneg(self) -> Self {
        self.max(0.0)
    }
}

impl Mass for i64 {
    fn to_f64(self) -> f64 {
        self as f64
    }

    fn times(self, cost: i64) -> Self {
        self * cost
    }

    fn clamp_nonneg(self) -> Self {
        self
    }
}

/// Optimal basic solution of a transportation problem.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportSolution<M> {
    /// `(row, column, mass)` for every basic cell with positive mass.
    pub flows: Vec<(usize, usize, M)>,
    pub cost: M,
    pub pivots: usize,
}

/// Minimizes `Σ x_ij c_ij` subject to row sums `supply` and column sums
/// `demand` with the transportation simplex: north-west corner start, dual
/// potentials on the basis tree, Dantzig pricing until a run of degenerate
/// pivots, then Bland's rule for the rest of the solve.
pub fn solve_transport<M: Mass>(supply: &[M], demand: &[M], cost: &[i64]) -> Result<TransportSolution<M>> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("transport problem with an empty side".into()));
    }
    if m.saturating_mul(n) > TRANSPORT_CELL_LIMIT {
        return Err(Error::Capacity { what: "transport cells", n: m * n, limit: TRANSPORT_CELL_LIMIT });
    }
    if cost.len() != m * n {
        return Err(Error::DimensionMismatch { expected: m * n, found: cost.len() });
    }
    let zero = M::default();
    if supply.iter().chain(demand).any(|&w| w < zero) {
        return Err(Error::InvalidInput("negative mass".into()));
    }

    let mut x = vec![zero; m * n];
    let mut basic = vec![false; m * n];
    let mut basis: Vec<usize> = Vec::with_capacity(m + n - 1);
    {
        let (mut ra, mut rb) = (supply.to_vec(), demand.to_vec());
        let (mut i, mut j) = (0, 0);
        loop {
            let q = if ra[i] <= rb[j] { ra[i] } else { rb[j] };
            let cell = i * n + j;
            x[cell] = q;
            basic[cell] = true;
            basis.push(cell);
            let row_done = ra[i] <= rb[j];
            ra[i] = (ra[i] - q).clamp_nonneg();
            rb[j] = (rb[j] - q).clamp_nonneg();
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || row_done {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let nodes = m + n;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
    let mut pot = vec![0i64; nodes];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nodes];
    let mut depth = vec![0usize; nodes];
    let mut seen = vec![false; nodes];
    let mut bland = false;
    let mut streak = 0;
    let mut pivots = 0;
    let max_pivots = 50 * m * n + 1000;

    loop {
        // dual potentials from the basis spanning tree, rooted at row 0
        for a in adj.iter_mut() {
            a.clear();
        }
        for &cell in &basis {
            let (i, j) = (cell / n, cell % n);
            adj[i].push((m + j, cell));
            adj[m + j].push((i, cell));
        }
        seen.iter_mut().for_each(|s| *s = false);
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        pot[0] = 0;
        parent[0] = None;
        depth[0] = 0;
        while let Some(a) = queue.pop_front() {
            for &(b, cell) in &adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    pot[b] = cost[cell] - pot[a];
                    parent[b] = Some((a, cell));
                    depth[b] = depth[a] + 1;
                    queue.push_back(b);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::State("transport basis is not a spanning tree".into()));
        }

        let mut entering: Option<(i64, usize)> = None;
        'price: for i in 0..m {
            for j in 0..n {
                let cell = i * n + j;
                if basic[cell] {
                    continue;
                }
                let r = cost[cell] - pot[i] - pot[m + j];
                if r < 0 {
                    if bland {
                        entering = Some((r, cell));
                        break 'price;
                    }
                    if entering.is_none_or(|(best, _)| r < best) {
                        entering = Some((r, cell));
                    }
                }
            }
        }
        let Some((_, enter)) = entering else { break };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::State("transport simplex failed to converge".into()));
        }

        // cycle: entering cell, then the tree path from its column back to its row
        let (ei, ej) = (enter / n, enter % n);
        let (mut a, mut b) = (m + ej, ei);
        let mut from_col: Vec<usize> = Vec::new();
        let mut from_row: Vec<usize> = Vec::new();
        while depth[a] > depth[b] {
            let (p, cell) = parent[a].expect("non-root");
            from_col.push(cell);
            a = p;
        }
        while depth[b] > depth[a] {
            let (p, cell) = parent[b].expect("non-root");
            from_row.push(cell);
            b = p;
        }
        while a != b {
            let (pa, ca) = parent[a].expect("non-root");
            let (pb, cb) = parent[b].expect("non-root");
            from_col.push(ca);
            from_row.push(cb);
            a = pa;
            b = pb;
        }
        from_row.reverse();
        let path: Vec<usize> = from_col.into_iter().chain(from_row).collect();

        // path cells 0, 2, 4, ... lose mass; the leaving cell is the lowest-index minimizer
        let mut leave: Option<usize> = None;
        for &cell in path.iter().step_by(2) {
            leave = match leave {
                None => Some(cell),
                Some(l) if x[cell] < x[l] || (!(x[l] < x[cell]) && cell < l) => Some(cell),
                keep => keep,
            };
        }
        let leave = leave.expect("cycle has a decreasing cell");
        let theta = x[leave];
        for (k, &cell) in path.iter().enumerate() {
            x[cell] = if k % 2 == 0 { (x[cell] - theta).clamp_nonneg() } else { x[cell] + theta };
        }
        x[enter] = theta;
        x[leave] = zero;
        basic[leave] = false;
        basic[enter] = true;
        let slot = basis.iter().position(|&c| c == leave).expect("leaving cell is basic");
        basis[slot] = enter;

        if theta <= zero {
            streak += 1;
            if streak > DEGENERATE_STREAK {
                bland = true;
            }
        } else {
            streak = 0;
        }
    }

    let mut flows: Vec<(usize, usize, M)> =
        basis.iter().filter(|&&c| x[c] > zero).map(|&c| (c / n, c % n, x[c])).collect();
    flows.sort_by_key(|&(i, j, _)| (i, j));
    let cost_total = flows.iter().fold(zero, |acc, &(i, j, f)| acc + f.times(cost[i * n + j]));
    Ok(TransportSolution { flows, cost: cost_total, pivots })
}

/// An optimal coupling between two ranking distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub rows: Vec<Permutation>,
    pub cols: Vec<Permutation>,
    /// `(row, column, mass)` entries with positive mass.
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

impl TransportPlan {
    pub fn flow(&self, row: usize, col: usize) -> f64 {
        self.flows.iter().filter(|&&(i, j, _)| i == row && j == col).map(|&(_, _, f)| f).sum()
    }

    /// Kendall tau distance between a row and a column support point.
    pub fn unit_cost(&self, row: usize, col: usize) -> usize {
        kendall_tau_unchecked(&self.rows[row], &self.cols[col])
    }
}

fn positive_support(d: &DiscreteRankingDistribution) -> (Vec<Permutation>, Vec<f64>) {
    d.iter().filter(|(_, w)| *w > 0.0).map(|(s, w)| (s.clone(), w)).unzip()
}

fn cost_matrix(rows: &[Permutation], cols: &[Permutation]) -> Result<Vec<i64>> {
    if rows.len().saturating_mul(cols.len()) > TRANSPORT_CELL_LIMIT {
        return Err(Error::Capacity {
            what: "transport cells",
            n: rows.len() * cols.len(),
            limit: TRANSPORT_CELL_LIMIT,
        });
    }
    Ok(rows.iter().flat_map(|a| cols.iter().map(move |b| kendall_tau_unchecked(a, b) as i64)).collect())
}

/// Wasserstein distance with Kendall tau cost and an optimal plan.
pub fn wasserstein(p: &DiscreteRankingDistribution, q: &DiscreteRankingDistribution) -> Result<(f64, TransportPlan)> {
    check_dims(p.n(), q.n())?;
    let (rows, a) = positive_support(p);
    let (cols, b) = positive_support(q);
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > FEASIBILITY_TOL {
        return Err(Error::InvalidInput(format!("total masses differ: {} vs {}", sa, sb)));
    }
    let cost = cost_matrix(&rows, &cols)?;
    let sol = solve_transport(&a, &b, &cost)?;
    Ok((sol.cost, TransportPlan { rows, cols, flows: sol.flows, cost: sol.cost }))
}

/// Wasserstein distance in exact integer arithmetic for distributions whose
/// weights are multiples of `1 / denominator`.
pub fn wasserstein_scaled(
    p: &DiscreteRankingDistribution,
    q: &DiscreteRankingDistribution,
    denominator: i64,
) -> Result<(f64, TransportPlan)> {
    check_dims(p.n(), q.n())?;
    if denominator <= 0 {
        return Err(Error::InvalidInput("denominator must be positive".into()));
    }
    let scale = |d: &DiscreteRankingDistribution| -> Result<(Vec<Permutation>, Vec<i64>)> {
        let (s, w) = positive_support(d);
        let ints = w
            .iter()
            .map(|&x| {
                let v = x * denominator as f64;
                let r = v.round();
                if (v - r).abs() > 1e-6 {
                    Err(Error::InvalidInput(format!("weight {} is not a multiple of 1/{}", x, denominator)))
                } else {
                    Ok(r as i64)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((s, ints))
    };
    let (rows, a) = scale(p)?;
    let (cols, b) = scale(q)?;
    if a.iter().sum::<i64>() != b.iter().sum::<i64>() {
        return Err(Error::InvalidInput("scaled masses differ".into()));
    }
    let cost = cost_matrix(&rows, &cols)?;
    let sol = solve_transport(&a, &b, &cost)?;
    let d = denominator as f64;
    let flows = sol.flows.iter().map(|&(i, j, f)| (i, j, f as f64 / d)).collect();
    let total = sol.cost as f64 / d;
    Ok((total, TransportPlan { rows, cols, flows, cost: total }))
}

/// `sqrt(Σ_σ (P(σ) - Q(σ))²)` over the union of supports.
pub fn l2_distance(p: &DiscreteRankingDistribution, q: &DiscreteRankingDistribution) -> Result<f64> {
    check_dims(p.n(), q.n())?;
    let mut diff: std::collections::BTreeMap<&Permutation, f64> = std::collections::BTreeMap::new();
    for (s, w) in p.iter() {
        *diff.entry(s).or_default() += w;
    }
    for (s, w) in q.iter() {
        *diff.entry(s).or_default() -= w;
    }
    Ok(diff.values().map(|d| d * d).sum::<f64>().sqrt())
}

/// Distortion of the consensus distribution of a partition with given
/// per-cell medians.
#[derive(Clone, Debug, PartialEq)]
pub struct DistortionReport {
    /// Wasserstein distance between the distribution and its consensus
    /// distribution.
    pub w: f64,
    /// `Σ P(C) V(C)` with exact local Kemeny risks; `None` beyond the
    /// enumeration limit.
    pub e: Option<f64>,
    /// `Σ P(C) V'(C)`.
    pub e_prime: f64,
    /// `Σ P(C) V''(C)`.
    pub e_dprime: f64,
    /// `Σ P(C) L_{P_C}(median_C)`: cost of moving each cell onto its median.
    pub coupling_cost: f64,
    /// `V''` of the whole distribution.
    pub v_dprime_global: f64,
}

/// Tolerance used by [`DistortionReport::violations`].
pub const REPORT_TOL: f64 = 1e-9;

impl DistortionReport {
    /// Inequalities that must hold for any partition whose medians are local
    /// Kemeny medians: `W ≤ coupling cost`, `W ≤ E ≤ 2E'`, `E'' ≤ E`,
    /// `E' ≤ E''` and `E'' ≤ V''`. Returns the failing ones.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, what: &str| {
            if !ok {
                out.push(what.to_string());
            }
        };
        check(self.w <= self.coupling_cost + REPORT_TOL, "W <= coupling cost");
        check(self.e_prime <= self.e_dprime + REPORT_TOL, "E' <= E''");
        check(self.e_dprime <= self.v_dprime_global + REPORT_TOL, "E'' <= V''");
        if let Some(e) = self.e {
            check(self.w <= e + REPORT_TOL, "W <= E");
            check(e <= 2.0 * self.e_prime + REPORT_TOL, "E <= 2E'");
            check(self.e_dprime <= e + REPORT_TOL, "E'' <= E");
        }
        out
    }
}

fn report(
    dist: &DiscreteRankingDistribution,
    cells: &[Cell],
    medians: &[Permutation],
    denominator: Option<i64>,
) -> Result<DistortionReport> {
    if cells.len() != medians.len() {
        return Err(Error::InvalidInput(format!("{} cells but {} medians", cells.len(), medians.len())));
    }
    for (c, m) in cells.iter().zip(medians) {
        check_dims(dist.n(), c.n())?;
        check_dims(dist.n(), m.n())?;
    }
    for (s, w) in dist.iter() {
        if w > 0.0 && cells.iter().filter(|c| c.contains(s)).count() != 1 {
            return Err(Error::PartitionIntegrity(format!("support point {} is not in exactly one cell", s)));
        }
    }
    let exact_ok = dist.n() <= DEFAULT_ENUMERATION_LIMIT;
    let (mut e, mut e_prime, mut e_dprime, mut coupling) = (0.0, 0.0, 0.0, 0.0);
    let mut atoms = Vec::new();
    for (c, median) in cells.iter().zip(medians) {
        let Some((mass, cond)) = dist.conditional(|s| c.contains(s)) else { continue };
        let marg = cond.marginals();
        e_prime += mass * dispersion_v_prime(&marg);
        e_dprime += mass * dispersion_v(&marg);
        coupling += mass * ranking_risk(&cond, median)?;
        if exact_ok {
            e += mass * exact_kemeny(&cond)?.risk;
        }
        atoms.push((median.clone(), mass));
    }
    let crd = DiscreteRankingDistribution::from_weighted(dist.n(), atoms)?;
    let w = match denominator {
        Some(d) => wasserstein_scaled(dist, &crd, d)?.0,
        None => wasserstein(dist, &crd)?.0,
    };
    Ok(DistortionReport {
        w,
        e: exact_ok.then_some(e),
        e_prime,
        e_dprime,
        coupling_cost: coupling,
        v_dprime_global: dispersion_v(&dist.marginals()),
    })
}

/// Distortion report with floating point transport.
pub fn distortion_report(
    dist: &DiscreteRankingDistribution,
    cells: &[Cell],
    medians: &[Permutation],
) -> Result<DistortionReport> {
    report(dist, cells, medians, None)
}

/// Distortion report with exact integer transport, for weights that are
/// multiples of `1 / denominator`.
pub fn distortion_report_scaled(
    dist: &DiscreteRankingDistribution,
    cells: &[Cell],
    medians: &[Permutation],
    denominator: i64,
) -> Result<DistortionReport> {
    report(dist, cells, medians, Some(denominator))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::{enumerate_permutations, kendall_tau};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Minimum cost over all integer couplings with the given margins.
    fn brute_force(a: &[i64], b: &[i64], cost: &[i64]) -> i64 {
        fn rec(
            cell: usize,
            m: usize,
            n: usize,
            ra: &mut [i64],
            rb: &mut [i64],
            cost: &[i64],
            acc: i64,
            best: &mut i64,
        ) {
            if cell == m * n {
                if ra.iter().all(|&r| r == 0) && rb.iter().all(|&r| r == 0) {
                    *best = (*best).min(acc);
                }
                return;
            }
            let (i, j) = (cell / n, cell % n);
            let hi = ra[i].min(rb[j]);
            // the last cell of a row must absorb the rest of that row
            let lo = if j == n - 1 { ra[i] } else { 0 };
            if lo > hi {
                return;
            }
            for f in lo..=hi {
                ra[i] -= f;
                rb[j] -= f;
                rec(cell + 1, m, n, ra, rb, cost, acc + f * cost[cell], best);
                ra[i] += f;
                rb[j] += f;
            }
        }
        let mut best = i64::MAX;
        rec(0, a.len(), b.len(), &mut a.to_vec(), &mut b.to_vec(), cost, 0, &mut best);
        best
    }

    fn random_int_dist(n: usize, support: usize, total: i64, rng: &mut ChaCha8Rng) -> (Vec<Permutation>, Vec<i64>) {
        let mut pts: Vec<Permutation> = Vec::new();
        while pts.len() < support {
            let p = Permutation::random(n, rng);
            if !pts.contains(&p) {
                pts.push(p);
            }
        }
        let mut w = vec![1i64; support];
        for _ in 0..total - support as i64 {
            w[rng.gen_range(0..support)] += 1;
        }
        (pts, w)
    }

    #[test]
    fn solver_matches_brute_force_on_small_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let (m, n) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
            let total = rng.gen_range(m.max(n) as i64..=7);
            let (rows, a) = random_int_dist(4, m, total, &mut rng);
            let (cols, b) = random_int_dist(4, n, total, &mut rng);
            let cost = cost_matrix(&rows, &cols).unwrap();
            let exact = solve_transport(&a, &b, &cost).unwrap();
            assert_eq!(exact.cost, brute_force(&a, &b, &cost));
            let af: Vec<f64> = a.iter().map(|&x| x as f64 / total as f64).collect();
            let bf: Vec<f64> = b.iter().map(|&x| x as f64 / total as f64).collect();
            let float = solve_transport(&af, &bf, &cost).unwrap();
            assert!((float.cost - exact.cost as f64 / total as f64).abs() < 1e-9);
            // margins of the float plan
            for i in 0..m {
                let r: f64 = float.flows.iter().filter(|f| f.0 == i).map(|f| f.2).sum();
                assert!((r - af[i]).abs() < 1e-9);
            }
            for j in 0..n {
                let c: f64 = float.flows.iter().filter(|f| f.1 == j).map(|f| f.2).sum();
                assert!((c - bf[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_problems_terminate() {
        // equal uniform margins make every north-west step degenerate
        let k = 30;
        let a = vec![1i64; k];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cost: Vec<i64> = (0..k * k).map(|_| rng.gen_range(0..20)).collect();
        let sol = solve_transport(&a, &a, &cost).unwrap();
        assert!(sol.flows.iter().all(|f| f.2 == 1));
        assert_eq!(sol.flows.len(), k);
        let small = 6;
        let cost6: Vec<i64> = (0..small * small).map(|_| rng.gen_range(0..10)).collect();
        let s6 = solve_transport(&vec![1i64; small], &vec![1i64; small], &cost6).unwrap();
        assert_eq!(s6.cost, brute_force(&vec![1; small], &vec![1; small], &cost6));
    }

    #[test]
    fn wasserstein_examples() {
        let s = Permutation::from_ranks_one_based(&[2, 3, 1, 4]).unwrap();
        let t = Permutation::from_ranks_one_based(&[4, 1, 3, 2]).unwrap();
        let (w, _) = wasserstein(
            &DiscreteRankingDistribution::point_mass(s.clone()),
            &DiscreteRankingDistribution::point_mass(t.clone()),
        )
        .unwrap();
        assert_eq!(w, kendall_tau(&s, &t).unwrap() as f64);

        let u = DiscreteRankingDistribution::uniform(4).unwrap();
        assert_eq!(wasserstein(&u, &u).unwrap().0, 0.0);

        let half = DiscreteRankingDistribution::new(
            3,
            vec![Permutation::identity(3), Permutation::reverse(3)],
            vec![0.5, 0.5],
        )
        .unwrap();
        let id = DiscreteRankingDistribution::point_mass(Permutation::identity(3));
        let (w, plan) = wasserstein(&half, &id).unwrap();
        assert!((w - 1.5).abs() < 1e-12);
        assert_eq!(brute_force(&[1, 1], &[2], &cost_matrix(half.support(), id.support()).unwrap()), 3);
        assert!((plan.flow(1, 0) - 0.5).abs() < 1e-12);
        assert_eq!(plan.unit_cost(1, 0), 3);

        assert!(wasserstein(&half, &DiscreteRankingDistribution::uniform(4).unwrap()).is_err());
    }

    #[test]
    fn wasserstein_is_symmetric_and_satisfies_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draw = |rng: &mut ChaCha8Rng| {
            let (pts, w) = random_int_dist(5, rng.gen_range(1..=6), 12, rng);
            DiscreteRankingDistribution::from_weighted(5, pts.into_iter().zip(w.into_iter().map(|x| x as f64 / 12.0)))
                .unwrap()
        };
        for _ in 0..200 {
            let (p, q, r) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
            let pq = wasserstein_scaled(&p, &q, 12).unwrap().0;
            let qp = wasserstein_scaled(&q, &p, 12).unwrap().0;
            let qr = wasserstein_scaled(&q, &r, 12).unwrap().0;
            let pr = wasserstein_scaled(&p, &r, 12).unwrap().0;
            assert_eq!(pq, qp);
            assert!(pr <= pq + qr + 1e-12);
            assert!((wasserstein(&p, &q).unwrap().0 - pq).abs() < 1e-9);
        }
    }

    #[test]
    fn scaled_transport_rejects_off_grid_weights() {
        let p = DiscreteRankingDistribution::new(
            2,
            vec![Permutation::identity(2), Permutation::reverse(2)],
            vec![0.3, 0.7],
        )
        .unwrap();
        assert!(wasserstein_scaled(&p, &p, 4).is_err());
        assert!(wasserstein_scaled(&p, &p, 10).is_ok());
    }

    #[test]
    fn l2_examples() {
        let u = DiscreteRankingDistribution::uniform(3).unwrap();
        assert_eq!(l2_distance(&u, &u).unwrap(), 0.0);
        let a = DiscreteRankingDistribution::point_mass(Permutation::identity(3));
        let b = DiscreteRankingDistribution::point_mass(Permutation::reverse(3));
        assert!((l2_distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((l2_distance(&u, &a).unwrap() - 30f64.sqrt() / 6.0).abs() < 1e-15);
        assert!(l2_distance(&u, &DiscreteRankingDistribution::uniform(2).unwrap()).is_err());
    }

    #[test]
    fn distortion_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (pts, w) = random_int_dist(4, 7, 20, &mut rng);
        let d =
            DiscreteRankingDistribution::from_weighted(4, pts.into_iter().zip(w.into_iter().map(|x| x as f64 / 20.0)))
                .unwrap();
        let median = exact_kemeny(&d).unwrap().median().clone();
        let r = distortion_report_scaled(&d, &[Cell::root(4)], &[median], 20).unwrap();
        assert!((r.w - r.e.unwrap()).abs() < 1e-9);
        assert!(r.violations().is_empty(), "{:?}", r.violations());

        let finest: Vec<Cell> = enumerate_permutations(4)
            .unwrap()
            .iter()
            .map(|p| Cell::new(4, &p.ordering().windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>()).unwrap())
            .collect();
        let medians: Vec<Permutation> = enumerate_permutations(4).unwrap();
        let r = distortion_report_scaled(&d, &finest, &medians, 20).unwrap();
        assert_eq!(r.w, 0.0);
        assert_eq!(r.e, Some(0.0));

        let (c0, _) = Cell::root(4).split(0, 1).unwrap();
        assert!(matches!(distortion_report(&d, &[c0], &[Permutation::identity(4)]), Err(Error::PartitionIntegrity(_))));
    }
}
