use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Largest combined size accepted by [`mann_whitney_exact`].
pub const EXACT_LIMIT: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HomogeneityResult {
    /// Mann–Whitney `U` of the first sample.
    pub u_statistic: f64,
    pub p_value: f64,
}

/// Mid-ranks (1-based) of the concatenation `a ++ b`, and the tie term
/// `Σ (t³ - t)` over tie groups.
fn mid_ranks(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    if all.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("NaN in rank-sum input".into()));
    }
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.sort_by(|&x, &y| all[x].total_cmp(&all[y]));
    let mut ranks = vec![0.0; all.len()];
    let mut ties = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && all[order[end]] == all[order[start]] {
            end += 1;
        }
        let mid = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = mid;
        }
        let t = (end - start) as f64;
        ties += t * t * t - t;
        start = end;
    }
    Ok((ranks, ties))
}

fn check_nonempty(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("rank-sum test needs two nonempty samples".into()));
    }
    Ok(())
}

/// Two-sided Wilcoxon rank-sum test with mid-ranks, tie-corrected variance
/// and continuity correction under the normal approximation. A zero variance
/// (all values equal) gives `p = 1`.
pub fn homogeneity_test(a: &[f64], b: &[f64]) -> Result<HomogeneityResult> {
    check_nonempty(a, b)?;
    let (ranks, ties) = mid_ranks(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let total = na + nb;
    let u = ranks[..a.len()].iter().sum::<f64>() - na * (na + 1.0) / 2.0;
    let mean = na * nb / 2.0;
    let var = na * nb / 12.0 * ((total + 1.0) - ties / (total * (total - 1.0)));
    if var <= 0.0 {
        return Ok(HomogeneityResult { u_statistic: u, p_value: 1.0 });
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let p = erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    Ok(HomogeneityResult { u_statistic: u, p_value: p })
}

/// Exact two-sided p-value of the rank-sum statistic by enumerating every
/// assignment of the pooled mid-ranks to the first sample. Combined size is
/// limited to [`EXACT_LIMIT`].
pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<HomogeneityResult> {
    check_nonempty(a, b)?;
    let total = a.len() + b.len();
    if total > EXACT_LIMIT {
        return Err(Error::Capacity { what: "exact rank-sum enumeration", n: total, limit: EXACT_LIMIT });
    }
    let (ranks, _) = mid_ranks(a, b)?;
    let na = a.len();
    let offset = (na * (na + 1)) as f64 / 2.0;
    let u = ranks[..na].iter().sum::<f64>() - offset;
    let mean = (na * b.len()) as f64 / 2.0;
    let observed = (u - mean).abs() - 1e-9;
    let (mut hits, mut count) = (0u64, 0u64);
    for mask in 0u32..(1u32 << total) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let r: f64 = (0..total).filter(|k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
        count += 1;
        if (r - offset - mean).abs() >= observed {
            hits += 1;
        }
    }
    Ok(HomogeneityResult { u_statistic: u, p_value: hits as f64 / count as f64 })
}

/// Probability that a positive score exceeds a negative one, ties counting
/// one half. Equals `U / (n_pos n_neg)`.
pub fn auc(positive: &[f64], negative: &[f64]) -> Result<f64> {
    check_nonempty(positive, negative)?;
    let (ranks, _) = mid_ranks(positive, negative)?;
    let (np, nn) = (positive.len() as f64, negative.len() as f64);
    let u = ranks[..positive.len()].iter().sum::<f64>() - np * (np + 1.0) / 2.0;
    Ok(u / (np * nn))
}
