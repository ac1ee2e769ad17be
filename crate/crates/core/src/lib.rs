//! Consensus ranking distributions learned by recursive pairwise-split
//! partitioning of the symmetric group.

pub mod analysis;
pub mod coast;
pub mod consensus;
pub mod error;
pub mod io;
pub mod models;
pub mod partition;
pub mod perm;
pub mod transport;

pub use error::{Error, Result};
pub use perm::{
    kendall_tau, pairwise_marginals, ranking_depth, ranking_risk, DiscreteRankingDistribution, PairwiseMatrix,
    Permutation, RankingSample,
};

#[cfg(test)]
mod properties;
