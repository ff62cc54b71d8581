//! Significance testing and score-distribution analysis.

mod kde;
mod permutation;

pub use kde::{kde, overlap_percent, shared_grid, silverman_bandwidth, write_kde_pair_csv, KdeEstimate};
pub use permutation::{
    paired_permutation_test, perm_test_aufadr, perm_test_eer, AlignedScores, PermTestReport, Statistic,
};
