//! Rankings built from pairwise comparisons: a noisy Bradley-Terry model fitted
//! to comparison records, and randomized quicksort as the rule for choosing
//! which pairs to ask about.

mod bt;
mod quicksort;
mod records;

pub use bt::{bt_fit, bt_probability, logistic, write_ranking_csv, BtFit, NoisyBTModel, BT_L2_PENALTY};
pub use quicksort::{
    multi_run_rank, quicksort_run, BudgetedOracle, ComparisonOracle, Judgment, QuicksortOptions, RunAborted,
    RunOutcome, ScoreOracle, Side,
};
pub use records::{read_records, write_records, ComparisonRecord, PairwiseComparisonMatrix};
