//! Monte Carlo harness for the two-phase measurement error design.

pub mod dgp;
pub mod runner;

pub use dgp::{apply_two_phase, generate_complete, true_ate, true_means, CompleteData, CompleteRow, DgpParams};
pub use runner::{
    read_summary_csv, rep_seed, run_grid, run_replication, run_scenario, summarize, write_replications_jsonl,
    write_summary_csv, MethodEstimate, MonteCarloSummary, ReplicationResult,
};
