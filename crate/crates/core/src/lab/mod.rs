//! Seeded Monte-Carlo harness for the stability bounds.
//!
//! Every random draw comes from [`sampling::stream`], keyed by seed, repetition index and role,
//! so reports are identical across runs and thread counts.

pub mod experiment;
pub mod report;
pub mod sampling;
pub mod stats;
pub mod verify;

pub use experiment::{
    pushforward, run_stability_experiment, verify_chain_rule, verify_pair, verify_portfolio_bound,
    verify_thm51, verify_thm52, verify_thm53, verify_thm55, ChainRuleCheck, ExperimentConfig,
    MonteCarlo, PerturbationFamily, StabilityReport, StabilityRow, Statistic,
};
pub use sampling::{sample, stream, DistributionSpec, Role, Sampler};
pub use verify::{
    graphical_recovery_experiment, verify_consistency, verify_prop82, ConsistencyReport,
    GraphRecoveryReport, GraphRecoverySettings, Prop82Check,
};
