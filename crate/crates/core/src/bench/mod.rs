//! Benchmark suites: configuration, presets, execution and reporting.

pub mod config;
pub mod plot;
pub mod presets;
pub mod suite;

#[cfg(test)]
mod tests;

pub use config::{ExperimentConfig, StrategyKind, SuiteConfig};
pub use presets::preset;
pub use suite::{run_suite, summary_from_runs, workers_from_env, ComparisonRow, FamilyMean, RunRecord, SuiteResult};
