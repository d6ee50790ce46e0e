//! Multi-layout experiment runner and result files.

pub mod config;
pub mod output;
pub mod runner;

pub use config::ExperimentConfig;
pub use output::{empirical_cdf, median, summarize, write_outputs, write_results, KindSummary, Summary};
pub use runner::{build_layout, layout_schedule, layout_seed, run_experiment, run_layout, EdgeRecord, ExperimentResults, LayoutResult, RateRecord};
