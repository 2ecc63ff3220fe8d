//! Experiment harness for DBSCAN counterfactual explanations: dataset and
//! model files, configuration, query sampling, parallel execution and CSV
//! reporting, plus the `exdbscan` command line.

pub mod cli;
pub mod config;
pub mod constraints;
mod error;
pub mod experiment;
pub mod format;
pub mod model_file;
pub mod plan;
pub mod synthetic;

pub use config::ExperimentConfig;
pub use error::{BenchError, Result};
pub use experiment::{run_experiment, Experiment, ExperimentReport, Outcome, QueryRecord, StrategySummary};
pub use plan::{build_query_plan, PlannedQuery, QueryPlan};
