//! Experiment harness: configuration, replication, aggregation and output.

pub mod aggregate;
pub mod config;
pub mod experiments;
pub mod output;

pub use aggregate::{aggregate, AggregateSeries};
pub use config::{parse_sizes, ExperimentConfig, ExperimentKind};
pub use experiments::{run_experiment, ExperimentOutput};
pub use output::{Manifest, Table};
