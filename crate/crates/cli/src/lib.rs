//! Simulation, fitting, evaluation and benchmarking front end for `passreg`.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod methods;
pub mod output;
pub mod preprocess;

pub use commands::{cmd_bench, cmd_evaluate, cmd_fit, cmd_simulate, EvaluateArgs};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
