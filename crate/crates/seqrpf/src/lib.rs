//! Configuration, oracles, Monte Carlo and report emission around
//! `seqrpf-core`.

pub mod clt;
pub mod config;
pub mod error;
pub mod io;
pub mod oracle;
pub mod pipeline;
pub mod report;

pub use config::{parse_config, ExperimentConfig, Pipeline};
pub use error::RunError;
pub use pipeline::{execute, prepare, Prepared};
