//! Scenario runner, experiment reproduction, replay and the live session
//! service for the tendon hand simulator.

pub mod experiments;
pub mod replay;
pub mod scenario;
pub mod session;
pub mod telemetry;
pub mod world;

use std::path::PathBuf;
use thiserror::Error;

/// Written into every manifest; replay refuses artifacts from other versions.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error(transparent)]
    Model(#[from] tendon_hand::Error),
    #[error("artifact produced by version {found}, this is {expected}")]
    VersionMismatch { found: String, expected: String },
    #[error("malformed manifest: {0}")]
    Manifest(String),
}

pub use experiments::{run_experiment, Experiment};
pub use scenario::Scenario;
pub use world::{TickRecord, World};
