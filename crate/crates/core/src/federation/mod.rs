//! Synchronous federated training: local DDPG, episode-weighted averaging, broadcast.

mod aggregate;
mod training;

pub use aggregate::{aggregate, AgentUpdate};
pub use training::{
    export_reports, run_training, AgentRoundStats, Federation, FederationConfig, GlobalModel, Manifest, ManifestRound,
    OptimizerMode, RoundReport, UpdateObserver,
};
