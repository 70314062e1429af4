//! Single-agent deep deterministic policy gradient learner.

mod agent;
mod noise;
mod replay;

pub use agent::{soft_update, ActionBounds, ActorPolicy, DdpgAgent, DdpgConfig, EpisodeMetrics, Policy};
pub use noise::{ou_sample, OuNoiseState};
pub use replay::{ReplayBuffer, Transition};
