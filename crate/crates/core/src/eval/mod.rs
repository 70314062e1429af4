//! Frozen-policy evaluation and episode metrics.

mod protocol;
mod trace;

pub use protocol::{
    environments, evaluate, export_csv, export_json, read_csv, DistanceSummary, EvalProtocol, EvalSummary, SummaryRow,
    DEFAULT_DISTANCES_M,
};
pub use trace::{average_speed, rollout, travel_delay, EpisodeTrace, StepRecord, TravelDelay};
