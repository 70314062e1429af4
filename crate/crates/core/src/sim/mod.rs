//! Deterministic microscopic traffic simulator.

mod network;
pub mod reward;
mod scenario;
mod world;

pub use network::{load_network, Edge, Node, RoadNetwork, Route, Signal, TrafficLight};
pub use reward::{compute_reward, EventFlags};
pub use scenario::{BackgroundSpawn, DestinationSpec, RandomBackground, ScenarioConfig};
pub use world::{
    distance_to_destination, EgoObservation, Environment, Role, StepOutcome, TerminationCause, VehicleState,
};
