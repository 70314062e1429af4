use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COLLISION: f64 = -10.0;
pub const DESTINATION: f64 = 10.0;
pub const BRAKING_AND_WAITING: f64 = -0.05;
pub const BRAKING_OR_WAITING: f64 = 0.025;
pub const FREE_MOVEMENT: f64 = 0.05;
pub const MOVING: f64 = 0.04;
pub const DEFAULT: f64 = -0.02;

/// Every value [`compute_reward`] can return.
pub const REWARD_VALUES: [f64; 7] = [
    COLLISION,
    DESTINATION,
    BRAKING_AND_WAITING,
    BRAKING_OR_WAITING,
    FREE_MOVEMENT,
    MOVING,
    DEFAULT,
];

/// Per-step ego events.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventFlags {
    pub collided: bool,
    pub reached_destination: bool,
    /// Realised ego acceleration below the braking threshold.
    pub braking: bool,
    /// Near-stationary within the waiting distance of a red light on the ego's edge.
    pub waiting_at_light: bool,
    /// Ego speed is non-zero after the step.
    pub moving: bool,
    /// No vehicle ahead on the ego's route within the free-gap distance.
    pub unobstructed: bool,
}

/// Exactly one case fires, checked in this order:
/// collision, destination, braking and waiting, braking xor waiting,
/// moving with a free road ahead, moving, otherwise the default.
pub fn compute_reward(flags: &EventFlags) -> Result<f64> {
    if flags.collided && flags.reached_destination {
        return Err(Error::InconsistentFlags);
    }
    let r = if flags.collided {
        COLLISION
    } else if flags.reached_destination {
        DESTINATION
    } else if flags.braking && flags.waiting_at_light {
        BRAKING_AND_WAITING
    } else if flags.braking != flags.waiting_at_light {
        BRAKING_OR_WAITING
    } else if flags.moving && flags.unobstructed {
        FREE_MOVEMENT
    } else if flags.moving {
        MOVING
    } else {
        DEFAULT
    };
    Ok(r)
}
