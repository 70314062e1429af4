use serde::{Deserialize, Serialize};

use crate::ddpg::Policy;
use crate::error::Result;
use crate::sim::{EgoObservation, Environment, EventFlags, StepOutcome, TerminationCause};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// Simulation time at the end of the step, seconds.
    pub time_s: f64,
    pub action: f64,
    pub observation: EgoObservation,
    pub reward: f64,
    pub flags: EventFlags,
}

/// Step-by-step record of one episode plus what is needed to score it.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub step_length_s: f64,
    pub records: Vec<StepRecord>,
    /// Route distance covered, capped at the destination.
    pub distance_m: f64,
    /// Time the covered distance takes at the speed limits.
    pub free_flow_time_s: f64,
    pub cause: TerminationCause,
}

impl EpisodeTrace {
    pub fn new(step_length_s: f64) -> Self {
        EpisodeTrace {
            step_length_s,
            records: Vec::new(),
            distance_m: 0.0,
            free_flow_time_s: 0.0,
            cause: TerminationCause::None,
        }
    }

    pub fn push(&mut self, env: &Environment, action: f64, outcome: &StepOutcome) {
        self.records.push(StepRecord {
            time_s: env.time_s(),
            action,
            observation: outcome.observation,
            reward: outcome.reward,
            flags: outcome.flags,
        });
        self.cause = outcome.cause;
        self.distance_m = env.ego_progress().min(env.destination_offset());
        self.free_flow_time_s = env.free_flow_time(self.distance_m);
    }

    pub fn steps(&self) -> usize {
        self.records.len()
    }

    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }

    pub fn speeds(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.observation.speed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TravelDelay {
    pub seconds: f64,
    /// The episode ended without reaching the destination; `seconds` covers the traveled part only.
    pub incomplete: bool,
}

/// Elapsed time minus free-flow time over the distance actually covered.
pub fn travel_delay(trace: &EpisodeTrace) -> TravelDelay {
    TravelDelay {
        seconds: trace.steps() as f64 * trace.step_length_s - trace.free_flow_time_s,
        incomplete: trace.cause != TerminationCause::Destination,
    }
}

/// Sum of per-step ego speeds over the number of steps.
pub fn average_speed(trace: &EpisodeTrace) -> f64 {
    if trace.records.is_empty() {
        return 0.0;
    }
    trace.speeds().sum::<f64>() / trace.steps() as f64
}

/// Runs one episode under `policy` without exploration or learning.
pub fn rollout<P: Policy + ?Sized>(env: &mut Environment, seed: u64, policy: &mut P) -> Result<EpisodeTrace> {
    let mut obs = env.reset(seed)?;
    let mut trace = EpisodeTrace::new(env.config().step_length_s);
    loop {
        let action = policy.act(&obs)?;
        let out = env.step(action)?;
        trace.push(env, action, &out);
        obs = out.observation;
        if out.done {
            return Ok(trace);
        }
    }
}
