//! WebAssembly bindings for the static page in `www/`.
//!
//! Three operations: step the grid simulator by hand, draw an exploration
//! noise path, and blend per-agent weight vectors by episode count.
//! Exported wrappers are thin; the plain functions beside them carry the logic
//! and are what the native tests call.

use std::sync::Arc;

use fddpg_core::ddpg::OuNoiseState;
use fddpg_core::federation::{aggregate, AgentUpdate};
use fddpg_core::sim::{load_network, Environment, Role, ScenarioConfig, Signal, StepOutcome};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

const GRID_NET: &str = include_str!("../../core/fixtures/grid.net");
const GRID_SCENARIO: &str = include_str!("../../core/fixtures/grid.toml");

fn js(e: fddpg_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// One ego episode on the 2x2 signalized grid, stepped from the page.
#[wasm_bindgen]
pub struct Drive {
    env: Environment,
    total_reward: f64,
    last: Option<StepOutcome>,
}

impl Drive {
    pub fn try_new(seed: u64, background: u32, distance_m: f64) -> fddpg_core::Result<Drive> {
        let network = Arc::new(load_network(GRID_NET)?);
        let mut cfg = ScenarioConfig::from_toml(GRID_SCENARIO)?;
        cfg.destination_distance_m = Some(distance_m);
        if let Some(random) = cfg.random_background.as_mut() {
            random.count = background;
        }
        let mut env = Environment::new(network, cfg)?;
        env.reset(seed)?;
        Ok(Drive {
            env,
            total_reward: 0.0,
            last: None,
        })
    }

    pub fn try_step(&mut self, accel: f64) -> fddpg_core::Result<f64> {
        let out = self.env.step(accel)?;
        self.total_reward += out.reward;
        self.last = Some(out);
        Ok(out.reward)
    }
}

#[wasm_bindgen]
impl Drive {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, background: u32, distance_m: f64) -> Result<Drive, JsError> {
        Drive::try_new(seed, background, distance_m).map_err(js)
    }

    /// Applies one ego acceleration (m/s^2) and returns the step reward.
    pub fn step(&mut self, accel: f64) -> Result<f64, JsError> {
        self.try_step(accel).map_err(js)
    }

    pub fn done(&self) -> bool {
        self.env.is_done()
    }

    pub fn steps(&self) -> u32 {
        self.env.steps()
    }

    pub fn total_reward(&self) -> f64 {
        self.total_reward
    }

    pub fn speed(&self) -> f64 {
        self.env.ego().speed
    }

    /// Ended-by cause, or an empty string while running.
    pub fn cause(&self) -> String {
        match self.last {
            Some(out) if out.done => format!("{:?}", out.cause),
            _ => String::new(),
        }
    }

    /// Space-separated names of the flags raised on the last step.
    pub fn flags(&self) -> String {
        let Some(out) = self.last else {
            return String::new();
        };
        let f = out.flags;
        [
            (f.collided, "collided"),
            (f.reached_destination, "reached"),
            (f.braking, "braking"),
            (f.waiting_at_light, "waiting"),
            (f.moving, "moving"),
            (f.unobstructed, "unobstructed"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, name)| *name)
        .collect::<Vec<_>>()
        .join(" ")
    }

    /// Flat `[x, y, heading, is_ego]` per vehicle, ego first.
    pub fn vehicles(&self) -> Vec<f64> {
        let net = self.env.network();
        self.env
            .vehicles()
            .iter()
            .flat_map(|v| {
                let (x, y) = net.point_on_edge(v.edge, v.position);
                [x, y, net.heading(v.edge), f64::from(u8::from(v.role == Role::Ego))]
            })
            .collect()
    }

    /// Flat `[x1, y1, x2, y2]` per directed edge.
    pub fn roads(&self) -> Vec<f64> {
        let net = self.env.network();
        net.edges()
            .iter()
            .flat_map(|e| {
                let (a, b) = (net.node_xy(e.from), net.node_xy(e.to));
                [a.0, a.1, b.0, b.1]
            })
            .collect()
    }

    /// Flat `[x, y, is_red]` at the stop line of every signalized edge.
    pub fn signals(&self) -> Vec<f64> {
        let net = self.env.network();
        let t = self.env.time_s();
        (0..net.edges().len())
            .filter_map(|i| net.signal(i, t).map(|s| (i, s)))
            .flat_map(|(i, s)| {
                let e = &net.edges()[i];
                let (x, y) = net.point_on_edge(i, e.length - 4.0);
                [x, y, f64::from(u8::from(s == Signal::Red))]
            })
            .collect()
    }

    pub fn destination(&self) -> Vec<f64> {
        let (x, y) = self.env.destination();
        vec![x, y]
    }
}

/// `steps` successive noise values starting from the mean.
pub fn noise_path(theta: f64, sigma: f64, steps: u32, seed: u64) -> fddpg_core::Result<Vec<f64>> {
    let mut state = OuNoiseState {
        theta,
        sigma,
        ..OuNoiseState::default()
    };
    state.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..steps).map(|_| state.sample(&mut rng)).collect())
}

#[wasm_bindgen]
pub fn ou_path(theta: f64, sigma: f64, steps: u32, seed: u64) -> Result<Vec<f64>, JsError> {
    noise_path(theta, sigma, steps, seed).map_err(js)
}

/// Long-run standard deviation of the unit-step process.
#[wasm_bindgen]
pub fn ou_stationary_std(theta: f64, sigma: f64) -> f64 {
    OuNoiseState {
        theta,
        sigma,
        ..OuNoiseState::default()
    }
    .stationary_variance()
    .sqrt()
}

/// Episode-weighted mean of agent vectors packed row-wise in `weights`.
pub fn blend_weights(weights: &[f64], dim: usize, episodes: &[u32]) -> fddpg_core::Result<Vec<f64>> {
    if dim == 0 || weights.len() != dim * episodes.len() {
        return Err(fddpg_core::Error::Shape(format!(
            "{} values do not split into {} agents of width {dim}",
            weights.len(),
            episodes.len()
        )));
    }
    let updates: Vec<AgentUpdate> = weights
        .chunks(dim)
        .zip(episodes)
        .enumerate()
        .map(|(agent_id, (w, &n))| AgentUpdate {
            agent_id,
            actor: w.to_vec(),
            critic: vec![0.0],
            episodes: u64::from(n),
        })
        .collect();
    Ok(aggregate(&updates)?.0)
}

#[wasm_bindgen]
pub fn fedavg(weights: Vec<f64>, dim: usize, episodes: Vec<u32>) -> Result<Vec<f64>, JsError> {
    blend_weights(&weights, dim, &episodes).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drive_runs_to_completion() {
        let mut d = Drive::try_new(3, 4, 52.0).unwrap();
        assert!(d.vehicles().len() >= 4);
        assert_eq!(d.vehicles()[3], 1.0);
        assert_eq!(d.roads().len(), 24 * 4);
        while !d.done() {
            d.try_step(1.0).unwrap();
        }
        assert!(!d.cause().is_empty());
        assert!(d.steps() <= 900);
        assert!(d.try_step(0.0).is_err());
    }

    #[test]
    fn flags_name_the_last_step() {
        let mut d = Drive::try_new(1, 0, 207.0).unwrap();
        assert_eq!(d.flags(), "");
        let r = d.try_step(2.0).unwrap();
        assert!(d.flags().contains("moving"));
        assert_eq!(r, d.total_reward());
    }

    #[test]
    fn signals_are_reported_for_lit_approaches() {
        let d = Drive::try_new(1, 0, 207.0).unwrap();
        let s = d.signals();
        assert!(!s.is_empty() && s.len().is_multiple_of(3));
        assert!(s.chunks(3).all(|c| c[2] == 0.0 || c[2] == 1.0));
    }

    #[test]
    fn noise_path_is_seeded_and_mean_reverting() {
        let a = noise_path(0.15, 0.2, 5000, 9).unwrap();
        assert_eq!(a, noise_path(0.15, 0.2, 5000, 9).unwrap());
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 0.1);
        assert!(noise_path(-1.0, 0.2, 10, 0).is_err());
        let expected = (0.04f64 / (1.0 - 0.85 * 0.85)).sqrt();
        assert!((ou_stationary_std(0.15, 0.2) - expected).abs() < 1e-12);
    }

    #[test]
    fn blend_is_episode_weighted() {
        let w = [0.0, 4.0, 2.0, 0.0];
        let out = blend_weights(&w, 2, &[1, 3]).unwrap();
        assert!((out[0] - 1.5).abs() < 1e-15 && (out[1] - 1.0).abs() < 1e-15);
        assert!(blend_weights(&w, 3, &[1, 3]).is_err());
        assert!(blend_weights(&w, 2, &[0, 3]).is_err());
    }
}
