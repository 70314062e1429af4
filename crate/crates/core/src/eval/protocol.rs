use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::trace::{rollout, travel_delay, EpisodeTrace};
use crate::ddpg::{EpisodeMetrics, Policy};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, Stream};
use crate::sim::{DestinationSpec, Environment, RoadNetwork, ScenarioConfig, TerminationCause};

pub const DEFAULT_DISTANCES_M: [f64; 5] = [10.0, 20.0, 52.0, 107.0, 207.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalProtocol {
    pub episodes: usize,
    pub distances_m: Vec<f64>,
    pub master_seed: u64,
    /// Explicit per-episode seeds; derived from `master_seed` when absent.
    pub seeds: Option<Vec<u64>>,
    pub parallel: bool,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            episodes: 20,
            distances_m: DEFAULT_DISTANCES_M.to_vec(),
            master_seed: 0,
            seeds: None,
            parallel: true,
        }
    }
}

impl EvalProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("evaluation needs at least one episode".into()));
        }
        if self.distances_m.is_empty() || self.distances_m.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Config("evaluation distances must be positive".into()));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.episodes {
                return Err(Error::Config(format!(
                    "{} seeds given for {} episodes",
                    seeds.len(),
                    self.episodes
                )));
            }
        }
        Ok(())
    }

    /// Seed of episode `i`; shared by every distance and every policy so comparisons are paired.
    pub fn episode_seed(&self, i: usize) -> u64 {
        match &self.seeds {
            Some(seeds) => seeds[i],
            None => derive_seed(self.master_seed, Stream::EvalEpisode, i as u64, 0),
        }
    }
}

/// Results for one destination distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    pub distance_m: f64,
    pub episodes: usize,
    pub collisions: usize,
    pub successes: usize,
    pub timeouts: usize,
    /// Over successful episodes only; `None` if there were none.
    pub mean_travel_delay_s: Option<f64>,
    /// Delay over the traveled part of failed episodes.
    pub mean_failed_delay_s: Option<f64>,
    pub mean_avg_speed_mps: f64,
    pub success_rate: f64,
}

impl DistanceSummary {
    pub fn from_episodes(distance_m: f64, episodes: &[EpisodeMetrics]) -> Self {
        let n = episodes.len();
        let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        let successes = episodes.iter().filter(|m| m.reached).count();
        DistanceSummary {
            distance_m,
            episodes: n,
            collisions: episodes.iter().filter(|m| m.collided).count(),
            successes,
            timeouts: episodes.iter().filter(|m| m.timed_out()).count(),
            mean_travel_delay_s: mean(
                episodes
                    .iter()
                    .filter(|m| m.reached)
                    .map(|m| m.travel_delay_s)
                    .collect(),
            ),
            mean_failed_delay_s: mean(
                episodes
                    .iter()
                    .filter(|m| !m.reached)
                    .map(|m| m.travel_delay_s)
                    .collect(),
            ),
            mean_avg_speed_mps: mean(episodes.iter().map(|m| m.average_speed_mps).collect()).unwrap_or(0.0),
            success_rate: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub policy_id: String,
    pub distances: Vec<DistanceSummary>,
}

/// One exported line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy_id: String,
    pub distance_m: f64,
    pub episodes: usize,
    pub collisions: usize,
    pub mean_travel_delay_s: Option<f64>,
    pub mean_avg_speed_mps: f64,
    pub success_rate: f64,
}

impl EvalSummary {
    pub fn rows(&self) -> impl Iterator<Item = SummaryRow> + '_ {
        self.distances.iter().map(|d| SummaryRow {
            policy_id: self.policy_id.clone(),
            distance_m: d.distance_m,
            episodes: d.episodes,
            collisions: d.collisions,
            mean_travel_delay_s: d.mean_travel_delay_s,
            mean_avg_speed_mps: d.mean_avg_speed_mps,
            success_rate: d.success_rate,
        })
    }
}

/// Builds the environment for every requested distance, failing before any rollout if one is infeasible.
pub fn environments(
    network: &Arc<RoadNetwork>,
    template: &ScenarioConfig,
    distances: &[f64],
) -> Result<Vec<Environment>> {
    distances
        .iter()
        .map(|&d| {
            let mut cfg = template.clone();
            cfg.set_destination(DestinationSpec::Distance(d));
            Environment::new(network.clone(), cfg)
        })
        .collect()
}

/// Greedy rollouts of `policy` for every (distance, seed) pair of the protocol.
pub fn evaluate<P>(
    policy_id: &str,
    policy: &P,
    network: &Arc<RoadNetwork>,
    template: &ScenarioConfig,
    protocol: &EvalProtocol,
) -> Result<EvalSummary>
where
    P: Policy + Clone + Send + Sync,
{
    protocol.validate()?;
    let envs = environments(network, template, &protocol.distances_m)?;
    let mut distances = Vec::with_capacity(envs.len());
    for (env, &d) in envs.into_iter().zip(&protocol.distances_m) {
        let metrics = run_episodes(env, policy, protocol)?;
        distances.push(DistanceSummary::from_episodes(d, &metrics));
    }
    Ok(EvalSummary {
        policy_id: policy_id.to_string(),
        distances,
    })
}

fn episode<P: Policy + Clone>(env: &mut Environment, policy: &P, seed: u64) -> Result<EpisodeMetrics> {
    let mut policy = policy.clone();
    let trace: EpisodeTrace = rollout(env, seed, &mut policy)?;
    debug_assert!(trace.cause != TerminationCause::None);
    debug_assert!(trace.cause != TerminationCause::Destination || travel_delay(&trace).seconds >= -1e-9);
    Ok(EpisodeMetrics::from_trace(&trace))
}

fn run_episodes<P>(env: Environment, policy: &P, protocol: &EvalProtocol) -> Result<Vec<EpisodeMetrics>>
where
    P: Policy + Clone + Send + Sync,
{
    let seeds: Vec<u64> = (0..protocol.episodes).map(|i| protocol.episode_seed(i)).collect();
    #[cfg(feature = "parallel")]
    if protocol.parallel {
        use rayon::prelude::*;
        return seeds
            .par_iter()
            .map_init(|| env.clone(), |env, &seed| episode(env, policy, seed))
            .collect();
    }
    let mut env = env;
    seeds.iter().map(|&seed| episode(&mut env, policy, seed)).collect()
}

/// Header plus one row per (policy, distance).
pub fn export_csv(summaries: &[EvalSummary], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record([
        "policy_id",
        "distance_m",
        "episodes",
        "collisions",
        "mean_travel_delay_s",
        "mean_avg_speed_mps",
        "success_rate",
    ])?;
    for row in summaries.iter().flat_map(EvalSummary::rows) {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::file(path, e))?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Same rows as the CSV, as a JSON array.
pub fn export_json(summaries: &[EvalSummary], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let rows: Vec<SummaryRow> = summaries.iter().flat_map(EvalSummary::rows).collect();
    let text = serde_json::to_string_pretty(&rows)?;
    std::fs::write(path, text).map_err(|e| Error::file(path, e))
}
