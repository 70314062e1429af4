use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate, AgentUpdate};
use crate::ddpg::{soft_update, DdpgAgent, DdpgConfig, EpisodeMetrics};
use crate::error::{Error, Result};
use crate::neural::{Checkpoint, Entry, MlpParams};
use crate::seed::{derive_seed, fnv1a64, Stream};
use crate::sim::Environment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerMode {
    /// Zero the Adam moments after every broadcast.
    Reset,
    /// Keep each agent's moments across rounds.
    KeepLocal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationConfig {
    pub agents: usize,
    pub rounds: usize,
    pub episodes_per_round: usize,
    pub master_seed: u64,
    /// Per-agent seed roots; each agent derives from `master_seed` when absent.
    pub agent_seeds: Option<Vec<u64>>,
    pub optimizer: OptimizerMode,
    pub parallel: bool,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            agents: 10,
            rounds: 5,
            episodes_per_round: 100,
            master_seed: 0,
            agent_seeds: None,
            optimizer: OptimizerMode::Reset,
            parallel: true,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.agents == 0 || self.rounds == 0 || self.episodes_per_round == 0 {
            return Err(Error::Config(format!(
                "agents, rounds and episodes_per_round must all be at least 1 (got {}, {}, {})",
                self.agents, self.rounds, self.episodes_per_round
            )));
        }
        if let Some(seeds) = &self.agent_seeds {
            if seeds.len() != self.agents {
                return Err(Error::Config(format!(
                    "{} agent seeds for {} agents",
                    seeds.len(),
                    self.agents
                )));
            }
        }
        Ok(())
    }

    /// Seed of the `episode`-th episode (counted over all rounds) of agent `agent`.
    pub fn episode_seed(&self, agent: usize, episode: u64) -> u64 {
        match &self.agent_seeds {
            Some(seeds) => derive_seed(seeds[agent], Stream::TrainEpisode, 0, episode),
            None => derive_seed(self.master_seed, Stream::TrainEpisode, agent as u64, episode),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub actor: MlpParams,
    pub critic: MlpParams,
    pub target_actor: MlpParams,
    pub target_critic: MlpParams,
    /// Completed rounds.
    pub round: usize,
}

impl GlobalModel {
    pub fn init(ddpg: &DdpgConfig, master_seed: u64) -> Result<Self> {
        let actor = ddpg.init_actor(derive_seed(master_seed, Stream::GlobalInit, 0, 0))?;
        let critic = ddpg.init_critic(derive_seed(master_seed, Stream::GlobalInit, 1, 0))?;
        Ok(GlobalModel {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            round: 0,
        })
    }

    pub fn to_checkpoint(&self, ddpg: &DdpgConfig, agent_episodes: &[u64], config_hash: &str) -> Result<Checkpoint> {
        let mut ckpt = Checkpoint::new();
        ckpt.insert("kind", Entry::Text("global".into()))
            .insert("ddpg_config", Entry::Text(serde_json::to_string(ddpg)?))
            .insert("actor", Entry::Network(self.actor.clone()))
            .insert("critic", Entry::Network(self.critic.clone()))
            .insert("target_actor", Entry::Network(self.target_actor.clone()))
            .insert("target_critic", Entry::Network(self.target_critic.clone()))
            .insert("round", Entry::U64(self.round as u64))
            .insert("agent_episodes", Entry::Text(serde_json::to_string(agent_episodes)?))
            .insert("config_hash", Entry::Text(config_hash.into()));
        Ok(ckpt)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let model = GlobalModel {
            actor: ckpt.network("actor")?.clone(),
            critic: ckpt.network("critic")?.clone(),
            target_actor: ckpt.network("target_actor")?.clone(),
            target_critic: ckpt.network("target_critic")?.clone(),
            round: ckpt.u64("round")? as usize,
        };
        if !model.actor.same_architecture(&model.target_actor) || !model.critic.same_architecture(&model.target_critic)
        {
            return Err(Error::Checkpoint(
                "global targets differ in shape from online networks".into(),
            ));
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRoundStats {
    pub agent_id: usize,
    pub episodes: u64,
    pub mean_reward: f64,
    pub collisions: usize,
    pub successes: usize,
    pub episode_rewards: Vec<f64>,
}

impl AgentRoundStats {
    fn new(agent_id: usize, metrics: &[EpisodeMetrics]) -> Self {
        let rewards: Vec<f64> = metrics.iter().map(|m| m.total_reward).collect();
        AgentRoundStats {
            agent_id,
            episodes: metrics.len() as u64,
            mean_reward: rewards.iter().sum::<f64>() / rewards.len().max(1) as f64,
            collisions: metrics.iter().filter(|m| m.collided).count(),
            successes: metrics.iter().filter(|m| m.reached).count(),
            episode_rewards: rewards,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    /// 1-based.
    pub round: usize,
    pub agents: Vec<AgentRoundStats>,
    pub aggregation_ms: f64,
    pub checkpoint: Option<PathBuf>,
}

impl RoundReport {
    pub fn mean_reward(&self) -> f64 {
        let (sum, n) = self
            .agents
            .iter()
            .flat_map(|a| &a.episode_rewards)
            .fold((0.0, 0usize), |(s, n), r| (s + r, n + 1));
        sum / n.max(1) as f64
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportRow {
    round: usize,
    agent_id: usize,
    episodes: u64,
    mean_reward: f64,
    collisions: usize,
    successes: usize,
    aggregation_ms: f64,
}

/// One row per (round, agent).
pub fn export_reports(reports: &[RoundReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in reports {
        for a in &r.agents {
            w.serialize(ReportRow {
                round: r.round,
                agent_id: a.agent_id,
                episodes: a.episodes,
                mean_reward: a.mean_reward,
                collisions: a.collisions,
                successes: a.successes,
                aggregation_ms: r.aggregation_ms,
            })?;
        }
    }
    w.flush().map_err(|e| Error::file(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRound {
    pub round: usize,
    pub checkpoint: String,
    pub agent_episodes: Vec<u64>,
    /// FNV-1a 64 of the checkpoint bytes, hex.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub master_seed: u64,
    pub build: String,
    pub rounds: Vec<ManifestRound>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub type UpdateObserver = Box<dyn FnMut(&[AgentUpdate]) + Send>;

/// N agents, their environments, and the shared global model.
pub struct Federation {
    config: FederationConfig,
    ddpg: DdpgConfig,
    global: GlobalModel,
    agents: Vec<DdpgAgent>,
    envs: Vec<Environment>,
    episodes_done: u64,
    observer: Option<UpdateObserver>,
}

impl Federation {
    /// `envs` holds one environment per agent, or a single one that every agent gets a copy of.
    pub fn new(config: FederationConfig, ddpg: DdpgConfig, envs: Vec<Environment>) -> Result<Self> {
        config.validate()?;
        ddpg.validate()?;
        let envs = match envs.len() {
            1 => vec![envs[0].clone(); config.agents],
            n if n == config.agents => envs,
            n => return Err(Error::Config(format!("{n} environments for {} agents", config.agents))),
        };
        let global = GlobalModel::init(&ddpg, config.master_seed)?;
        let agents = (0..config.agents)
            .map(|_| DdpgAgent::from_networks(ddpg.clone(), global.actor.clone(), global.critic.clone()))
            .collect::<Result<_>>()?;
        Ok(Federation {
            config,
            ddpg,
            global,
            agents,
            envs,
            episodes_done: 0,
            observer: None,
        })
    }

    pub fn config(&self) -> &FederationConfig {
        &self.config
    }

    pub fn ddpg(&self) -> &DdpgConfig {
        &self.ddpg
    }

    pub fn global(&self) -> &GlobalModel {
        &self.global
    }

    pub fn agents(&self) -> &[DdpgAgent] {
        &self.agents
    }

    /// Called with every round's updates just before they are aggregated.
    pub fn observe_updates(&mut self, observer: UpdateObserver) {
        self.observer = Some(observer);
    }

    /// Stable hash of everything that determines the run. Parallelism is left
    /// out since serial and parallel runs produce the same bits.
    pub fn config_hash(&self) -> String {
        let config = FederationConfig {
            parallel: false,
            ..self.config.clone()
        };
        let mut text = serde_json::to_string(&config).unwrap_or_default();
        text.push_str(&serde_json::to_string(&self.ddpg).unwrap_or_default());
        for env in &self.envs {
            text.push_str(&env.config().to_toml());
        }
        format!("{:016x}", fnv1a64(text.as_bytes()))
    }

    fn train_locally(&mut self) -> Result<Vec<Vec<EpisodeMetrics>>> {
        let cfg = &self.config;
        let first = self.episodes_done;
        let work = |(i, (agent, env)): (usize, (&mut DdpgAgent, &mut Environment))| {
            agent.reset_episode_count();
            (0..cfg.episodes_per_round as u64)
                .map(|e| agent.train_episode(env, cfg.episode_seed(i, first + e)))
                .collect::<Result<Vec<_>>>()
                .map_err(|source| Error::Agent {
                    agent: i,
                    source: Box::new(source),
                })
        };
        #[cfg(feature = "parallel")]
        if cfg.parallel {
            use rayon::prelude::*;
            return self
                .agents
                .par_iter_mut()
                .zip(self.envs.par_iter_mut())
                .enumerate()
                .map(work)
                .collect();
        }
        self.agents
            .iter_mut()
            .zip(self.envs.iter_mut())
            .enumerate()
            .map(work)
            .collect()
    }

    /// Local training, aggregation, global target update and broadcast.
    pub fn run_round(&mut self) -> Result<RoundReport> {
        let metrics = self.train_locally()?;
        self.finish_round(metrics)
    }

    fn finish_round(&mut self, metrics: Vec<Vec<EpisodeMetrics>>) -> Result<RoundReport> {
        self.episodes_done += self.config.episodes_per_round as u64;

        let started = Instant::now();
        let updates: Vec<AgentUpdate> = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| AgentUpdate {
                agent_id: i,
                actor: a.actor().flatten(),
                critic: a.critic().flatten(),
                episodes: a.episodes(),
            })
            .collect();
        let expected = self.global.actor.param_count() + self.global.critic.param_count();
        if let Some(bad) = updates.iter().find(|u| u.payload_len() != expected) {
            return Err(Error::Shape(format!(
                "agent {} sent {} values, the architecture has {expected}",
                bad.agent_id,
                bad.payload_len()
            )));
        }
        if let Some(observer) = &mut self.observer {
            observer(&updates);
        }
        let (actor, critic) = aggregate(&updates)?;
        self.global.actor.assign_flat(&actor)?;
        self.global.critic.assign_flat(&critic)?;
        soft_update(&mut self.global.target_actor, &self.global.actor, self.ddpg.tau)?;
        soft_update(&mut self.global.target_critic, &self.global.critic, self.ddpg.tau)?;
        let aggregation_ms = started.elapsed().as_secs_f64() * 1e3;

        let reset = self.config.optimizer == OptimizerMode::Reset;
        for agent in &mut self.agents {
            agent.load_weights(&self.global.actor, &self.global.critic, reset)?;
        }
        self.global.round += 1;
        log::info!("round {} aggregated in {aggregation_ms:.1} ms", self.global.round);
        Ok(RoundReport {
            round: self.global.round,
            agents: metrics
                .iter()
                .enumerate()
                .map(|(i, m)| AgentRoundStats::new(i, m))
                .collect(),
            aggregation_ms,
            checkpoint: None,
        })
    }

    /// All configured rounds. With `out_dir`, writes `round_<k>.ckpt` after each round,
    /// `agent_<i>.ckpt` holding each agent's final local model, `round_reports.csv` and `manifest.json`.
    pub fn run(&mut self, out_dir: Option<&Path>) -> Result<Vec<RoundReport>> {
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        }
        let hash = self.config_hash();
        let mut manifest = Manifest {
            config_hash: hash.clone(),
            master_seed: self.config.master_seed,
            build: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).into(),
            rounds: Vec::new(),
        };
        let mut reports = Vec::with_capacity(self.config.rounds);
        for k in 1..=self.config.rounds {
            let last = k == self.config.rounds;
            let mut report = self.run_round_keeping_locals(out_dir.filter(|_| last))?;
            if let Some(dir) = out_dir {
                let name = format!("round_{k}.ckpt");
                let episodes: Vec<u64> = report.agents.iter().map(|a| a.episodes).collect();
                let bytes = self.global.to_checkpoint(&self.ddpg, &episodes, &hash)?.to_bytes();
                let path = dir.join(&name);
                std::fs::write(&path, &bytes).map_err(|e| Error::file(&path, e))?;
                manifest.rounds.push(ManifestRound {
                    round: k,
                    checkpoint: name,
                    agent_episodes: episodes,
                    digest: format!("{:016x}", fnv1a64(&bytes)),
                });
                report.checkpoint = Some(path);
            }
            reports.push(report);
        }
        if let Some(dir) = out_dir {
            export_reports(&reports, dir.join("round_reports.csv"))?;
            let path = dir.join("manifest.json");
            std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::file(&path, e))?;
        }
        Ok(reports)
    }

    fn run_round_keeping_locals(&mut self, save_to: Option<&Path>) -> Result<RoundReport> {
        let Some(dir) = save_to else {
            return self.run_round();
        };
        // Local models are only distinct between local training and broadcast.
        let metrics = self.train_locally()?;
        for (i, agent) in self.agents.iter().enumerate() {
            agent.save(dir.join(format!("agent_{i}.ckpt")))?;
        }
        self.finish_round(metrics)
    }
}

/// Builds the federation and runs every round.
pub fn run_training(
    config: FederationConfig,
    ddpg: DdpgConfig,
    envs: Vec<Environment>,
    out_dir: Option<&Path>,
) -> Result<(GlobalModel, Vec<RoundReport>)> {
    let mut fed = Federation::new(config, ddpg, envs)?;
    let reports = fed.run(out_dir)?;
    Ok((fed.global, reports))
}
