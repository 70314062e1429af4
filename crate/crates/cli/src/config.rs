//! Run configuration.
//!
//! ```toml
//! seed = 42                      # master seed for training, evaluation and sim-run
//! out_dir = "runs/demo"          # relative paths resolve against this file's directory
//!
//! [paths]
//! scenario = "scenarios/train.toml"
//! eval_scenario = "scenarios/eval.toml"   # optional, defaults to `scenario`
//! checkpoints = ["runs/demo/round_5.ckpt"] # policies for `eval`
//!
//! [federation]   # agents, rounds, episodes_per_round, optimizer, parallel
//! [ddpg]         # network sizes, learning rates, gamma, tau, batch, replay, noise
//! [eval]         # episodes, distances_m, seeds, parallel
//! ```

use std::path::{Path, PathBuf};

use fddpg_core::ddpg::DdpgConfig;
use fddpg_core::eval::EvalProtocol;
use fddpg_core::federation::FederationConfig;
use fddpg_core::sim::{Environment, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub scenario: PathBuf,
    #[serde(default)]
    pub eval_scenario: Option<PathBuf>,
    #[serde(default)]
    pub checkpoints: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub paths: Paths,
    #[serde(default)]
    pub federation: FederationConfig,
    #[serde(default)]
    pub ddpg: DdpgConfig,
    #[serde(default)]
    pub eval: EvalProtocol,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub serial: bool,
    pub rounds: Option<usize>,
    pub agents: Option<usize>,
    pub episodes: Option<usize>,
}

impl RunConfig {
    /// Parses the file and resolves its relative paths; no validation yet.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(CliError::Missing { path: path.into() });
        }
        let text = std::fs::read_to_string(path).map_err(crate::error::io(path))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|source| CliError::ConfigSyntax {
            path: path.into(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.out_dir);
        resolve(&mut cfg.paths.scenario);
        if let Some(p) = cfg.paths.eval_scenario.as_mut() {
            resolve(p);
        }
        cfg.paths.checkpoints.iter_mut().for_each(resolve);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(dir) = &o.out_dir {
            self.out_dir.clone_from(dir);
        }
        if o.serial {
            self.federation.parallel = false;
            self.eval.parallel = false;
        }
        if let Some(r) = o.rounds {
            self.federation.rounds = r;
        }
        if let Some(n) = o.agents {
            self.federation.agents = n;
        }
        if let Some(e) = o.episodes {
            self.federation.episodes_per_round = e;
        }
        self.federation.master_seed = self.seed;
        self.eval.master_seed = self.seed;
    }

    /// Checks hyperparameter ranges and blocks shared by every command.
    pub fn validate(&self) -> Result<()> {
        let d = &self.ddpg;
        if !(d.actor_lr > 0.0 && d.critic_lr > 0.0) {
            return Err(CliError::Invalid(format!(
                "learning rates must be positive, got actor {} and critic {}",
                d.actor_lr, d.critic_lr
            )));
        }
        d.validate()?;
        self.federation.validate()?;
        self.eval.validate()?;
        Ok(())
    }

    pub fn scenario(&self) -> Result<ScenarioConfig> {
        load_scenario(&self.paths.scenario)
    }

    pub fn eval_scenario(&self) -> Result<ScenarioConfig> {
        load_scenario(self.paths.eval_scenario.as_ref().unwrap_or(&self.paths.scenario))
    }

    /// Builds the training environment, which also checks the network and destination.
    pub fn environment(&self) -> Result<Environment> {
        Ok(Environment::from_config(self.scenario()?)?)
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    if !path.is_file() {
        return Err(CliError::Missing { path: path.into() });
    }
    let cfg = ScenarioConfig::load(path)?;
    if !cfg.network.is_file() {
        return Err(CliError::Missing { path: cfg.network });
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> RunConfig {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn defaults_follow_the_hyperparameter_table() {
        let cfg = parse("seed = 1\n[paths]\nscenario = \"s.toml\"\n");
        assert_eq!(cfg.ddpg.actor_lr, 5e-4);
        assert_eq!(cfg.ddpg.batch_size, 64);
        assert_eq!(cfg.ddpg.gamma, 0.99);
        assert_eq!(cfg.ddpg.replay_capacity, 50_000);
        assert_eq!(cfg.federation.rounds * cfg.federation.episodes_per_round, 500);
        assert_eq!(cfg.eval.episodes, 20);
    }

    #[test]
    fn overrides_win_and_seed_propagates() {
        let mut cfg = parse("seed = 1\n[paths]\nscenario = \"s.toml\"\n");
        cfg.apply(&Overrides {
            seed: Some(9),
            serial: true,
            rounds: Some(2),
            agents: Some(3),
            episodes: Some(4),
            ..Overrides::default()
        });
        assert_eq!(
            (
                cfg.federation.rounds,
                cfg.federation.agents,
                cfg.federation.episodes_per_round
            ),
            (2, 3, 4)
        );
        assert_eq!((cfg.federation.master_seed, cfg.eval.master_seed), (9, 9));
        assert!(!cfg.federation.parallel && !cfg.eval.parallel);
    }

    #[test]
    fn zero_learning_rate_is_rejected() {
        let cfg = parse("seed = 1\n[paths]\nscenario = \"s.toml\"\n[ddpg]\ncritic_lr = 0.0\n");
        assert!(matches!(cfg.validate(), Err(CliError::Invalid(_))));
    }

    #[test]
    fn gamma_out_of_range_is_rejected() {
        let cfg = parse("seed = 1\n[paths]\nscenario = \"s.toml\"\n[ddpg]\ngamma = 1.5\n");
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("seed = 1\nsead = 2\n[paths]\nscenario = \"s\"\n").is_err());
    }
}
