mod common;

use std::sync::{Arc, Mutex};

use common::scenario;
use fddpg_core::ddpg::{DdpgAgent, DdpgConfig};
use fddpg_core::federation::{
    aggregate, run_training, AgentUpdate, Federation, FederationConfig, GlobalModel, Manifest, OptimizerMode,
};
use fddpg_core::neural::Checkpoint;
use fddpg_core::sim::Environment;
use fddpg_core::Error;

fn small_ddpg() -> DdpgConfig {
    DdpgConfig {
        actor_hidden: vec![8],
        critic_hidden: vec![8],
        batch_size: 16,
        replay_capacity: 2000,
        ..DdpgConfig::default()
    }
}

fn short_road() -> Environment {
    let mut cfg = scenario("single_road.toml");
    cfg.max_steps = 20;
    Environment::from_config(cfg).unwrap()
}

fn fed_config(agents: usize, rounds: usize, episodes: usize) -> FederationConfig {
    FederationConfig {
        agents,
        rounds,
        episodes_per_round: episodes,
        master_seed: 42,
        parallel: false,
        ..FederationConfig::default()
    }
}

#[test]
fn default_federation_shape() {
    let c = FederationConfig::default();
    assert_eq!((c.agents, c.rounds, c.episodes_per_round), (10, 5, 100));
    assert_eq!(c.rounds * c.episodes_per_round, 500);
    assert_eq!(c.optimizer, OptimizerMode::Reset);
}

#[test]
fn zero_episodes_is_a_config_error() {
    let err = Federation::new(fed_config(2, 1, 0), small_ddpg(), vec![short_road()])
        .err()
        .unwrap();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn broadcast_overwrites_weights_and_keeps_replay() {
    let mut fed = Federation::new(fed_config(3, 2, 2), small_ddpg(), vec![short_road()]).unwrap();
    let report = fed.run_round().unwrap();
    assert_eq!(report.round, 1);
    assert_eq!(report.agents.len(), 3);
    let global = fed.global().clone();
    for (agent, stats) in fed.agents().iter().zip(&report.agents) {
        assert_eq!(agent.actor().flatten(), global.actor.flatten());
        assert_eq!(agent.critic().flatten(), global.critic.flatten());
        assert_eq!(agent.target_actor(), agent.actor());
        assert_eq!(agent.target_critic(), agent.critic());
        assert_eq!(stats.episodes, 2);
        assert_eq!(agent.replay().len(), 40);
    }
    fed.run_round().unwrap();
    assert!(fed.agents().iter().all(|a| a.replay().len() == 80));
}

#[test]
fn zero_learning_rate_keeps_shared_initial_weights() {
    let ddpg = DdpgConfig {
        actor_lr: 0.0,
        critic_lr: 0.0,
        ..small_ddpg()
    };
    let init = GlobalModel::init(&ddpg, 42).unwrap();
    let (global, _) = run_training(fed_config(3, 1, 4), ddpg, vec![short_road()], None).unwrap();
    assert_eq!(global.actor, init.actor);
    assert_eq!(global.critic, init.critic);
}

#[test]
fn single_agent_round_equals_plain_ddpg() {
    let cfg = fed_config(1, 1, 3);
    let ddpg = small_ddpg();
    let (global, _) = run_training(cfg.clone(), ddpg.clone(), vec![short_road()], None).unwrap();
    let init = GlobalModel::init(&ddpg, cfg.master_seed).unwrap();
    let mut alone = DdpgAgent::from_networks(ddpg, init.actor, init.critic).unwrap();
    let mut env = short_road();
    for e in 0..3 {
        alone.train_episode(&mut env, cfg.episode_seed(0, e)).unwrap();
    }
    assert_eq!(global.actor, *alone.actor());
    assert_eq!(global.critic, *alone.critic());
}

#[test]
fn serial_reruns_and_parallel_runs_agree_bitwise() {
    let run = |parallel: bool| {
        let cfg = FederationConfig {
            parallel,
            ..fed_config(3, 2, 2)
        };
        run_training(cfg, small_ddpg(), vec![short_road()], None).unwrap().0
    };
    let a = run(false);
    assert_eq!(a, run(false));
    assert_eq!(a, run(true));
}

#[test]
fn writes_round_checkpoints_reports_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut fed = Federation::new(fed_config(2, 3, 2), small_ddpg(), vec![short_road()]).unwrap();
    let reports = fed.run(Some(dir.path())).unwrap();
    assert_eq!(reports.len(), 3);
    for k in 1..=3 {
        let ckpt = Checkpoint::load(dir.path().join(format!("round_{k}.ckpt"))).unwrap();
        assert_eq!(ckpt.u64("round").unwrap(), k as u64);
        assert_eq!(GlobalModel::from_checkpoint(&ckpt).unwrap().round, k);
    }
    let last = GlobalModel::from_checkpoint(&Checkpoint::load(dir.path().join("round_3.ckpt")).unwrap()).unwrap();
    assert_eq!(&last, fed.global());
    for i in 0..2 {
        DdpgAgent::load(dir.path().join(format!("agent_{i}.ckpt"))).unwrap();
    }
    let manifest = Manifest::load(dir.path().join("manifest.json")).unwrap();
    assert_eq!(manifest.rounds.len(), 3);
    assert_eq!(manifest.config_hash, fed.config_hash());
    assert!(manifest.rounds.iter().all(|r| r.agent_episodes == vec![2, 2]));
    let csv = std::fs::read_to_string(dir.path().join("round_reports.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);

    let again = tempfile::tempdir().unwrap();
    Federation::new(fed_config(2, 3, 2), small_ddpg(), vec![short_road()])
        .unwrap()
        .run(Some(again.path()))
        .unwrap();
    for k in 1..=3 {
        let name = format!("round_{k}.ckpt");
        assert_eq!(
            std::fs::read(dir.path().join(&name)).unwrap(),
            std::fs::read(again.path().join(&name)).unwrap()
        );
    }
    assert_eq!(Manifest::load(again.path().join("manifest.json")).unwrap(), manifest);
}

#[test]
fn aggregation_sees_only_weights_and_counts() {
    let seen: Arc<Mutex<Vec<AgentUpdate>>> = Arc::default();
    let sink = seen.clone();
    let mut fed = Federation::new(fed_config(3, 1, 2), small_ddpg(), vec![short_road()]).unwrap();
    fed.observe_updates(Box::new(move |ups| sink.lock().unwrap().extend_from_slice(ups)));
    fed.run_round().unwrap();
    let ups = seen.lock().unwrap();
    let (actor_len, critic_len) = (fed.global().actor.param_count(), fed.global().critic.param_count());
    assert_eq!(ups.len(), 3);
    for u in ups.iter() {
        let AgentUpdate {
            agent_id: _,
            actor,
            critic,
            episodes,
        } = u;
        assert_eq!((actor.len(), critic.len(), *episodes), (actor_len, critic_len, 2));
    }
    let (a, c) = aggregate(&ups).unwrap();
    assert_eq!(a, fed.global().actor.flatten());
    assert_eq!(c, fed.global().critic.flatten());
}
