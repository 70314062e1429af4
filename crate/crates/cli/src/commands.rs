use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fddpg_core::ddpg::{ActorPolicy, Policy};
use fddpg_core::eval::{evaluate, export_csv, export_json, EvalSummary};
use fddpg_core::federation::Federation;
use fddpg_core::neural::{Checkpoint, Entry, MlpParams};
use fddpg_core::seed::{derive_seed, Stream};
use fddpg_core::sim::{Environment, RoadNetwork, ScenarioConfig};
use log::info;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::error::{io, CliError, Result};

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io(dir))
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let env = cfg.environment()?;
    let mut fed = Federation::new(cfg.federation.clone(), cfg.ddpg.clone(), vec![env])?;
    create_dir(&cfg.out_dir)?;
    let resolved = toml::to_string(cfg).map_err(|e| CliError::Invalid(e.to_string()))?;
    let path = cfg.out_dir.join("run_config.toml");
    std::fs::write(&path, resolved).map_err(io(&path))?;
    info!(
        "training {} agents for {} rounds of {} episodes (config {})",
        cfg.federation.agents,
        cfg.federation.rounds,
        cfg.federation.episodes_per_round,
        fed.config_hash()
    );
    let reports = fed.run(Some(&cfg.out_dir))?;
    for r in &reports {
        let collisions: usize = r.agents.iter().map(|a| a.collisions).sum();
        println!(
            "round {}: mean reward {:.4}, collisions {collisions}",
            r.round,
            r.mean_reward()
        );
    }
    println!("wrote {} checkpoints to {}", reports.len(), cfg.out_dir.display());
    Ok(())
}

/// Policy ids are file stems, or full paths when stems collide.
fn policy_ids(paths: &[PathBuf]) -> Vec<String> {
    let stems: Vec<String> = paths
        .iter()
        .map(|p| {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
        .collect();
    let unique: HashSet<&String> = stems.iter().collect();
    if unique.len() == stems.len() {
        stems
    } else {
        paths.iter().map(|p| p.display().to_string()).collect()
    }
}

pub fn load_policy(path: &Path) -> Result<ActorPolicy> {
    if !path.is_file() {
        return Err(CliError::Missing { path: path.into() });
    }
    Ok(ActorPolicy::from_checkpoint(&Checkpoint::load(path)?)?)
}

pub fn eval(cfg: &RunConfig, checkpoints: &[PathBuf]) -> Result<Vec<EvalSummary>> {
    cfg.validate()?;
    let paths = if checkpoints.is_empty() {
        &cfg.paths.checkpoints
    } else {
        checkpoints
    };
    if paths.is_empty() {
        return Err(CliError::Invalid("no checkpoints to evaluate".into()));
    }
    let (sizes, acts) = (cfg.ddpg.actor_sizes(), cfg.ddpg.actor_activations());
    let mut policies = Vec::with_capacity(paths.len());
    for path in paths {
        let policy = load_policy(path)?;
        if policy.actor().layer_sizes() != sizes || policy.actor().activations() != acts.as_slice() {
            return Err(CliError::Invalid(format!(
                "{}: actor is {:?}, configuration expects {sizes:?}",
                path.display(),
                policy.actor().layer_sizes()
            )));
        }
        policies.push(policy);
    }
    let template = cfg.eval_scenario()?;
    let network = Arc::new(RoadNetwork::load(&template.network)?);
    let mut summaries = Vec::with_capacity(policies.len());
    for (id, policy) in policy_ids(paths).into_iter().zip(&policies) {
        info!("evaluating {id}");
        summaries.push(evaluate(&id, policy, &network, &template, &cfg.eval)?);
    }
    create_dir(&cfg.out_dir)?;
    export_csv(&summaries, cfg.out_dir.join("eval.csv"))?;
    export_json(&summaries, cfg.out_dir.join("eval.json"))?;
    for row in summaries.iter().flat_map(EvalSummary::rows) {
        println!(
            "{} {:>6} m: {}/{} collisions, success {:.2}, delay {}, speed {:.3} m/s",
            row.policy_id,
            row.distance_m,
            row.collisions,
            row.episodes,
            row.success_rate,
            row.mean_travel_delay_s.map_or("n/a".into(), |d| format!("{d:.3} s")),
            row.mean_avg_speed_mps
        );
    }
    Ok(summaries)
}

fn describe_network(name: &str, net: &MlpParams) -> String {
    format!(
        "{name}: layers {:?}, activations {:?}, {} parameters",
        net.layer_sizes(),
        net.activations(),
        net.param_count()
    )
}

pub fn inspect(path: &Path) -> Result<String> {
    if !path.is_file() {
        return Err(CliError::Missing { path: path.into() });
    }
    let ckpt = Checkpoint::load(path)?;
    let mut out = String::new();
    for (name, entry) in ckpt.entries() {
        let line = match entry {
            Entry::Network(net) => describe_network(name, net),
            Entry::Adam(state) => format!("{name}: optimizer state, step {}", state.t),
            Entry::U64(v) => format!("{name}: {v}"),
            Entry::F64(v) => format!("{name}: {v}"),
            Entry::Text(t) if name == "agent_episodes" => {
                let counts: Vec<u64> = serde_json::from_str(t)?;
                format!("{name}: {counts:?} (total {})", counts.iter().sum::<u64>())
            }
            Entry::Text(t) => format!("{name}: {t}"),
        };
        writeln!(out, "{line}").expect("writing to a string");
    }
    Ok(out)
}

/// Scripted constant acceleration or a checkpoint actor.
#[derive(Debug, Clone)]
pub enum SimPolicy {
    Constant(f64),
    Actor(Box<ActorPolicy>),
}

#[derive(Debug, Serialize)]
struct TraceRow {
    step: u32,
    time_s: f64,
    x_m: f64,
    y_m: f64,
    speed_mps: f64,
    accel_mps2: f64,
    action_mps2: f64,
    reward: f64,
    collided: bool,
    reached_destination: bool,
    braking: bool,
    waiting_at_light: bool,
    moving: bool,
    unobstructed: bool,
}

/// Rolls out one episode and writes `trace.csv` into `out_dir`; returns the step count.
pub fn sim_run(scenario: ScenarioConfig, policy: SimPolicy, seed: u64, out_dir: &Path) -> Result<usize> {
    let mut env = Environment::from_config(scenario)?;
    let mut policy = policy;
    let mut obs = env.reset(derive_seed(seed, Stream::SimRun, 0, 0))?;
    let mut rows = Vec::new();
    loop {
        let action = match &mut policy {
            SimPolicy::Constant(a) => *a,
            SimPolicy::Actor(p) => p.act(&obs)?,
        };
        let out = env.step(action)?;
        obs = out.observation;
        rows.push(TraceRow {
            step: env.steps(),
            time_s: env.time_s(),
            x_m: obs.pos_x,
            y_m: obs.pos_y,
            speed_mps: obs.speed,
            accel_mps2: env.ego().acceleration,
            action_mps2: action,
            reward: out.reward,
            collided: out.flags.collided,
            reached_destination: out.flags.reached_destination,
            braking: out.flags.braking,
            waiting_at_light: out.flags.waiting_at_light,
            moving: out.flags.moving,
            unobstructed: out.flags.unobstructed,
        });
        if out.done {
            info!("episode ended after {} steps: {:?}", env.steps(), out.cause);
            break;
        }
    }
    create_dir(out_dir)?;
    let mut w = csv::Writer::from_path(out_dir.join("trace.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush().map_err(io(out_dir.join("trace.csv")))?;
    Ok(rows.len())
}

fn network_json(net: &MlpParams) -> Value {
    let layers: Vec<Value> = net
        .layers()
        .iter()
        .map(|l| {
            let weights: Vec<Vec<f64>> = l.weights.rows().into_iter().map(|r| r.to_vec()).collect();
            json!({ "weights": weights, "bias": l.bias.to_vec() })
        })
        .collect();
    json!({
        "layer_sizes": net.layer_sizes(),
        "activations": net.activations(),
        "layers": layers,
    })
}

/// Writes every network and scalar entry as JSON; optimizer moments are skipped.
pub fn export(path: &Path, out_dir: &Path) -> Result<PathBuf> {
    if !path.is_file() {
        return Err(CliError::Missing { path: path.into() });
    }
    let ckpt = Checkpoint::load(path)?;
    let mut doc = Map::new();
    for (name, entry) in ckpt.entries() {
        let value = match entry {
            Entry::Network(net) => network_json(net),
            Entry::Adam(_) => continue,
            Entry::U64(v) => json!(v),
            Entry::F64(v) => json!(v),
            Entry::Text(t) => serde_json::from_str(t).unwrap_or_else(|_| json!(t)),
        };
        doc.insert(name.to_string(), value);
    }
    create_dir(out_dir)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "checkpoint".into());
    let target = out_dir.join(format!("{stem}.json"));
    std::fs::write(&target, serde_json::to_string_pretty(&Value::Object(doc))?).map_err(io(&target))?;
    Ok(target)
}
