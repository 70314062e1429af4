use std::f64::consts::PI;
use std::path::Path;

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::noise::OuNoiseState;
use super::replay::{ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::eval::{average_speed, travel_delay, EpisodeTrace};
use crate::neural::{adam_step, Activation, AdamState, Checkpoint, Entry, Gradients, MlpParams};
use crate::seed::splitmix64;
use crate::sim::{EgoObservation, Environment, TerminationCause};

const STATE_DIM: usize = EgoObservation::DIM;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub ou_mean: f64,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub ou_dt: f64,
    pub action_min_mps2: f64,
    pub action_max_mps2: f64,
    /// Divisors applied to (x, y, speed, heading, acceleration, destination distance).
    pub observation_scale: [f64; STATE_DIM],
}

impl Default for DdpgConfig {
    fn default() -> Self {
        DdpgConfig {
            actor_hidden: vec![400, 300],
            critic_hidden: vec![400, 300],
            actor_lr: 5e-4,
            critic_lr: 5e-4,
            gamma: 0.99,
            tau: 0.005,
            batch_size: 64,
            replay_capacity: ReplayBuffer::DEFAULT_CAPACITY,
            ou_mean: 0.0,
            ou_theta: 0.15,
            ou_sigma: 0.2,
            ou_dt: 1.0,
            action_min_mps2: -4.5,
            action_max_mps2: 2.6,
            observation_scale: [100.0, 100.0, 20.0, PI, 5.0, 100.0],
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau must lie in [0, 1], got {}", self.tau));
        }
        if !(self.actor_lr >= 0.0 && self.critic_lr >= 0.0 && self.actor_lr.is_finite() && self.critic_lr.is_finite()) {
            return bad("learning rates must be finite and non-negative".into());
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad(format!(
                "need 1 <= batch_size <= replay_capacity, got {} and {}",
                self.batch_size, self.replay_capacity
            ));
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        // Written so that NaN bounds fail as well.
        if self.action_min_mps2.partial_cmp(&self.action_max_mps2) != Some(std::cmp::Ordering::Less) {
            return bad("action_min_mps2 must be below action_max_mps2".into());
        }
        if self.observation_scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad("observation_scale entries must be positive".into());
        }
        self.noise().validate()
    }

    pub fn bounds(&self) -> ActionBounds {
        ActionBounds {
            min: self.action_min_mps2,
            max: self.action_max_mps2,
        }
    }

    pub fn noise(&self) -> OuNoiseState {
        OuNoiseState {
            x: self.ou_mean,
            mean: self.ou_mean,
            theta: self.ou_theta,
            sigma: self.ou_sigma,
            dt: self.ou_dt,
        }
    }

    pub fn actor_sizes(&self) -> Vec<usize> {
        sizes(STATE_DIM, &self.actor_hidden)
    }

    pub fn critic_sizes(&self) -> Vec<usize> {
        sizes(STATE_DIM + 1, &self.critic_hidden)
    }

    pub fn actor_activations(&self) -> Vec<Activation> {
        activations(self.actor_hidden.len(), Activation::Tanh)
    }

    pub fn critic_activations(&self) -> Vec<Activation> {
        activations(self.critic_hidden.len(), Activation::Identity)
    }

    pub fn init_actor(&self, seed: u64) -> Result<MlpParams> {
        MlpParams::init(&self.actor_sizes(), &self.actor_activations(), seed)
    }

    pub fn init_critic(&self, seed: u64) -> Result<MlpParams> {
        MlpParams::init(&self.critic_sizes(), &self.critic_activations(), seed)
    }

    fn scale(&self, obs: &[f64; STATE_DIM]) -> [f64; STATE_DIM] {
        std::array::from_fn(|i| obs[i] / self.observation_scale[i])
    }
}

fn sizes(input: usize, hidden: &[usize]) -> Vec<usize> {
    std::iter::once(input)
        .chain(hidden.iter().copied())
        .chain([1])
        .collect()
}

fn activations(hidden: usize, head: Activation) -> Vec<Activation> {
    std::iter::repeat_n(Activation::Relu, hidden).chain([head]).collect()
}

/// Affine map between the actor's tanh range [-1, 1] and physical acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionBounds {
    pub min: f64,
    pub max: f64,
}

impl ActionBounds {
    pub fn to_physical(&self, unit: f64) -> f64 {
        0.5 * (self.max + self.min) + 0.5 * (self.max - self.min) * unit
    }

    pub fn to_unit(&self, accel: f64) -> f64 {
        (2.0 * accel - (self.max + self.min)) / (self.max - self.min)
    }
}

/// Anything that maps an observation to an acceleration.
pub trait Policy {
    fn act(&mut self, obs: &EgoObservation) -> Result<f64>;
}

impl<F: FnMut(&EgoObservation) -> f64> Policy for F {
    fn act(&mut self, obs: &EgoObservation) -> Result<f64> {
        Ok(self(obs))
    }
}

/// A frozen actor, used for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorPolicy {
    actor: MlpParams,
    config: DdpgConfig,
}

impl ActorPolicy {
    pub fn new(actor: MlpParams, config: DdpgConfig) -> Result<Self> {
        check_actor(&actor)?;
        Ok(ActorPolicy { actor, config })
    }

    /// Reads the `actor` network and its hyperparameter block from an agent or global checkpoint.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let config = serde_json::from_str(ckpt.text("ddpg_config")?)?;
        Self::new(ckpt.network("actor")?.clone(), config)
    }

    pub fn actor(&self) -> &MlpParams {
        &self.actor
    }
}

impl Policy for ActorPolicy {
    fn act(&mut self, obs: &EgoObservation) -> Result<f64> {
        Ok(self
            .config
            .bounds()
            .to_physical(actor_unit(&self.actor, &self.config, obs)?))
    }
}

fn actor_unit(actor: &MlpParams, config: &DdpgConfig, obs: &EgoObservation) -> Result<f64> {
    let input =
        Array2::from_shape_vec((1, STATE_DIM), config.scale(&obs.to_array()).to_vec()).expect("one row of state width");
    let u = actor.predict(input.view())?[[0, 0]];
    if !u.is_finite() {
        return Err(Error::NonFinite("actor output"));
    }
    Ok(u)
}

fn check_actor(actor: &MlpParams) -> Result<()> {
    if actor.input_size() != STATE_DIM || actor.output_size() != 1 {
        return Err(Error::Shape(format!(
            "actor must map {STATE_DIM} inputs to 1 output, got {:?}",
            actor.layer_sizes()
        )));
    }
    Ok(())
}

fn check_critic(critic: &MlpParams) -> Result<()> {
    if critic.input_size() != STATE_DIM + 1 || critic.output_size() != 1 {
        return Err(Error::Shape(format!(
            "critic must map {} inputs to 1 output, got {:?}",
            STATE_DIM + 1,
            critic.layer_sizes()
        )));
    }
    Ok(())
}

/// `target ← τ·source + (1 − τ)·target`, elementwise.
pub fn soft_update(target: &mut MlpParams, source: &MlpParams, tau: f64) -> Result<()> {
    if !target.same_architecture(source) {
        return Err(Error::Shape("soft update between different architectures".into()));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Config(format!("tau must lie in [0, 1], got {tau}")));
    }
    for (t, s) in target.layers_mut().iter_mut().zip(source.layers()) {
        t.weights
            .zip_mut_with(&s.weights, |t, &s| *t = tau * s + (1.0 - tau) * *t);
        t.bias.zip_mut_with(&s.bias, |t, &s| *t = tau * s + (1.0 - tau) * *t);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub total_reward: f64,
    pub steps: usize,
    pub collided: bool,
    pub reached: bool,
    pub travel_delay_s: f64,
    pub delay_incomplete: bool,
    pub average_speed_mps: f64,
}

impl EpisodeMetrics {
    pub fn from_trace(trace: &EpisodeTrace) -> Self {
        let delay = travel_delay(trace);
        EpisodeMetrics {
            total_reward: trace.total_reward(),
            steps: trace.steps(),
            collided: trace.cause == TerminationCause::Collision,
            reached: trace.cause == TerminationCause::Destination,
            travel_delay_s: delay.seconds,
            delay_incomplete: delay.incomplete,
            average_speed_mps: average_speed(trace),
        }
    }

    pub fn timed_out(&self) -> bool {
        !self.collided && !self.reached
    }
}

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    config: DdpgConfig,
    actor: MlpParams,
    critic: MlpParams,
    target_actor: MlpParams,
    target_critic: MlpParams,
    actor_opt: AdamState,
    critic_opt: AdamState,
    replay: ReplayBuffer,
    noise: OuNoiseState,
    episodes: u64,
    updates: u64,
}

impl DdpgAgent {
    /// Fresh agent with networks drawn from `seed`.
    pub fn new(config: DdpgConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let actor = config.init_actor(seed)?;
        let critic = config.init_critic(splitmix64(seed))?;
        Self::from_networks(config, actor, critic)
    }

    /// Agent starting from given online networks; targets are copies.
    pub fn from_networks(config: DdpgConfig, actor: MlpParams, critic: MlpParams) -> Result<Self> {
        config.validate()?;
        check_actor(&actor)?;
        check_critic(&critic)?;
        Ok(DdpgAgent {
            actor_opt: AdamState::new(actor.param_count()),
            critic_opt: AdamState::new(critic.param_count()),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            replay: ReplayBuffer::new(config.replay_capacity)?,
            noise: config.noise(),
            episodes: 0,
            updates: 0,
            config,
        })
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.config
    }

    pub fn actor(&self) -> &MlpParams {
        &self.actor
    }

    pub fn critic(&self) -> &MlpParams {
        &self.critic
    }

    pub fn target_actor(&self) -> &MlpParams {
        &self.target_actor
    }

    pub fn target_critic(&self) -> &MlpParams {
        &self.target_critic
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn replay_mut(&mut self) -> &mut ReplayBuffer {
        &mut self.replay
    }

    pub fn noise(&self) -> &OuNoiseState {
        &self.noise
    }

    pub fn noise_mut(&mut self) -> &mut OuNoiseState {
        &mut self.noise
    }

    /// Episodes trained since construction or the last [`reset_episode_count`](Self::reset_episode_count).
    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn reset_episode_count(&mut self) {
        self.episodes = 0;
    }

    /// Gradient steps taken so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn policy(&self) -> ActorPolicy {
        ActorPolicy {
            actor: self.actor.clone(),
            config: self.config.clone(),
        }
    }

    /// Overwrites online networks and re-syncs both targets to them. Replay is kept.
    pub fn load_weights(&mut self, actor: &MlpParams, critic: &MlpParams, reset_optimizers: bool) -> Result<()> {
        if !actor.same_architecture(&self.actor) || !critic.same_architecture(&self.critic) {
            return Err(Error::Shape(
                "broadcast weights do not match the agent architecture".into(),
            ));
        }
        self.actor.clone_from(actor);
        self.critic.clone_from(critic);
        self.target_actor.clone_from(actor);
        self.target_critic.clone_from(critic);
        if reset_optimizers {
            self.actor_opt.reset();
            self.critic_opt.reset();
        }
        Ok(())
    }

    /// Actor output mapped to m/s²; with `explore`, OU noise is added in unit range and clipped.
    pub fn select_action<R: rand::Rng + ?Sized>(
        &mut self,
        obs: &EgoObservation,
        explore: bool,
        rng: &mut R,
    ) -> Result<f64> {
        let mut u = actor_unit(&self.actor, &self.config, obs)?;
        if explore {
            u = (u + self.noise.sample(rng)).clamp(-1.0, 1.0);
        }
        Ok(self.config.bounds().to_physical(u))
    }

    fn states(&self, batch: &[Transition], next: bool) -> Array2<f64> {
        let mut out = Array2::zeros((batch.len(), STATE_DIM));
        for (mut row, t) in out.rows_mut().into_iter().zip(batch) {
            let scaled = self.config.scale(if next { &t.next_state } else { &t.state });
            row.assign(&ndarray::ArrayView1::from(&scaled));
        }
        out
    }

    fn critic_input(states: &Array2<f64>, units: &Array2<f64>) -> Array2<f64> {
        concatenate![Axis(1), *states, *units]
    }

    /// `y = r + γ·(1 − done)·Q'(s', μ'(s'))` for each transition.
    pub fn critic_targets(&self, batch: &[Transition]) -> Result<Array1<f64>> {
        let next = self.states(batch, true);
        let next_units = self.target_actor.predict(next.view())?;
        let next_q = self
            .target_critic
            .predict(Self::critic_input(&next, &next_units).view())?;
        Ok(batch
            .iter()
            .zip(next_q.column(0))
            .map(|(t, &q)| t.reward + if t.done { 0.0 } else { self.config.gamma * q })
            .collect())
    }

    /// One Adam step on the critic's mean squared Bellman error; returns the loss before the step.
    pub fn critic_update(&mut self, batch: &[Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        let targets = self.critic_targets(batch)?;
        let bounds = self.config.bounds();
        let units = Array2::from_shape_fn((batch.len(), 1), |(i, _)| bounds.to_unit(batch[i].action));
        let input = Self::critic_input(&self.states(batch, false), &units);
        let (q, cache) = self.critic.forward(input.view())?;
        let n = batch.len() as f64;
        let residual = &q.column(0) - &targets;
        let loss = residual.mapv(|r| r * r).sum() / n;
        if !loss.is_finite() {
            return Err(Error::NonFinite("critic loss"));
        }
        let grad_out = residual.mapv(|r| 2.0 * r / n).insert_axis(Axis(1));
        let (grads, _) = self.critic.backward(&cache, grad_out.view())?;
        adam_step(&mut self.critic, &grads, &mut self.critic_opt, self.config.critic_lr)?;
        Ok(loss)
    }

    /// Mean `Q(s, μ(s))` over the batch and its gradient with respect to the actor parameters.
    pub fn policy_gradient(&self, batch: &[Transition]) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        let states = self.states(batch, false);
        let (units, actor_cache) = self.actor.forward(states.view())?;
        let (q, critic_cache) = self.critic.forward(Self::critic_input(&states, &units).view())?;
        let n = batch.len() as f64;
        let objective = q.sum() / n;
        let dq = Array2::from_elem((batch.len(), 1), 1.0 / n);
        let (_, input_grad) = self.critic.backward(&critic_cache, dq.view())?;
        let action_grad = input_grad.slice(s![.., STATE_DIM..]);
        let (grads, _) = self.actor.backward(&actor_cache, action_grad)?;
        if !objective.is_finite() || !grads.is_finite() {
            return Err(Error::NonFinite("policy gradient"));
        }
        Ok((objective, grads))
    }

    /// One Adam ascent step along the deterministic policy gradient; returns the objective before the step.
    pub fn actor_update(&mut self, batch: &[Transition]) -> Result<f64> {
        let (objective, mut grads) = self.policy_gradient(batch)?;
        for layer in &mut grads.layers {
            layer.weights.mapv_inplace(|g| -g);
            layer.bias.mapv_inplace(|g| -g);
        }
        adam_step(&mut self.actor, &grads, &mut self.actor_opt, self.config.actor_lr)?;
        Ok(objective)
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        soft_update(&mut self.target_actor, &self.actor, self.config.tau)?;
        soft_update(&mut self.target_critic, &self.critic, self.config.tau)
    }

    /// Critic, actor and target updates from one sampled batch, once the buffer holds a batch.
    pub fn learn<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool> {
        if self.replay.len() < self.config.batch_size {
            return Ok(false);
        }
        let batch = self.replay.sample(self.config.batch_size, rng)?;
        self.critic_update(&batch)?;
        self.actor_update(&batch)?;
        self.soft_update_targets()?;
        self.updates += 1;
        Ok(true)
    }

    /// One exploring episode with a learning step after every environment step.
    pub fn train_episode(&mut self, env: &mut Environment, seed: u64) -> Result<EpisodeMetrics> {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
        let mut obs = env.reset(seed)?;
        self.noise.reset();
        let mut trace = EpisodeTrace::new(env.config().step_length_s);
        loop {
            let action = self.select_action(&obs, true, &mut rng)?;
            let out = env.step(action)?;
            trace.push(env, action, &out);
            let transition = Transition {
                state: obs.to_array(),
                action,
                reward: out.reward,
                next_state: out.observation.to_array(),
                done: matches!(out.cause, TerminationCause::Collision | TerminationCause::Destination),
            };
            if !transition.is_finite() {
                return Err(Error::NonFinite("transition"));
            }
            self.replay.store(transition);
            self.learn(&mut rng)?;
            obs = out.observation;
            if out.done {
                break;
            }
        }
        self.episodes += 1;
        Ok(EpisodeMetrics::from_trace(&trace))
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ckpt = Checkpoint::new();
        ckpt.insert("kind", Entry::Text("agent".into()))
            .insert("ddpg_config", Entry::Text(serde_json::to_string(&self.config)?))
            .insert("actor", Entry::Network(self.actor.clone()))
            .insert("critic", Entry::Network(self.critic.clone()))
            .insert("target_actor", Entry::Network(self.target_actor.clone()))
            .insert("target_critic", Entry::Network(self.target_critic.clone()))
            .insert("actor_adam", Entry::Adam(self.actor_opt.clone()))
            .insert("critic_adam", Entry::Adam(self.critic_opt.clone()))
            .insert("episodes", Entry::U64(self.episodes))
            .insert("updates", Entry::U64(self.updates));
        Ok(ckpt)
    }

    /// Restores networks, optimizer state and counters; the replay buffer starts empty.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let config: DdpgConfig = serde_json::from_str(ckpt.text("ddpg_config")?)?;
        let mut agent = Self::from_networks(config, ckpt.network("actor")?.clone(), ckpt.network("critic")?.clone())?;
        let target_actor = ckpt.network("target_actor")?;
        let target_critic = ckpt.network("target_critic")?;
        let actor_opt = ckpt.adam("actor_adam")?;
        let critic_opt = ckpt.adam("critic_adam")?;
        if !target_actor.same_architecture(&agent.actor)
            || !target_critic.same_architecture(&agent.critic)
            || actor_opt.len() != agent.actor.param_count()
            || critic_opt.len() != agent.critic.param_count()
        {
            return Err(Error::Checkpoint("agent checkpoint entries disagree in shape".into()));
        }
        agent.target_actor = target_actor.clone();
        agent.target_critic = target_critic.clone();
        agent.actor_opt = actor_opt.clone();
        agent.critic_opt = critic_opt.clone();
        agent.episodes = ckpt.u64("episodes")?;
        agent.updates = ckpt.u64("updates")?;
        Ok(agent)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}
