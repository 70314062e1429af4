#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use fddpg_core::ddpg::Transition;
use fddpg_core::neural::{Activation, LayerParams, MlpParams};
use fddpg_core::sim::{Environment, RoadNetwork, ScenarioConfig};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn scenario(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(fixture(name)).unwrap()
}

pub fn environment(name: &str) -> Environment {
    Environment::from_config(scenario(name)).unwrap()
}

pub fn network(name: &str) -> Arc<RoadNetwork> {
    Arc::new(RoadNetwork::load(fixture(name)).unwrap())
}

/// Random small architecture with `inputs` inputs and the given head.
pub fn random_mlp<R: Rng>(rng: &mut R, inputs: usize, head: Activation) -> MlpParams {
    let hidden = rng.random_range(1..=2);
    let mut sizes = vec![inputs];
    let mut acts = Vec::new();
    for _ in 0..hidden {
        sizes.push(rng.random_range(1..=8));
        acts.push([Activation::Relu, Activation::Tanh, Activation::Identity][rng.random_range(0..3)]);
    }
    sizes.push(rng.random_range(1..=3));
    acts.push(head);
    let mut p = MlpParams::init(&sizes, &acts, rng.random()).unwrap();
    // Non-zero biases so every path through the network is exercised.
    p.for_each_param_mut(|_, v| *v += rng.random_range(-0.1..0.1));
    p
}

/// `‖a − b‖ / (‖a‖ + ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        0.0
    } else {
        diff / norm
    }
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, reward: f64) -> Vec<Transition> {
    (0..n)
        .map(|_| Transition {
            state: std::array::from_fn(|_| rng.random_range(-100.0..100.0)),
            action: rng.random_range(-4.5..2.6),
            reward,
            next_state: std::array::from_fn(|_| rng.random_range(-100.0..100.0)),
            done: false,
        })
        .collect()
}

/// Critic computing the piecewise-linear interpolant of `−(u − u*)²` in the unit action `u`,
/// with knots every `step` and one knot exactly at `u*`.
pub fn quadratic_critic(optimum: f64, step: f64) -> MlpParams {
    let f = |u: f64| -(u - optimum).powi(2);
    let first = optimum - (((optimum + 1.5) / step).floor()) * step;
    let knots: Vec<f64> = (0..)
        .map(|j| first + j as f64 * step)
        .take_while(|&t| t < 1.5)
        .collect();
    let slopes: Vec<f64> = knots.windows(2).map(|w| (f(w[1]) - f(w[0])) / step).collect();
    let k = slopes.len();
    let mut hidden = LayerParams::zeros(7, k);
    let mut out = LayerParams::zeros(k, 1);
    for j in 0..k {
        hidden.weights[[j, 6]] = 1.0;
        hidden.bias[j] = -knots[j];
        out.weights[[0, j]] = if j == 0 { slopes[0] } else { slopes[j] - slopes[j - 1] };
    }
    out.bias[0] = f(knots[0]);
    MlpParams::from_layers(vec![hidden, out], vec![Activation::Relu, Activation::Identity]).unwrap()
}

/// Central-difference step.
pub const H: f64 = 1e-6;

/// `L = Σ c ⊙ f(x)` for fixed weights `c`.
pub fn loss(p: &MlpParams, x: &Array2<f64>, c: &Array2<f64>) -> f64 {
    (p.predict(x.view()).unwrap() * c).sum()
}

/// Relative errors of the analytic parameter and input gradients of a random network.
pub fn check_network(rng: &mut ChaCha8Rng, inputs: usize, head: Activation) -> (f64, f64) {
    let p = random_mlp(rng, inputs, head);
    let batch = rng.random_range(1..=5);
    let x = Array2::from_shape_fn((batch, inputs), |_| rng.random_range(-1.5..1.5));
    let c = Array2::from_shape_fn((batch, p.output_size()), |_| rng.random_range(-1.0..1.0));
    let (_, cache) = p.forward(x.view()).unwrap();
    let (grads, input_grad) = p.backward(&cache, c.view()).unwrap();

    let mut numeric = Vec::with_capacity(p.param_count());
    for k in 0..p.param_count() {
        let mut plus = p.clone();
        plus.for_each_param_mut(|i, v| {
            if i == k {
                *v += H
            }
        });
        let mut minus = p.clone();
        minus.for_each_param_mut(|i, v| {
            if i == k {
                *v -= H
            }
        });
        numeric.push((loss(&plus, &x, &c) - loss(&minus, &x, &c)) / (2.0 * H));
    }
    let param_err = relative_error(&grads.flatten(), &numeric);

    let mut numeric_input = Vec::new();
    for idx in 0..x.len() {
        let (r, col) = (idx / inputs, idx % inputs);
        let mut xp = x.clone();
        xp[[r, col]] += H;
        let mut xm = x.clone();
        xm[[r, col]] -= H;
        numeric_input.push((loss(&p, &xp, &c) - loss(&p, &xm, &c)) / (2.0 * H));
    }
    let input_err = relative_error(&input_grad.iter().copied().collect::<Vec<_>>(), &numeric_input);
    (param_err, input_err)
}
