use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, MlpParams};
use crate::error::{Error, Result};

/// Adam moment estimates, stored in the network's flatten order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(len: usize) -> Self {
        Self::with_betas(len, Self::BETA1, Self::BETA2, Self::EPS)
    }

    pub fn with_betas(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Clears the moments and the step counter.
    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.t = 0;
    }
}

/// One bias-corrected Adam step, descending along `grads`.
///
/// Non-finite gradients are rejected before anything is modified.
pub fn adam_step(params: &mut MlpParams, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    let n = params.param_count();
    if state.len() != n {
        return Err(Error::Shape(format!(
            "optimizer holds {} moments for {n} parameters",
            state.len()
        )));
    }
    if grads.layers.len() != params.layers().len()
        || grads
            .layers
            .iter()
            .zip(params.layers())
            .any(|(g, p)| g.weights.dim() != p.weights.dim() || g.bias.len() != p.bias.len())
    {
        return Err(Error::Shape("gradient shapes do not match parameters".into()));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }

    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powf(state.t as f64);
    let c2 = 1.0 - b2.powf(state.t as f64);
    let g_iter = grads.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()));
    let mut i = 0;
    let (m, v) = (&mut state.m, &mut state.v);
    let mut g_iter = g_iter;
    params.for_each_param_mut(|_, p| {
        let g = *g_iter.next().expect("shapes checked");
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
        i += 1;
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;
    use crate::neural::{Activation, LayerParams};

    fn scalar_net(w: f64) -> MlpParams {
        MlpParams::from_layers(
            vec![LayerParams {
                weights: array![[w]],
                bias: array![0.0],
            }],
            vec![Activation::Identity],
        )
        .unwrap()
    }

    fn scalar_grad(g: f64) -> Gradients {
        Gradients {
            layers: vec![LayerParams {
                weights: array![[g]],
                bias: array![0.0],
            }],
        }
    }

    #[test]
    fn zero_gradient_leaves_params_and_counts_step() {
        let mut p = scalar_net(1.5);
        let mut s = AdamState::new(2);
        adam_step(&mut p, &scalar_grad(0.0), &mut s, 0.1).unwrap();
        assert_eq!(p.flatten(), vec![1.5, 0.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_betas_reduce_to_sign_step() {
        let mut p = scalar_net(1.0);
        let mut s = AdamState::with_betas(2, 0.0, 0.0, 1e-8);
        adam_step(&mut p, &scalar_grad(-3.0), &mut s, 0.5).unwrap();
        let expected = 1.0 - 0.5 * (-3.0) / (3.0 + 1e-8);
        assert_eq!(p.flatten()[0], expected);
    }

    #[test]
    fn two_steps_match_hand_trace() {
        // g = 2 twice, lr = 0.01, default betas.
        // t=1: m=0.2, v=0.004, m̂=2, v̂=4, Δ = 0.01·2/(2+1e-8)
        // t=2: m=0.38, v=0.007996, m̂=0.38/0.19=2, v̂=0.007996/0.001999=4, same Δ
        let mut p = scalar_net(0.0);
        let mut s = AdamState::new(2);
        adam_step(&mut p, &scalar_grad(2.0), &mut s, 0.01).unwrap();
        adam_step(&mut p, &scalar_grad(2.0), &mut s, 0.01).unwrap();
        let step = 0.01 * 2.0 / (2.0 + 1e-8);
        assert!((p.flatten()[0] - (-2.0 * step)).abs() < 1e-12);
        assert!((s.m[0] - 0.38).abs() < 1e-12);
        assert!((s.v[0] - 0.007996).abs() < 1e-12);
        assert_eq!(s.t, 2);
    }

    #[test]
    fn non_finite_gradient_is_rejected_untouched() {
        let mut p = scalar_net(1.0);
        let mut s = AdamState::new(2);
        let err = adam_step(&mut p, &scalar_grad(f64::NAN), &mut s, 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(p.flatten()[0], 1.0);
        assert_eq!(s.t, 0);
    }
}
