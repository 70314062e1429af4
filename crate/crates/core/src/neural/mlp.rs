use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

/// One dense layer: `weights` is `out × in`, `bias` has length `out`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LayerParams {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        LayerParams {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Dense feed-forward network parameters.
///
/// Flattened order is layer by layer: the row-major weight matrix, then the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<LayerParams>,
    activations: Vec<Activation>,
}

/// Per-layer values recorded by [`MlpParams::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn pre_activations(&self) -> &[Array2<f64>] {
        &self.pre_activations
    }

    pub fn batch_size(&self) -> usize {
        self.output.nrows()
    }
}

/// Parameter gradients, shaped like the network they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layers.iter().map(LayerParams::len).sum());
        for layer in &self.layers {
            out.extend(layer.weights.iter());
            out.extend(layer.bias.iter());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

impl MlpParams {
    /// Random initialisation: weights uniform in `±1/√fan_in`, biases zero.
    pub fn init(layer_sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        check_architecture(layer_sizes, activations)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-bound..=bound));
                LayerParams {
                    weights,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(MlpParams {
            layers,
            activations: activations.to_vec(),
        })
    }

    /// All-zero network with the given architecture.
    pub fn zeros(layer_sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        check_architecture(layer_sizes, activations)?;
        Ok(MlpParams {
            layers: layer_sizes.windows(2).map(|w| LayerParams::zeros(w[0], w[1])).collect(),
            activations: activations.to_vec(),
        })
    }

    pub fn from_layers(layers: Vec<LayerParams>, activations: Vec<Activation>) -> Result<Self> {
        if layers.is_empty() || layers.len() != activations.len() {
            return Err(Error::Shape(format!(
                "{} layers with {} activations",
                layers.len(),
                activations.len()
            )));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Shape(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::Shape(format!("layer {i} bias length {}", l.bias.len())));
            }
        }
        Ok(MlpParams { layers, activations })
    }

    /// Rebuilds a network of the given architecture from a flat vector.
    pub fn from_flat(layer_sizes: &[usize], activations: &[Activation], flat: &[f64]) -> Result<Self> {
        let mut params = Self::zeros(layer_sizes, activations)?;
        params.assign_flat(flat)?;
        Ok(params)
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    /// `[in, hidden..., out]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs())
            .chain(self.layers.iter().map(LayerParams::outputs))
            .collect()
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerParams::len).sum()
    }

    pub fn same_architecture(&self, other: &MlpParams) -> bool {
        self.activations == other.activations && self.layer_sizes() == other.layer_sizes()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend(layer.weights.iter());
            out.extend(layer.bias.iter());
        }
        out
    }

    /// Overwrites every parameter from `flat`, in flatten order.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "flat vector has {} values, network has {} parameters",
                flat.len(),
                self.param_count()
            )));
        }
        let mut values = flat.iter().copied();
        for layer in &mut self.layers {
            for (dst, src) in layer.weights.iter_mut().zip(&mut values) {
                *dst = src;
            }
            for (dst, src) in layer.bias.iter_mut().zip(&mut values) {
                *dst = src;
            }
        }
        Ok(())
    }

    /// Visits every parameter mutably in flatten order.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        let mut idx = 0;
        for layer in &mut self.layers {
            for p in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                f(idx, p);
                idx += 1;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Output only; no cache.
    pub fn predict(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(input.ncols())?;
        if input.nrows() == 1 {
            // Matrix-vector products keep the weights contiguous; much faster for one sample.
            let mut x = input.row(0).to_owned();
            for (layer, act) in self.layers.iter().zip(&self.activations) {
                let mut z = layer.weights.dot(&x);
                z += &layer.bias;
                z.mapv_inplace(|v| act.apply(v));
                x = z;
            }
            let n = x.len();
            return Ok(x.into_shape_with_order((1, n)).expect("one row"));
        }
        let mut x = input.to_owned();
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            let mut z = x.dot(&layer.weights.t());
            z += &layer.bias;
            z.mapv_inplace(|v| act.apply(v));
            x = z;
        }
        Ok(x)
    }

    /// Batched forward pass; rows of `input` are samples.
    pub fn forward(&self, input: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(input.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            let mut z = x.dot(&layer.weights.t());
            z += &layer.bias;
            let y = z.mapv(|v| act.apply(v));
            inputs.push(x);
            pre_activations.push(z);
            x = y;
        }
        let cache = ForwardCache {
            inputs,
            pre_activations,
            output: x.clone(),
        };
        Ok((x, cache))
    }

    /// Reverse-mode pass: given `dL/d(output)`, returns parameter gradients and `dL/d(input)`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_gradient: ArrayView2<'_, f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        if cache.pre_activations.len() != self.layers.len() {
            return Err(Error::Shape("cache was produced by a different network".into()));
        }
        if output_gradient.dim() != cache.output.dim() {
            return Err(Error::Shape(format!(
                "output gradient {:?} does not match output {:?}",
                output_gradient.dim(),
                cache.output.dim()
            )));
        }
        let n = self.layers.len();
        let mut grads: Vec<Option<LayerParams>> = vec![None; n];
        let mut upstream = output_gradient.to_owned();
        for i in (0..n).rev() {
            let act = self.activations[i];
            let z = &cache.pre_activations[i];
            // Output of layer i is the input of layer i + 1, or the cached output.
            let y = if i + 1 < n { &cache.inputs[i + 1] } else { &cache.output };
            let mut delta = upstream;
            if act != Activation::Identity {
                ndarray::Zip::from(&mut delta)
                    .and(z)
                    .and(y)
                    .for_each(|d, &zv, &yv| *d *= act.derivative(zv, yv));
            }
            let weights = delta.t().dot(&cache.inputs[i]);
            let bias = delta.sum_axis(Axis(0));
            upstream = delta.dot(&self.layers[i].weights);
            grads[i] = Some(LayerParams { weights, bias });
        }
        let layers = grads.into_iter().map(|g| g.expect("every layer visited")).collect();
        Ok((Gradients { layers }, upstream))
    }

    fn check_input(&self, width: usize) -> Result<()> {
        if width != self.input_size() {
            return Err(Error::Shape(format!(
                "input width {width}, network expects {}",
                self.input_size()
            )));
        }
        Ok(())
    }
}

fn check_architecture(layer_sizes: &[usize], activations: &[Activation]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::Shape(format!(
            "need at least 2 layer sizes, got {}",
            layer_sizes.len()
        )));
    }
    if activations.len() != layer_sizes.len() - 1 {
        return Err(Error::Shape(format!(
            "{} dense layers but {} activations",
            layer_sizes.len() - 1,
            activations.len()
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Shape("layer size 0".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    const ACTOR: [Activation; 3] = [Activation::Relu, Activation::Relu, Activation::Tanh];

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = MlpParams::init(&[6, 400, 300, 1], &ACTOR, 11).unwrap();
        let b = MlpParams::init(&[6, 400, 300, 1], &ACTOR, 11).unwrap();
        let c = MlpParams::init(&[6, 400, 300, 1], &ACTOR, 12).unwrap();
        assert_eq!(a.flatten(), b.flatten());
        assert_ne!(a.flatten(), c.flatten());
    }

    #[test]
    fn init_respects_fan_in_bound_and_zero_bias() {
        let p = MlpParams::init(&[2, 3], &[Activation::Identity], 5).unwrap();
        assert_eq!(p.layers()[0].bias, array![0.0, 0.0, 0.0]);
        let bound = 1.0 / 2f64.sqrt();
        assert!(p.layers()[0].weights.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn actor_parameter_count() {
        let p = MlpParams::init(&[6, 400, 300, 1], &ACTOR, 0).unwrap();
        assert_eq!(p.param_count(), 6 * 400 + 400 + 400 * 300 + 300 + 300 + 1);
        assert_eq!(p.param_count(), 123_401);
        assert_eq!(p.flatten().len(), 123_401);
    }

    #[test]
    fn init_rejects_bad_architecture() {
        assert!(MlpParams::init(&[6], &[], 0).is_err());
        assert!(MlpParams::init(&[6, 4, 1], &[Activation::Relu], 0).is_err());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = MlpParams::zeros(&[3, 4, 2], &[Activation::Identity; 2]).unwrap();
        let out = p.predict(array![[1.0, -2.0, 3.0]].view()).unwrap();
        assert_eq!(out, array![[0.0, 0.0]]);
    }

    #[test]
    fn single_affine_layer() {
        let layer = LayerParams {
            weights: array![[2.0]],
            bias: array![1.0],
        };
        let p = MlpParams::from_layers(vec![layer], vec![Activation::Identity]).unwrap();
        assert_eq!(p.predict(array![[3.0]].view()).unwrap(), array![[7.0]]);
    }

    #[test]
    fn relu_clips_negative_preactivations() {
        let layer = LayerParams {
            weights: array![[1.0], [1.0]],
            bias: array![-2.0, 1.0],
        };
        let p = MlpParams::from_layers(vec![layer], vec![Activation::Relu]).unwrap();
        assert_eq!(p.predict(array![[1.0]].view()).unwrap(), array![[0.0, 2.0]]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = MlpParams::zeros(&[3, 1], &[Activation::Identity]).unwrap();
        assert!(p.forward(array![[1.0, 2.0]].view()).is_err());
    }

    #[test]
    fn identity_layer_weight_gradient_is_outer_product() {
        let p = MlpParams::init(&[3, 2], &[Activation::Identity], 4).unwrap();
        let x = array![[1.0, -2.0, 0.5]];
        let g = array![[3.0, -1.0]];
        let (_, cache) = p.forward(x.view()).unwrap();
        let (grads, dx) = p.backward(&cache, g.view()).unwrap();
        assert_eq!(grads.layers[0].weights, g.t().dot(&x));
        assert_eq!(grads.layers[0].bias, array![3.0, -1.0]);
        assert_eq!(dx, g.dot(&p.layers()[0].weights));
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let p = MlpParams::init(&[4, 5, 1], &[Activation::Tanh, Activation::Identity], 9).unwrap();
        let x = array![[0.1, 0.2, -0.3, 0.4], [1.0, 0.0, 0.0, -1.0]];
        let (_, cache) = p.forward(x.view()).unwrap();
        let (grads, dx) = p.backward(&cache, Array2::zeros((2, 1)).view()).unwrap();
        assert!(grads.flatten().iter().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unflatten_rejects_wrong_length() {
        let p = MlpParams::zeros(&[2, 2], &[Activation::Identity]).unwrap();
        assert!(MlpParams::from_flat(&[2, 2], &[Activation::Identity], &[0.0; 5]).is_err());
        assert_eq!(
            MlpParams::from_flat(&[2, 2], &[Activation::Identity], &p.flatten()).unwrap(),
            p
        );
    }
}
