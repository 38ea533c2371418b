//! Dense autoencoder trained with reconstruction and clustering losses.
//!
//! Encoder hidden layers use `tanh` and the latent layer `sigmoid`; the
//! decoder mirrors the schedule (`tanh` hidden, `sigmoid` output). Weights are
//! stored row-major as `out x in`.

mod checkpoint;
mod grad;
mod optim;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use grad::{
    abc_gradients, grad_clustering, grad_reconstruction, grad_with_targets, Gradients, LossWeights, Losses,
};
pub use optim::sgd_momentum_step;

pub const DEFAULT_MOMENTUM: f64 = 0.98;
pub const DEFAULT_LEARNING_RATE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

/// One dense layer with its momentum buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    n_in: usize,
    n_out: usize,
    activation: Activation,
    weights: Vec<f64>,
    biases: Vec<f64>,
    velocity_weights: Vec<f64>,
    velocity_biases: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize, activation: Activation) -> Self {
        Layer {
            n_in,
            n_out,
            activation,
            weights: vec![0.0; n_in * n_out],
            biases: vec![0.0; n_out],
            velocity_weights: vec![0.0; n_in * n_out],
            velocity_biases: vec![0.0; n_out],
        }
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn velocity_weights(&self) -> &[f64] {
        &self.velocity_weights
    }

    pub fn velocity_biases(&self) -> &[f64] {
        &self.velocity_biases
    }

    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.n_in).zip(&self.biases).map(|(row, b)| {
            let pre: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b;
            self.activation.apply(pre)
        }));
    }
}

/// A mirrored autoencoder with an explicit latent layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
    /// Number of encoder layers; the latent code is the output of layer `encoder_depth - 1`.
    encoder_depth: usize,
    learning_rate: f64,
    momentum: f64,
}

/// Builds the mirrored autoencoder for `encoder_sizes` (input first, latent last).
///
/// Weights are drawn from `U[-1/sqrt(fan_in), 1/sqrt(fan_in)]`; biases and
/// velocities start at zero.
pub fn init_network(encoder_sizes: &[usize], seed: u64) -> Result<Network> {
    let mut net = Network::zeros(encoder_sizes)?;
    let mut rng = rng_from_seed(seed);
    for layer in &mut net.layers {
        let bound = 1.0 / (layer.n_in as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.random_range(-bound..=bound);
        }
    }
    Ok(net)
}

impl Network {
    /// An all-zero mirrored network.
    pub fn zeros(encoder_sizes: &[usize]) -> Result<Self> {
        if encoder_sizes.len() < 2 {
            return Err(Error::invalid("an encoder needs at least an input and a latent size"));
        }
        if let Some(bad) = encoder_sizes.iter().find(|s| **s == 0) {
            return Err(Error::invalid(format!("layer sizes must be positive, got {bad}")));
        }
        let mut sizes = encoder_sizes.to_vec();
        sizes.extend(encoder_sizes.iter().rev().skip(1));
        Self::from_sizes(&sizes, encoder_sizes.len() - 1)
    }

    pub(crate) fn from_sizes(sizes: &[usize], encoder_depth: usize) -> Result<Self> {
        let n_layers = sizes.len() - 1;
        if encoder_depth == 0 || encoder_depth >= n_layers {
            return Err(Error::invalid("latent layer must lie strictly inside the network"));
        }
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let act = if l + 1 == encoder_depth || l + 1 == n_layers {
                    Activation::Sigmoid
                } else {
                    Activation::Tanh
                };
                Layer::zeros(w[0], w[1], act)
            })
            .collect();
        Ok(Network {
            layers,
            encoder_depth,
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: DEFAULT_MOMENTUM,
        })
    }

    pub fn with_hyperparameters(mut self, learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::invalid(format!(
                "learning rate must be > 0, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        self.learning_rate = learning_rate;
        self.momentum = momentum;
        Ok(self)
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    /// Full size list, input through reconstruction.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].n_in];
        sizes.extend(self.layers.iter().map(|l| l.n_out));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[self.encoder_depth - 1].n_out
    }

    pub fn encoder_depth(&self) -> usize {
        self.encoder_depth
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers[..self.encoder_depth] {
            layer.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim(),
                got: z.len(),
            });
        }
        let mut cur = z.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers[self.encoder_depth..] {
            layer.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Latent code and reconstruction.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let z = self.encode(x)?;
        let y = self.decode(&z)?;
        Ok((z, y))
    }

    /// All layer outputs, `activations[0]` being the input itself.
    pub(crate) fn activations(&self, x: &[f64], upto: usize) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(upto + 1);
        acts.push(x.to_vec());
        for layer in &self.layers[..upto] {
            let mut out = Vec::with_capacity(layer.n_out);
            layer.forward_into(acts.last().expect("non-empty"), &mut out);
            acts.push(out);
        }
        acts
    }

    /// Deep copy with zeroed momentum, for reusing trained weights on another task.
    pub fn reuse_weights(&self) -> Network {
        let mut copy = self.clone();
        copy.reset_velocities();
        copy
    }

    pub fn reset_velocities(&mut self) {
        for layer in &mut self.layers {
            layer.velocity_weights.iter_mut().for_each(|v| *v = 0.0);
            layer.velocity_biases.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights
                .iter()
                .chain(&l.biases)
                .chain(&l.velocity_weights)
                .chain(&l.velocity_biases)
                .all(|v| v.is_finite())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_bytes() {
        let a = init_network(&[12, 7, 3], 7).unwrap();
        let b = init_network(&[12, 7, 3], 7).unwrap();
        let bits = |n: &Network| -> Vec<u64> {
            n.layers()
                .iter()
                .flat_map(|l| l.weights().iter().map(|w| w.to_bits()))
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&init_network(&[12, 7, 3], 8).unwrap()));
    }

    #[test]
    fn fresh_network_has_zero_velocity_and_bias() {
        let net = init_network(&[10, 6, 2], 1).unwrap();
        for l in net.layers() {
            assert!(l.velocity_weights().iter().all(|v| *v == 0.0));
            assert!(l.velocity_biases().iter().all(|v| *v == 0.0));
            assert!(l.biases().iter().all(|v| *v == 0.0));
            let bound = 1.0 / (l.n_in() as f64).sqrt();
            assert!(l.weights().iter().all(|w| w.abs() <= bound));
        }
    }

    #[test]
    fn paper_shapes() {
        let net = Network::zeros(&[600, 500, 100]).unwrap();
        assert_eq!(net.layer_sizes(), vec![600, 500, 100, 500, 600]);
        let l = net.layers();
        assert_eq!((l[0].n_out(), l[0].n_in()), (500, 600));
        assert_eq!((l[1].n_out(), l[1].n_in()), (100, 500));
        assert_eq!(l[0].weights().len(), 500 * 600);
        assert_eq!(l[1].weights().len(), 100 * 500);
        assert_eq!(net.latent_dim(), 100);
        let acts: Vec<_> = l.iter().map(|l| l.activation()).collect();
        assert_eq!(
            acts,
            vec![
                Activation::Tanh,
                Activation::Sigmoid,
                Activation::Tanh,
                Activation::Sigmoid
            ]
        );
    }

    #[test]
    fn bad_sizes() {
        assert!(init_network(&[10, 0, 2], 1).is_err());
        assert!(init_network(&[10], 1).is_err());
    }

    #[test]
    fn zero_network_latent_is_half() {
        let net = Network::zeros(&[5, 4, 3]).unwrap();
        let z = net.encode(&[0.3, -2.0, 9.0, 0.0, 1.0]).unwrap();
        assert_eq!(z, vec![0.5; 3]);
    }

    #[test]
    fn hand_computed_two_two_one() {
        let mut net = Network::zeros(&[2, 2, 1]).unwrap();
        {
            let l = net.layers_mut();
            l[0].weights_mut().copy_from_slice(&[0.5, -1.0, 2.0, 0.25]);
            l[0].biases_mut().copy_from_slice(&[0.1, -0.2]);
            l[1].weights_mut().copy_from_slice(&[1.5, -0.75]);
            l[1].biases_mut().copy_from_slice(&[0.3]);
        }
        let x = [0.4, 0.8];
        // h1 = tanh(0.5*0.4 - 1.0*0.8 + 0.1) = tanh(-0.5)
        // h2 = tanh(2.0*0.4 + 0.25*0.8 - 0.2) = tanh(0.8)
        let h1 = (-0.5f64).tanh();
        let h2 = 0.8f64.tanh();
        let pre = 1.5 * h1 - 0.75 * h2 + 0.3;
        let want = 1.0 / (1.0 + (-pre).exp());
        let z = net.encode(&x).unwrap();
        assert!((z[0] - want).abs() < 1e-12);
        // Independent numbers: tanh(-0.5) = -0.46211715726000974, tanh(0.8) = 0.6640367702678489.
        let pre_hand: f64 = 1.5 * -0.46211715726000974 - 0.75 * 0.6640367702678489 + 0.3;
        assert!((z[0] - 1.0 / (1.0 + (-pre_hand).exp())).abs() < 1e-12);
    }

    #[test]
    fn latent_is_in_open_unit_interval() {
        let net = init_network(&[20, 10, 4], 3).unwrap();
        for k in 0..20 {
            let x: Vec<f64> = (0..20).map(|i| ((i * k) % 7) as f64 - 3.0).collect();
            let (z, y) = net.forward(&x).unwrap();
            assert!(z.iter().all(|v| *v > 0.0 && *v < 1.0));
            assert_eq!(y.len(), 20);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let net = init_network(&[4, 2], 3).unwrap();
        assert!(net.encode(&[0.0; 3]).is_err());
        assert!(net.decode(&[0.0; 3]).is_err());
    }

    #[test]
    fn reuse_weights_is_a_deep_copy_with_zero_velocity() {
        let mut net = init_network(&[6, 4, 2], 9).unwrap();
        net.layers_mut()[0].velocity_weights[0] = 0.7;
        let copy = net.reuse_weights();
        assert!(copy
            .layers()
            .iter()
            .all(|l| l.velocity_weights().iter().all(|v| *v == 0.0)));
        for (a, b) in net.layers().iter().zip(copy.layers()) {
            assert_eq!(a.weights(), b.weights());
        }
        let mut copy = copy;
        copy.layers_mut()[0].weights_mut()[0] += 1.0;
        assert_ne!(net.layers()[0].weights()[0], copy.layers()[0].weights()[0]);
        assert_eq!(net.layers()[0].velocity_weights[0], 0.7);
    }
}
