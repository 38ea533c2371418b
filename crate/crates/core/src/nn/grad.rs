//! Exact backpropagation for the reconstruction and clustering losses.
//!
//! Over a batch `X` of size `m`:
//!
//! ```text
//! L_rec = (1/m) Σ ½‖x − y‖²
//! L_clu = (1/m) Σ ½‖z − B*‖²
//! ```
//!
//! `B*` is held constant. The clustering term reaches the encoder only.

use serde::{Deserialize, Serialize};

use super::Network;
use crate::clustering::ClusterModel;
use crate::error::{Error, Result};

/// Per-layer gradients, shaped like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net.layers().iter().map(|l| vec![0.0; l.weights().len()]).collect(),
            biases: net.layers().iter().map(|l| vec![0.0; l.biases().len()]).collect(),
        }
    }

    fn all(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.biases).flatten()
    }

    pub fn is_finite(&self) -> bool {
        self.all().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.all().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.all().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn matches(&self, net: &Network) -> bool {
        self.weights.len() == net.layers().len()
            && self.biases.len() == net.layers().len()
            && net
                .layers()
                .iter()
                .enumerate()
                .all(|(i, l)| self.weights[i].len() == l.weights().len() && self.biases[i].len() == l.biases().len())
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += scale * y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += scale * y);
        }
    }
}

/// Relative weight of each loss term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub reconstruction: f64,
    pub clustering: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            reconstruction: 1.0,
            clustering: 1.0,
        }
    }
}

impl LossWeights {
    pub const RECONSTRUCTION: LossWeights = LossWeights {
        reconstruction: 1.0,
        clustering: 0.0,
    };
    pub const CLUSTERING: LossWeights = LossWeights {
        reconstruction: 0.0,
        clustering: 1.0,
    };
}

/// Unweighted batch-mean losses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub reconstruction: f64,
    pub clustering: f64,
}

fn check_batch(net: &Network, batch: &[&[f64]]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("gradient batch is empty"));
    }
    for x in batch {
        if x.len() != net.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: net.input_dim(),
                got: x.len(),
            });
        }
    }
    Ok(())
}

/// Gradient of `w_rec * L_rec + w_clu * L_clu` with explicit latent targets.
///
/// `targets` may be `None` only when the clustering weight is zero. Losses are
/// always reported unweighted; a term with zero weight is not evaluated and
/// reads 0.
pub fn abc_gradients(
    net: &Network,
    batch: &[&[f64]],
    targets: Option<&[&[f64]]>,
    weights: LossWeights,
) -> Result<(Gradients, Losses)> {
    check_batch(net, batch)?;
    let use_rec = weights.reconstruction != 0.0;
    let use_clu = weights.clustering != 0.0;
    if use_clu {
        match targets {
            Some(t) if t.len() == batch.len() => {
                if let Some(bad) = t.iter().find(|b| b.len() != net.latent_dim()) {
                    return Err(Error::DimensionMismatch {
                        expected: net.latent_dim(),
                        got: bad.len(),
                    });
                }
            }
            Some(t) => {
                return Err(Error::DimensionMismatch {
                    expected: batch.len(),
                    got: t.len(),
                })
            }
            None => return Err(Error::invalid("clustering loss needs latent targets")),
        }
    }

    let layers = net.layers();
    let n_layers = layers.len();
    let latent = net.encoder_depth();
    let m = batch.len() as f64;
    let mut grads = Gradients::zeros_like(net);
    let mut losses = Losses::default();

    for (n, x) in batch.iter().enumerate() {
        let depth = if use_rec { n_layers } else { latent };
        let acts = net.activations(x, depth);

        // Error signal w.r.t. the output of the current layer.
        let mut top = depth;
        let mut d_out: Vec<f64> = if use_rec {
            let y = &acts[n_layers];
            losses.reconstruction += 0.5 * y.iter().zip(x.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / m;
            y.iter()
                .zip(x.iter())
                .map(|(a, b)| weights.reconstruction * (a - b) / m)
                .collect()
        } else {
            top = latent;
            vec![0.0; net.latent_dim()]
        };

        for l in (0..top).rev() {
            if l + 1 == latent && use_clu {
                let z = &acts[latent];
                let target = targets.expect("checked above")[n];
                losses.clustering += 0.5 * z.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / m;
                for ((d, a), b) in d_out.iter_mut().zip(z).zip(target) {
                    *d += weights.clustering * (a - b) / m;
                }
            }
            let layer = &layers[l];
            let a_out = &acts[l + 1];
            let a_in = &acts[l];
            let delta: Vec<f64> = d_out
                .iter()
                .zip(a_out)
                .map(|(d, a)| d * layer.activation().derivative_from_output(*a))
                .collect();

            let gw = &mut grads.weights[l];
            for (row, dj) in gw.chunks_exact_mut(layer.n_in()).zip(&delta) {
                if *dj != 0.0 {
                    row.iter_mut().zip(a_in).for_each(|(g, a)| *g += dj * a);
                }
            }
            grads.biases[l].iter_mut().zip(&delta).for_each(|(g, d)| *g += d);

            if l > 0 {
                let mut d_in = vec![0.0; layer.n_in()];
                for (row, dj) in layer.weights().chunks_exact(layer.n_in()).zip(&delta) {
                    if *dj != 0.0 {
                        d_in.iter_mut().zip(row).for_each(|(g, w)| *g += dj * w);
                    }
                }
                d_out = d_in;
            }
        }
    }
    Ok((grads, losses))
}

/// Gradient of the batch-mean reconstruction loss.
pub fn grad_reconstruction(net: &Network, batch: &[&[f64]]) -> Result<(Gradients, f64)> {
    let (g, l) = abc_gradients(net, batch, None, LossWeights::RECONSTRUCTION)?;
    Ok((g, l.reconstruction))
}

/// Gradient of the batch-mean clustering loss toward given latent targets.
pub fn grad_with_targets(net: &Network, batch: &[&[f64]], targets: &[&[f64]]) -> Result<(Gradients, f64)> {
    let (g, l) = abc_gradients(net, batch, Some(targets), LossWeights::CLUSTERING)?;
    Ok((g, l.clustering))
}

/// Gradient of the clustering loss with each sample's target taken from `model`.
pub fn grad_clustering(net: &Network, batch: &[&[f64]], model: &ClusterModel) -> Result<(Gradients, f64)> {
    check_batch(net, batch)?;
    let targets = batch
        .iter()
        .map(|x| model.nearest_mean(&net.encode(x)?).map(<[f64]>::to_vec))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    grad_with_targets(net, batch, &refs)
}
