use super::{Gradients, Network};
use crate::error::{Error, Result};

/// One momentum update per parameter:
///
/// ```text
/// V_t = ρ V_{t-1} + (1 - ρ) ∂L/∂w
/// w_t = w_{t-1} - η V_t
/// ```
///
/// Non-finite gradients abort the step and leave the network untouched.
pub fn sgd_momentum_step(net: &mut Network, grads: &Gradients, learning_rate: f64, momentum: f64) -> Result<()> {
    if !grads.matches(net) {
        return Err(Error::invalid("gradient shapes do not match the network"));
    }
    if !grads.is_finite() {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::invalid(format!("momentum must lie in [0, 1), got {momentum}")));
    }
    let keep = 1.0 - momentum;
    for (l, layer) in net.layers.iter_mut().enumerate() {
        let update = |params: &mut [f64], vel: &mut [f64], g: &[f64]| {
            for ((w, v), g) in params.iter_mut().zip(vel.iter_mut()).zip(g) {
                *v = momentum * *v + keep * g;
                *w -= learning_rate * *v;
            }
        };
        update(&mut layer.weights, &mut layer.velocity_weights, &grads.weights[l]);
        update(&mut layer.biases, &mut layer.velocity_biases, &grads.biases[l]);
    }
    if !net.is_finite() {
        return Err(Error::Numeric("parameters became non-finite after update".into()));
    }
    Ok(())
}
