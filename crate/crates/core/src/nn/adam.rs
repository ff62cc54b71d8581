use serde::{Deserialize, Serialize};

use super::dense::{DenseNet, Gradients};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled: parameters shrink by `lr * weight_decay` before each update.
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

/// Adam moments for one network, owned by one optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Gradients,
    second_moment: Gradients,
    step_count: u64,
}

impl AdamState {
    pub fn new(net: &DenseNet, config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: net.zero_gradients(),
            second_moment: net.zero_gradients(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One bias-corrected Adam update of `net` in place.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers().len() {
            return Err(Error::DimensionMismatch {
                expected: net.layers().len(),
                actual: grads.layers.len(),
            });
        }
        for (layer, (gw, gb)) in net.layers().iter().zip(&grads.layers) {
            if layer.weights.dim() != gw.dim() || layer.biases.len() != gb.len() {
                return Err(Error::DimensionMismatch {
                    expected: layer.weights.len() + layer.biases.len(),
                    actual: gw.len() + gb.len(),
                });
            }
        }

        self.step_count += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let t = self.step_count as f64;
        let c1 = 1.0 - beta1.powf(t);
        let c2 = 1.0 - beta2.powf(t);
        let decay = 1.0 - lr * weight_decay;

        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p = *p * decay - lr * m_hat / (v_hat.sqrt() + eps);
        };

        for (i, layer) in net.layers_mut().iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[i];
            let (mw, mb) = &mut self.first_moment.layers[i];
            let (vw, vb) = &mut self.second_moment.layers[i];
            ndarray::Zip::from(&mut layer.weights)
                .and(gw)
                .and(mw)
                .and(vw)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.biases)
                .and(gb)
                .and(mb)
                .and(vb)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        Ok(())
    }
}
