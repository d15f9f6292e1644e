use serde::{Deserialize, Serialize};

use crate::diff::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Adam hyper-parameters plus a multistep learning-rate schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Epochs at which the learning rate is multiplied by `gamma`.
    pub milestones: Vec<usize>,
    pub gamma: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            milestones: vec![60, 120, 180, 400],
            gamma: 0.5,
        }
    }
}

impl AdamConfig {
    /// Constant learning rate, no schedule.
    pub fn constant(lr: f64) -> Self {
        Self {
            lr,
            milestones: Vec::new(),
            ..Self::default()
        }
    }

    /// `lr * gamma^(milestones reached by epoch)`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let passed = self.milestones.iter().filter(|&&m| epoch >= m).count();
        self.lr * self.gamma.powi(passed as i32)
    }
}

#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    m: Gradients<T>,
    v: Gradients<T>,
}

impl<T: Real> AdamState<T> {
    pub fn new(net: &Mlp<T>, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn first_moment(&self) -> &Gradients<T> {
        &self.m
    }

    pub fn second_moment(&self) -> &Gradients<T> {
        &self.v
    }
}

/// One bias-corrected Adam update at the learning rate scheduled for `epoch`.
pub fn adam_step<T: Real>(net: &mut Mlp<T>, grads: &Gradients<T>, state: &mut AdamState<T>, epoch: usize) -> Result<()> {
    let shapes_match = net.layers().len() == grads.layers.len()
        && state.m.layers.len() == grads.layers.len()
        && net
            .layers()
            .iter()
            .zip(&grads.layers)
            .zip(&state.m.layers)
            .all(|((l, (gw, gb)), (mw, _))| {
                l.weight.raw_dim() == gw.raw_dim() && l.bias.raw_dim() == gb.raw_dim() && mw.raw_dim() == gw.raw_dim()
            });
    if !shapes_match {
        return Err(Error::invalid("gradient, moment and parameter shapes disagree"));
    }
    state.step += 1;
    let c = &state.config;
    let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
    let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
    let t = state.step as i32;
    let bc1 = T::of(1.0 - c.beta1.powi(t));
    let bc2 = T::of(1.0 - c.beta2.powi(t));
    let lr = T::of(c.lr_at(epoch));
    let eps = T::of(c.eps);

    let update = |p: &mut T, g: T, m: &mut T, v: &mut T| {
        *m = b1 * *m + one_b1 * g;
        *v = b2 * *v + one_b2 * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };

    for ((layer, (gw, gb)), ((mw, mb), (vw, vb))) in net
        .layers_mut()
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.m.layers.iter_mut().zip(state.v.layers.iter_mut()))
    {
        ndarray::Zip::from(&mut layer.weight)
            .and(gw)
            .and(mw)
            .and(vw)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        ndarray::Zip::from(&mut layer.bias)
            .and(gb)
            .and(mb)
            .and(vb)
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
    Ok(())
}
