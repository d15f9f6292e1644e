use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_NET_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Relu,
    Tanh,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::None => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::None),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }

    fn apply<T: Real>(self, x: &mut Array2<T>) {
        match self {
            Activation::None => {}
            Activation::Relu => x.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() }),
            Activation::Tanh => x.mapv_inplace(|v| v.tanh()),
        }
    }

    /// Multiplies `grad` in place by the derivative, expressed through the
    /// activation's output.
    fn backprop<T: Real>(self, output: &Array2<T>, grad: &mut Array2<T>) {
        match self {
            Activation::None => {}
            Activation::Relu => grad.zip_mut_with(output, |g, &o| {
                if o <= T::zero() {
                    *g = T::zero();
                }
            }),
            Activation::Tanh => grad.zip_mut_with(output, |g, &o| *g *= T::one() - o * o),
        }
    }
}

/// Affine layer `y = act(x W + b)` acting on row-vector batches; `weight` is
/// `inputs x outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
}

impl<T: Real> Linear<T> {
    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }
}

/// Shape of one layer: `(inputs, outputs, activation)`.
pub type LayerShape = (usize, usize, Activation);

/// Fully connected network. This is the parameter container for every
/// network in the crate (encoder, decoder, actor, critics).
#[derive(Debug)]
pub struct Mlp<T> {
    layers: Vec<Linear<T>>,
    id: u64,
    generation: u64,
}

impl<T: Clone> Clone for Mlp<T> {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            id: fresh_id(),
            generation: 0,
        }
    }
}

impl<T: Real> PartialEq for Mlp<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Intermediates recorded by [`Mlp::forward`], consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Tape<T> {
    net_id: u64,
    generation: u64,
    input: Array2<T>,
    outputs: Vec<Array2<T>>,
}

impl<T: Real> Tape<T> {
    pub fn output(&self) -> &Array2<T> {
        self.outputs.last().expect("tape of a non-empty network")
    }

    pub fn input(&self) -> &Array2<T> {
        &self.input
    }

    fn layer_input(&self, i: usize) -> &Array2<T> {
        if i == 0 {
            &self.input
        } else {
            &self.outputs[i - 1]
        }
    }
}

/// Parameter gradients, shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<(Array2<T>, Array1<T>)>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.raw_dim())))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn scale(&mut self, factor: T) {
        for (w, b) in &mut self.layers {
            w.mapv_inplace(|v| v * factor);
            b.mapv_inplace(|v| v * factor);
        }
    }

    /// Flattened view in parameter order (weights row-major, then bias, per layer).
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.iter().chain(b.iter()).all(|v| *v == T::zero()))
    }
}

impl<T: Real> Mlp<T> {
    /// Builds a network from explicit layers, checking that dimensions chain.
    pub fn from_layers(layers: Vec<Linear<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::invalid(format!(
                    "layer {i}: bias length {} does not match {} outputs",
                    l.bias.len(),
                    l.outputs()
                )));
            }
            if l.weight.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("layer {i} holds non-finite parameters")));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::invalid(format!(
                    "layer {i} has {} outputs but layer {} expects {} inputs",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        Ok(Self {
            layers,
            id: fresh_id(),
            generation: 0,
        })
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialisation for weights
    /// and biases. `widths` lists every layer boundary, input first.
    pub fn random(widths: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if widths.len() < 2 || activations.len() != widths.len() - 1 {
            return Err(Error::invalid(format!(
                "{} widths need {} activations, got {}",
                widths.len(),
                widths.len().saturating_sub(1),
                activations.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let mut draw = || T::of(rng.random_range(-bound..bound));
                let weight = Array2::from_shape_simple_fn((w[0], w[1]), &mut draw);
                let bias = Array1::from_shape_simple_fn(w[1], &mut draw);
                Linear {
                    weight,
                    bias,
                    activation,
                }
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn zeros(shapes: &[LayerShape]) -> Result<Self> {
        Self::from_layers(
            shapes
                .iter()
                .map(|&(i, o, activation)| Linear {
                    weight: Array2::zeros((i, o)),
                    bias: Array1::zeros(o),
                    activation,
                })
                .collect(),
        )
    }

    pub fn layers(&self) -> &[Linear<T>] {
        &self.layers
    }

    /// Mutable access to the parameters; invalidates outstanding tapes.
    pub fn layers_mut(&mut self) -> &mut [Linear<T>] {
        self.generation += 1;
        &mut self.layers
    }

    pub fn shapes(&self) -> Vec<LayerShape> {
        self.layers
            .iter()
            .map(|l| (l.inputs(), l.outputs(), l.activation))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn params_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    /// Overwrites parameter `index` in [`Mlp::params_flat`] order.
    pub fn set_param(&mut self, mut index: usize, value: T) {
        for l in self.layers_mut() {
            let nw = l.weight.len();
            if index < nw {
                let cols = l.weight.ncols();
                l.weight[(index / cols, index % cols)] = value;
                return;
            }
            index -= nw;
            if index < l.bias.len() {
                l.bias[index] = value;
                return;
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp::from_layers(
            self.layers
                .iter()
                .map(|l| Linear {
                    weight: l.weight.mapv(|v| U::of(v.as_f64())),
                    bias: l.bias.mapv(|v| U::of(v.as_f64())),
                    activation: l.activation,
                })
                .collect(),
        )
        .expect("cast preserves shapes")
    }

    fn check_input(&self, input: &ArrayView2<T>) -> Result<()> {
        if input.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has {} features, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Forward pass over a batch (one sample per row), recording a tape.
    pub fn forward(&self, input: ArrayView2<T>) -> Result<(Array2<T>, Tape<T>)> {
        self.check_input(&input)?;
        let input = input.to_owned();
        let mut outputs: Vec<Array2<T>> = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let x = outputs.last().unwrap_or(&input);
            let mut y = x.dot(&l.weight) + &l.bias;
            l.activation.apply(&mut y);
            outputs.push(y);
        }
        let out = outputs.last().expect("non-empty network").clone();
        Ok((
            out,
            Tape {
                net_id: self.id,
                generation: self.generation,
                input,
                outputs,
            },
        ))
    }

    /// Forward pass without recording intermediates.
    pub fn infer(&self, input: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_input(&input)?;
        let mut x = input.to_owned();
        for l in &self.layers {
            x = x.dot(&l.weight) + &l.bias;
            l.activation.apply(&mut x);
        }
        Ok(x)
    }

    pub fn infer_one(&self, input: &[T]) -> Result<Vec<T>> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Ok(self.infer(view)?.into_raw_vec_and_offset().0)
    }

    /// Reverse pass: returns parameter gradients and the gradient with respect
    /// to the input batch.
    pub fn backward(&self, tape: &Tape<T>, output_grad: ArrayView2<T>) -> Result<(Gradients<T>, Array2<T>)> {
        if tape.net_id != self.id || tape.generation != self.generation {
            return Err(Error::ContractViolation(
                "tape was recorded on a different network or before a parameter update".into(),
            ));
        }
        if output_grad.raw_dim() != tape.output().raw_dim() {
            return Err(Error::invalid(format!(
                "output gradient shape {:?} does not match forward output {:?}",
                output_grad.shape(),
                tape.output().shape()
            )));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut g = output_grad.to_owned();
        for (i, l) in self.layers.iter().enumerate().rev() {
            l.activation.backprop(&tape.outputs[i], &mut g);
            let dw = tape.layer_input(i).t().dot(&g);
            let db = g.sum_axis(Axis(0));
            let dx = g.dot(&l.weight.t());
            layers.push((dw, db));
            g = dx;
        }
        layers.reverse();
        Ok((Gradients { layers }, g))
    }

    /// Polyak averaging `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, online: &Mlp<T>, tau: T) -> Result<()> {
        if self.shapes() != online.shapes() {
            return Err(Error::invalid("soft update between networks of different shapes"));
        }
        let keep = T::one() - tau;
        for (t, o) in self.layers_mut().iter_mut().zip(&online.layers) {
            t.weight.zip_mut_with(&o.weight, |a, &b| *a = tau * b + keep * *a);
            t.bias.zip_mut_with(&o.bias, |a, &b| *a = tau * b + keep * *a);
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}
