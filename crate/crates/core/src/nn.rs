//! Feedforward networks trained with mini-batch Adam.
//!
//! Each layer computes `f(W a + b)` with `W` stored `out × in`. Hidden layers
//! share one activation; the output layer has a single unit.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::hyperopt::Hyperparameters;
use crate::rng;
use crate::{Error, Result, Scalar};

/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` inside cross entropy.
pub const PROBABILITY_CLAMP: f64 = 1e-12;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }

    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Sigmoid => {
                if z >= T::zero() {
                    T::one() / (T::one() + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (T::one() + e)
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative given the pre-activation `z` and the output `a = f(z)`.
    /// The ReLU subgradient at zero is zero.
    pub fn derivative<T: Scalar>(self, z: T, a: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => a * (T::one() - a),
            Activation::Identity => T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    Mse,
}

fn clamp_probability<T: Scalar>(p: T) -> T {
    let c = T::of(PROBABILITY_CLAMP);
    p.max(c).min(T::one() - c)
}

/// Per-sample loss. Cross entropy clamps `p` away from 0 and 1.
pub fn loss<T: Scalar>(kind: LossKind, prediction: T, target: T) -> T {
    match kind {
        LossKind::CrossEntropy => {
            let p = clamp_probability(prediction);
            -(target * p.ln() + (T::one() - target) * (T::one() - p).ln())
        }
        LossKind::Mse => (prediction - target) * (prediction - target),
    }
}

/// Derivative of [`loss`] with respect to the prediction.
pub fn grad_loss<T: Scalar>(kind: LossKind, prediction: T, target: T) -> T {
    match kind {
        LossKind::CrossEntropy => {
            let p = clamp_probability(prediction);
            -target / p + (T::one() - target) / (T::one() - p)
        }
        LossKind::Mse => T::of(2.0) * (prediction - target),
    }
}

/// Mean loss over a batch.
pub fn batch_loss<T: Scalar>(kind: LossKind, predictions: &[T], targets: &[T]) -> T {
    let n = T::of(predictions.len().max(1) as f64);
    predictions
        .iter()
        .zip(targets)
        .map(|(&p, &y)| loss(kind, p, y))
        .sum::<T>()
        / n
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
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

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Gradient of the mean batch loss, shaped like the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn to_flat(&self) -> Vec<T> {
        flatten(&self.layers)
    }

    pub fn max_abs(&self) -> T {
        self.to_flat()
            .into_iter()
            .fold(T::zero(), |m, g| m.max(g.abs()))
    }
}

fn flatten<T: Scalar>(layers: &[Dense<T>]) -> Vec<T> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.weights.iter().copied());
        out.extend(l.bias.iter().copied());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    layers: Vec<Dense<T>>,
    hidden: Activation,
    output: Activation,
}

impl<T: Scalar> Network<T> {
    /// All-zero network with the given layer sizes (input first, output last).
    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer sizes {sizes:?}")));
        }
        if *sizes.last().unwrap() != 1 {
            return Err(Error::InvalidArgument(
                "the output layer has one unit".into(),
            ));
        }
        Ok(Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            hidden,
            output,
        })
    }

    /// Weights uniform on `±sqrt(6 / fan_in)`, biases zero.
    pub fn init(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut rng::Rng,
    ) -> Result<Self> {
        let mut net = Self::zeros(sizes, hidden, output)?;
        for layer in &mut net.layers {
            let limit = (6.0 / layer.inputs() as f64).sqrt();
            layer
                .weights
                .iter_mut()
                .for_each(|w| *w = T::of(rng.random_range(-limit..limit)));
        }
        Ok(net)
    }

    pub fn from_layers(
        layers: Vec<Dense<T>>,
        hidden: Activation,
        output: Activation,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument(
                "network needs at least one layer".into(),
            ));
        }
        for w in layers.windows(2) {
            if w[0].outputs() != w[1].inputs() {
                return Err(Error::Dimension {
                    expected: w[0].outputs(),
                    found: w[1].inputs(),
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.outputs() {
                return Err(Error::Dimension {
                    expected: l.outputs(),
                    found: l.bias.len(),
                });
            }
        }
        if layers.last().unwrap().outputs() != 1 {
            return Err(Error::InvalidArgument(
                "the output layer has one unit".into(),
            ));
        }
        Ok(Self {
            layers,
            hidden,
            output,
        })
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(Dense::outputs));
        s
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn params(&self) -> Vec<T> {
        flatten(&self.layers)
    }

    pub fn set_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                found: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weights
                .iter_mut()
                .chain(l.bias.iter_mut())
                .for_each(|p| *p = it.next().unwrap());
        }
        Ok(())
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<T> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let mut a = Array1::from(x.to_vec());
        for (i, l) in self.layers.iter().enumerate() {
            let f = self.activation_of(i);
            let z = l.weights.dot(&a) + &l.bias;
            a = z.mapv(|v| f.apply(v));
        }
        Ok(a[0])
    }

    /// Outputs for every row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<'_, T>) -> Result<Array1<T>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        let mut a = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let f = self.activation_of(i);
            let mut z = a.dot(&l.weights.t());
            z += &l.bias;
            z.mapv_inplace(|v| f.apply(v));
            a = z;
        }
        Ok(a.column(0).to_owned())
    }

    /// Mean batch loss and its gradient with respect to every parameter.
    pub fn backward(
        &self,
        x: ArrayView2<'_, T>,
        y: ArrayView1<'_, T>,
        kind: LossKind,
    ) -> Result<(T, Gradients<T>)> {
        if x.nrows() == 0 {
            return Err(Error::Empty("backward needs a nonempty batch".into()));
        }
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        if y.len() != x.nrows() {
            return Err(Error::Dimension {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        let n = T::of(x.nrows() as f64);
        // activations[0] = x; pre[i], activations[i + 1] belong to layer i
        let mut activations: Vec<Array2<T>> = vec![x.to_owned()];
        let mut pre: Vec<Array2<T>> = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let f = self.activation_of(i);
            let mut z = activations[i].dot(&l.weights.t());
            z += &l.bias;
            let a = z.mapv(|v| f.apply(v));
            pre.push(z);
            activations.push(a);
        }
        let out = activations.last().unwrap().column(0).to_owned();
        let mean_loss = out
            .iter()
            .zip(y.iter())
            .map(|(&p, &t)| loss(kind, p, t))
            .sum::<T>()
            / n;

        let last = self.layers.len() - 1;
        let mut delta = Array2::<T>::zeros((x.nrows(), 1));
        for r in 0..x.nrows() {
            let p = out[r];
            let t = y[r];
            delta[[r, 0]] = if kind == LossKind::CrossEntropy && self.output == Activation::Sigmoid
            {
                // d/dz of cross entropy through the sigmoid, without the clamp
                p - t
            } else {
                grad_loss(kind, p, t) * self.output.derivative(pre[last][[r, 0]], p)
            } / n;
        }
        let mut grads: Vec<Dense<T>> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let gw = delta.t().dot(&activations[i]);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let f = self.hidden;
                let mut back = delta.dot(&self.layers[i].weights);
                ndarray::Zip::from(&mut back)
                    .and(&pre[i - 1])
                    .and(&activations[i])
                    .for_each(|d, &z, &a| *d = *d * f.derivative(z, a));
                delta = back;
            }
            grads.push(Dense {
                weights: gw,
                bias: gb,
            });
        }
        grads.reverse();
        Ok((mean_loss, Gradients { layers: grads }))
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|w| w.is_finite()))
    }

    /// Portable text form: sizes, activations, then each layer's weights
    /// row by row and its bias, at round-trip precision.
    pub fn to_text(&self) -> String {
        let mut out = String::from("network v1\n");
        let sizes: Vec<String> = self.layer_sizes().iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "layers {}", sizes.join(" "));
        let _ = writeln!(out, "hidden {}", self.hidden.as_str());
        let _ = writeln!(out, "output {}", self.output.as_str());
        for (i, l) in self.layers.iter().enumerate() {
            let _ = writeln!(out, "weights {i}");
            for row in l.weights.rows() {
                let vals: Vec<String> = row.iter().map(|w| format!("{w:?}")).collect();
                let _ = writeln!(out, "{}", vals.join(" "));
            }
            let vals: Vec<String> = l.bias.iter().map(|w| format!("{w:?}")).collect();
            let _ = writeln!(out, "bias {i}");
            let _ = writeln!(out, "{}", vals.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next = || {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, "network text ends early"))
        };
        let (ln, header) = next()?;
        if header != "network v1" {
            return Err(Error::parse(ln, "expected `network v1`"));
        }
        let (ln, sizes) = next()?;
        let sizes: Vec<usize> = sizes
            .strip_prefix("layers ")
            .ok_or_else(|| Error::parse(ln, "expected `layers`"))?
            .split_whitespace()
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::parse(ln, format!("bad size `{s}`")))
            })
            .collect::<Result<_>>()?;
        let mut activation = |key: &str| -> Result<Activation> {
            let (ln, l) = next()?;
            let v = l
                .strip_prefix(key)
                .ok_or_else(|| Error::parse(ln, format!("expected `{}`", key.trim())))?;
            Activation::parse(v.trim())
                .ok_or_else(|| Error::parse(ln, format!("unknown activation `{v}`")))
        };
        let hidden = activation("hidden ")?;
        let output = activation("output ")?;
        let mut net = Network::<T>::zeros(&sizes, hidden, output)?;
        let parse_row = |ln: usize, l: &str, expected: usize| -> Result<Vec<T>> {
            let vals: Vec<T> = l
                .split_whitespace()
                .map(|s| {
                    s.parse::<T>()
                        .map_err(|_| Error::parse(ln, format!("bad number `{s}`")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != expected {
                return Err(Error::parse(
                    ln,
                    format!("expected {expected} values, found {}", vals.len()),
                ));
            }
            Ok(vals)
        };
        for i in 0..net.layers.len() {
            let (ln, l) = next()?;
            if l != format!("weights {i}") {
                return Err(Error::parse(ln, format!("expected `weights {i}`")));
            }
            let (rows, cols) = net.layers[i].weights.dim();
            for r in 0..rows {
                let (ln, l) = next()?;
                let vals = parse_row(ln, l, cols)?;
                net.layers[i].weights.row_mut(r).assign(&Array1::from(vals));
            }
            let (ln, l) = next()?;
            if l != format!("bias {i}") {
                return Err(Error::parse(ln, format!("expected `bias {i}`")));
            }
            let (ln, l) = next()?;
            net.layers[i].bias = Array1::from(parse_row(ln, l, rows)?);
        }
        Ok(net)
    }
}

/// Adam optimizer state with first/second moment accumulators over the flat
/// parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub alpha: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    /// Fresh state (`t = 0`, zero moments) with the usual decay rates.
    pub fn new(alpha: T, n_params: usize) -> Self {
        Self::with_rates(alpha, T::of(BETA1), T::of(BETA2), T::of(EPSILON), n_params)
    }

    pub fn with_rates(alpha: T, beta1: T, beta2: T, epsilon: T, n_params: usize) -> Self {
        Self {
            alpha,
            beta1,
            beta2,
            epsilon,
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            t: 0,
        }
    }

    /// One Adam update in place, using the step-size form
    /// `α_t = α·sqrt(1 − β₂ᵗ)/(1 − β₁ᵗ)`, `θ ← θ − α_t·m/(sqrt(v) + ε)`.
    pub fn step(&mut self, theta: &mut [T], g: &[T]) -> Result<()> {
        if theta.len() != self.m.len() || g.len() != self.m.len() {
            return Err(Error::Dimension {
                expected: self.m.len(),
                found: if theta.len() != self.m.len() {
                    theta.len()
                } else {
                    g.len()
                },
            });
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let step = self.alpha * (T::one() - b2.powi(t)).sqrt() / (T::one() - b1.powi(t));
        for i in 0..theta.len() {
            let gi = g[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * gi;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * gi * gi;
            theta[i] = theta[i] - step * self.m[i] / (self.v[i].sqrt() + self.epsilon);
        }
        Ok(())
    }

    /// Applies one update to a network's parameters.
    pub fn step_network(&mut self, net: &mut Network<T>, g: &Gradients<T>) -> Result<()> {
        if self.m.len() != net.param_count() {
            return Err(Error::Dimension {
                expected: net.param_count(),
                found: self.m.len(),
            });
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let step = self.alpha * (T::one() - b2.powi(t)).sqrt() / (T::one() - b1.powi(t));
        let mut k = 0;
        for (layer, grad) in net.layers.iter_mut().zip(&g.layers) {
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let grads = grad.weights.iter().chain(grad.bias.iter());
            for (p, &gi) in params.zip(grads) {
                let m = b1 * self.m[k] + (T::one() - b1) * gi;
                let v = b2 * self.v[k] + (T::one() - b2) * gi * gi;
                self.m[k] = m;
                self.v[k] = v;
                *p = *p - step * m / (v.sqrt() + self.epsilon);
                k += 1;
            }
        }
        Ok(())
    }
}

/// Pure form of one Adam update.
pub fn adam_step<T: Scalar>(
    state: &AdamState<T>,
    theta: &[T],
    g: &[T],
) -> Result<(Vec<T>, AdamState<T>)> {
    let mut next = state.clone();
    let mut theta = theta.to_vec();
    next.step(&mut theta, g)?;
    Ok((theta, next))
}

/// Loss, epoch count and seed for [`train`]. Batch size and learning rate come
/// from the architecture; `β₁`, `β₂`, `ε` are fixed at 0.9, 0.999, 1e-8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSpec {
    pub loss: LossKind,
    pub epochs: usize,
    pub seed: u64,
}

/// Trains a fresh network on `(x, y)` by shuffled mini-batch Adam. The last
/// incomplete batch of each epoch is kept. Returns the network and the mean
/// training loss of each epoch.
pub fn train<T: Scalar>(
    x: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    arch: &Hyperparameters,
    output: Activation,
    spec: &TrainSpec,
) -> Result<(Network<T>, Vec<T>)> {
    let mut rng = rng::seeded(spec.seed);
    let sizes = arch.layer_sizes(x.ncols());
    let net = Network::init(&sizes, arch.activation, output, &mut rng)?;
    train_from(
        net,
        x,
        y,
        arch.batch_size,
        arch.learning_rate,
        spec,
        &mut rng,
    )
}

/// Continues training `net` with the given generator.
pub fn train_from<T: Scalar>(
    mut net: Network<T>,
    x: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    batch_size: usize,
    learning_rate: f64,
    spec: &TrainSpec,
    rng: &mut rng::Rng,
) -> Result<(Network<T>, Vec<T>)> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::Empty("training data".into()));
    }
    if y.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: y.len(),
        });
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument(
            "batch size must be at least 1".into(),
        ));
    }
    let mut adam = AdamState::new(T::of(learning_rate), net.param_count());
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(spec.epochs);
    for _ in 0..spec.epochs {
        order.shuffle(rng);
        let mut total = T::zero();
        for chunk in order.chunks(batch_size) {
            let xb = x.select(Axis(0), chunk);
            let yb = y.select(Axis(0), chunk);
            let (l, g) = net.backward(xb.view(), yb.view(), spec.loss)?;
            total = total + l * T::of(chunk.len() as f64);
            adam.step_network(&mut net, &g)?;
        }
        let mean = total / T::of(n as f64);
        if !mean.is_finite() {
            return Err(Error::Numeric("training loss is not finite".into()));
        }
        history.push(mean);
    }
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn relu_arch(layers: usize, nodes: usize, batch: usize, lr: f64) -> Hyperparameters {
        Hyperparameters {
            n_hidden_layers: layers,
            nodes_first: nodes,
            nodes_rest: nodes,
            activation: Activation::Relu,
            batch_size: batch,
            learning_rate: lr,
        }
    }

    #[test]
    fn zero_network_with_sigmoid_output_is_one_half() {
        let net = Network::<f64>::zeros(&[3, 4, 1], Activation::Relu, Activation::Sigmoid).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), 0.5);
    }

    #[test]
    fn relu_clamps_negative_inputs() {
        let layer = Dense {
            weights: array![[1.0]],
            bias: array![0.0],
        };
        let net = Network::from_layers(vec![layer], Activation::Relu, Activation::Relu).unwrap();
        assert_eq!(net.forward(&[-3.0]).unwrap(), 0.0);
        assert_eq!(net.forward(&[2.5]).unwrap(), 2.5);
    }

    #[test]
    fn hand_set_two_input_network() {
        let hidden = Dense {
            weights: array![[0.5, -0.25]],
            bias: array![0.1],
        };
        let out = Dense {
            weights: array![[0.8]],
            bias: array![-0.2],
        };
        let net =
            Network::from_layers(vec![hidden, out], Activation::Relu, Activation::Sigmoid).unwrap();
        // h = relu(0.5·1 − 0.25·2 + 0.1) = 0.1; out = σ(0.8·0.1 − 0.2) = σ(−0.12)
        let expected = 1.0 / (1.0 + 0.12f64.exp());
        assert!((net.forward(&[1.0, 2.0]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn forward_rejects_wrong_dimension() {
        let net = Network::<f64>::zeros(&[3, 1], Activation::Relu, Activation::Sigmoid).unwrap();
        assert!(matches!(
            net.forward(&[1.0]),
            Err(Error::Dimension {
                expected: 3,
                found: 1
            })
        ));
    }

    #[test]
    fn loss_values() {
        assert!((loss(LossKind::CrossEntropy, 0.5f64, 1.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(loss(LossKind::Mse, 3.0, 3.0), 0.0);
        assert_eq!(batch_loss(LossKind::Mse, &[1.0, 3.0], &[0.0, 1.0]), 2.5);
        // clamped, finite
        assert!(loss(LossKind::CrossEntropy, 0.0f64, 1.0).is_finite());
        assert!(loss(LossKind::CrossEntropy, 1.0f64, 0.0).is_finite());
    }

    #[test]
    fn loss_gradients_match_differences() {
        for &(kind, p, y) in &[
            (LossKind::CrossEntropy, 0.3f64, 1.0),
            (LossKind::CrossEntropy, 0.8, 0.0),
            (LossKind::Mse, 2.0, 0.5),
        ] {
            let h = 1e-6;
            let fd = (loss(kind, p + h, y) - loss(kind, p - h, y)) / (2.0 * h);
            assert!((fd - grad_loss(kind, p, y)).abs() < 1e-6);
        }
    }

    #[test]
    fn exact_fit_has_zero_gradient() {
        let layer = Dense {
            weights: array![[2.0f64, -1.0]],
            bias: array![0.5],
        };
        let net =
            Network::from_layers(vec![layer], Activation::Relu, Activation::Identity).unwrap();
        let x = array![[1.0, 1.0], [3.0, 2.0]];
        let y = net.forward_batch(x.view()).unwrap();
        let (l, g) = net.backward(x.view(), y.view(), LossKind::Mse).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn single_linear_neuron_gradient() {
        let (w, x, y) = (0.7f64, 1.5, 2.0);
        let layer = Dense {
            weights: array![[w]],
            bias: array![0.0],
        };
        let net =
            Network::from_layers(vec![layer], Activation::Identity, Activation::Identity).unwrap();
        let (_, g) = net
            .backward(array![[x]].view(), array![y].view(), LossKind::Mse)
            .unwrap();
        assert!((g.layers[0].weights[[0, 0]] - 2.0 * (w * x - y) * x).abs() < 1e-12);
        assert!((g.layers[0].bias[0] - 2.0 * (w * x - y)).abs() < 1e-12);
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let state = AdamState::new(0.1, 3);
        let theta = vec![1.0, -2.0, 0.5];
        let (next, s) = adam_step(&state, &theta, &[0.0; 3]).unwrap();
        assert_eq!(next, theta);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn adam_first_step_moves_by_alpha() {
        let state = AdamState::new(0.1f64, 1);
        let (next, _) = adam_step(&state, &[1.0], &[2.0]).unwrap();
        assert!((next[0] - 0.9).abs() < 1e-7);
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let state = AdamState::<f64>::new(0.1, 2);
        assert!(adam_step(&state, &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn network_step_matches_flat_step() {
        let mut r = rng::seeded(3);
        let mut net = Network::<f64>::init(
            &[3, 4, 1],
            Activation::Sigmoid,
            Activation::Identity,
            &mut r,
        )
        .unwrap();
        let x = array![[0.1, 0.2, 0.3], [1.0, -1.0, 0.5]];
        let y = array![1.0, -1.0];
        let (_, g) = net.backward(x.view(), y.view(), LossKind::Mse).unwrap();
        let mut flat = net.params();
        let mut a = AdamState::new(0.01, flat.len());
        let mut b = a.clone();
        a.step(&mut flat, &g.to_flat()).unwrap();
        b.step_network(&mut net, &g).unwrap();
        assert_eq!(net.params(), flat);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_epochs_returns_initial_weights() {
        let x = array![[0.0, 1.0], [1.0, 0.0]];
        let y = array![0.0, 1.0];
        let arch = relu_arch(1, 4, 2, 0.01);
        let spec = TrainSpec {
            loss: LossKind::CrossEntropy,
            epochs: 0,
            seed: 11,
        };
        let (net, hist) = train(x.view(), y.view(), &arch, Activation::Sigmoid, &spec).unwrap();
        let mut r = rng::seeded(11);
        let init = Network::<f64>::init(&[2, 4, 1], Activation::Relu, Activation::Sigmoid, &mut r)
            .unwrap();
        assert_eq!(net, init);
        assert!(hist.is_empty());
    }

    #[test]
    fn training_rejects_empty_data() {
        let x = Array2::<f64>::zeros((0, 2));
        let y = Array1::<f64>::zeros(0);
        let spec = TrainSpec {
            loss: LossKind::Mse,
            epochs: 1,
            seed: 0,
        };
        assert!(matches!(
            train(
                x.view(),
                y.view(),
                &relu_arch(1, 2, 1, 0.01),
                Activation::Identity,
                &spec
            ),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn text_format_round_trips() {
        let mut r = rng::seeded(5);
        let net =
            Network::<f64>::init(&[4, 3, 2, 1], Activation::Sigmoid, Activation::Relu, &mut r)
                .unwrap();
        let back = Network::<f64>::from_text(&net.to_text()).unwrap();
        assert_eq!(back, net);
        let net32 = Network::<f32>::init(&[2, 2, 1], Activation::Relu, Activation::Sigmoid, &mut r)
            .unwrap();
        assert_eq!(Network::<f32>::from_text(&net32.to_text()).unwrap(), net32);
        assert!(Network::<f64>::from_text("network v1\nlayers 2 1\nhidden relu\n").is_err());
    }

    #[test]
    fn batch_forward_agrees_with_single() {
        let mut r = rng::seeded(9);
        let net = Network::<f64>::init(&[3, 5, 1], Activation::Relu, Activation::Sigmoid, &mut r)
            .unwrap();
        let x = array![[0.3, -0.1, 2.0], [1.0, 1.0, 1.0]];
        let batch = net.forward_batch(x.view()).unwrap();
        for i in 0..2 {
            let single = net.forward(&x.row(i).to_vec()).unwrap();
            assert!((single - batch[i]).abs() < 1e-14);
        }
    }
}
