//! Fully-connected network with leaky-rectifier hidden layers and exact
//! reverse-mode gradients, plus a central-difference gradient checker.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::stacks::ChannelStack;
use rand::Rng;

use super::linear::predict_with;
use super::LEAKY_SLOPE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    LeakyRelu,
    Identity,
    Logistic,
}

impl Activation {
    pub fn label(self) -> &'static str {
        match self {
            Activation::LeakyRelu => "leaky_relu",
            Activation::Identity => "identity",
            Activation::Logistic => "logistic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "leaky_relu" => Ok(Activation::LeakyRelu),
            "identity" => Ok(Activation::Identity),
            "logistic" => Ok(Activation::Logistic),
            other => Err(Error::validation(format!("unknown activation tag {other:?}"))),
        }
    }

    fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::LeakyRelu => {
                if z >= S::zero() {
                    z
                } else {
                    S::from_f64_lossy(LEAKY_SLOPE) * z
                }
            }
            Activation::Identity => z,
            Activation::Logistic => S::one() / (S::one() + (-z).exp()),
        }
    }

    /// Derivative given both the pre-activation and the activated value,
    /// so logistic can reuse a * (1 - a).
    fn derivative<S: Scalar>(self, z: S, a: S) -> S {
        match self {
            Activation::LeakyRelu => {
                if z >= S::zero() {
                    S::one()
                } else {
                    S::from_f64_lossy(LEAKY_SLOPE)
                }
            }
            Activation::Identity => S::one(),
            Activation::Logistic => a * (S::one() - a),
        }
    }
}

/// Dense network. Layer `l` maps `layer_sizes[l]` inputs to
/// `layer_sizes[l + 1]` outputs with input-major weights
/// `w[i * out + j]`. Every layer but the last applies the leaky
/// rectifier; the last applies `output_activation`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<S: Scalar> {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<S>>,
    biases: Vec<Vec<S>>,
    output_activation: Activation,
}

/// Per-layer pre-activations and activations from one forward pass,
/// fingerprinted against the parameters that produced them.
#[derive(Debug, Clone)]
pub struct ForwardCache<S: Scalar> {
    layer_sizes: Vec<usize>,
    fingerprint: f64,
    input: Vec<S>,
    zs: Vec<Vec<S>>,
    activations: Vec<Vec<S>>,
}

/// Parameter gradients plus the gradient with respect to the input,
/// which lets one network backpropagate into another.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients<S: Scalar> {
    pub weights: Vec<Vec<S>>,
    pub biases: Vec<Vec<S>>,
    pub input: Vec<S>,
}

fn validate_spec(layer_sizes: &[usize], output_activation: Activation) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::validation("a network needs an input and an output layer"));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(Error::validation("layer sizes must be positive"));
    }
    if output_activation == Activation::LeakyRelu {
        return Err(Error::validation("output activation must be identity or logistic"));
    }
    Ok(())
}

impl<S: Scalar> Mlp<S> {
    /// Uniform init scaled by fan-in and fan-out; biases start at zero.
    pub fn new(layer_sizes: &[usize], output_activation: Activation, rng: &mut SeededRng) -> Result<Self> {
        validate_spec(layer_sizes, output_activation)?;
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w: Vec<S> = (0..fan_in * fan_out)
                .map(|_| S::from_f64_lossy(rng.random_range(-s..s)))
                .collect();
            weights.push(w);
            biases.push(vec![S::zero(); fan_out]);
        }
        Ok(Mlp { layer_sizes: layer_sizes.to_vec(), weights, biases, output_activation })
    }

    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<S>>,
        biases: Vec<Vec<S>>,
        output_activation: Activation,
    ) -> Result<Self> {
        validate_spec(&layer_sizes, output_activation)?;
        let layers = layer_sizes.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::validation(format!(
                "{} layer sizes need {layers} weight and bias sets",
                layer_sizes.len()
            )));
        }
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] || biases[l].len() != pair[1] {
                return Err(Error::validation(format!("layer {l} parameter shapes are wrong")));
            }
        }
        if weights.iter().chain(&biases).flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("network parameters must be finite"));
        }
        Ok(Mlp { layer_sizes, weights, biases, output_activation })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn weights(&self) -> &[Vec<S>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<S>] {
        &self.biases
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    fn activation_of_layer(&self, l: usize) -> Activation {
        if l + 2 == self.layer_sizes.len() {
            self.output_activation
        } else {
            Activation::LeakyRelu
        }
    }

    fn fingerprint(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .map(|v| v.into_f64().abs())
            .sum()
    }

    /// In-place parameter step: `p += scale * g` for every weight and
    /// bias. Gradient shapes must come from `mlp_backward` on this
    /// network.
    pub(crate) fn step(&mut self, grads: &MlpGradients<S>, scale: S) {
        for (ws, gs) in self.weights.iter_mut().zip(&grads.weights) {
            for (w, &g) in ws.iter_mut().zip(gs) {
                *w = *w + scale * g;
            }
        }
        for (bs, gs) in self.biases.iter_mut().zip(&grads.biases) {
            for (b, &g) in bs.iter_mut().zip(gs) {
                *b = *b + scale * g;
            }
        }
    }
}

/// Runs the network and keeps every intermediate needed for an exact
/// backward pass.
pub fn mlp_forward<S: Scalar>(m: &Mlp<S>, input: &[S]) -> Result<(Vec<S>, ForwardCache<S>)> {
    if input.len() != m.input_dim() {
        return Err(Error::validation(format!(
            "network expects {} inputs, got {}",
            m.input_dim(),
            input.len()
        )));
    }
    let layers = m.weights.len();
    let mut zs = Vec::with_capacity(layers);
    let mut activations = Vec::with_capacity(layers);
    let mut current = input.to_vec();
    for l in 0..layers {
        let out_dim = m.layer_sizes[l + 1];
        let mut z = m.biases[l].clone();
        for (i, &x) in current.iter().enumerate() {
            let row = &m.weights[l][i * out_dim..(i + 1) * out_dim];
            for (zj, &w) in z.iter_mut().zip(row) {
                *zj = *zj + w * x;
            }
        }
        let act = m.activation_of_layer(l);
        let a: Vec<S> = z.iter().map(|&v| act.apply(v)).collect();
        zs.push(z);
        current = a.clone();
        activations.push(a);
    }
    let cache = ForwardCache {
        layer_sizes: m.layer_sizes.clone(),
        fingerprint: m.fingerprint(),
        input: input.to_vec(),
        zs,
        activations,
    };
    Ok((current, cache))
}

/// Exact reverse-mode gradients for a scalar loss, given the gradient of
/// that loss with respect to the network output. The cache must come
/// from a forward pass of this same network with its current parameters.
pub fn mlp_backward<S: Scalar>(
    m: &Mlp<S>,
    cache: &ForwardCache<S>,
    output_grad: &[S],
) -> Result<MlpGradients<S>> {
    if cache.layer_sizes != m.layer_sizes || cache.fingerprint != m.fingerprint() {
        return Err(Error::validation(
            "forward cache does not match this network's current parameters",
        ));
    }
    if output_grad.len() != m.output_dim() {
        return Err(Error::validation(format!(
            "expected {} output gradients, got {}",
            m.output_dim(),
            output_grad.len()
        )));
    }
    let layers = m.weights.len();
    let mut grad_w: Vec<Vec<S>> = m.weights.iter().map(|w| vec![S::zero(); w.len()]).collect();
    let mut grad_b: Vec<Vec<S>> = m.biases.iter().map(|b| vec![S::zero(); b.len()]).collect();

    // delta holds dLoss/dz for the layer being processed.
    let last = layers - 1;
    let mut delta: Vec<S> = output_grad
        .iter()
        .zip(cache.zs[last].iter().zip(&cache.activations[last]))
        .map(|(&g, (&z, &a))| g * m.activation_of_layer(last).derivative(z, a))
        .collect();

    for l in (0..layers).rev() {
        let out_dim = m.layer_sizes[l + 1];
        let a_in: &[S] = if l == 0 { &cache.input } else { &cache.activations[l - 1] };
        for (i, &ai) in a_in.iter().enumerate() {
            let row = &mut grad_w[l][i * out_dim..(i + 1) * out_dim];
            for (g, &d) in row.iter_mut().zip(&delta) {
                *g = ai * d;
            }
        }
        grad_b[l].copy_from_slice(&delta);

        let mut d_in = vec![S::zero(); a_in.len()];
        for (i, di) in d_in.iter_mut().enumerate() {
            let row = &m.weights[l][i * out_dim..(i + 1) * out_dim];
            *di = row.iter().zip(&delta).map(|(&w, &d)| w * d).sum();
        }
        if l == 0 {
            return Ok(MlpGradients { weights: grad_w, biases: grad_b, input: d_in });
        }
        let act = m.activation_of_layer(l - 1);
        delta = d_in
            .iter()
            .zip(cache.zs[l - 1].iter().zip(&cache.activations[l - 1]))
            .map(|(&g, (&z, &a))| g * act.derivative(z, a))
            .collect();
    }
    unreachable!("loop always returns at layer 0");
}

/// Compares analytic parameter gradients against central differences of
/// `loss` and returns the worst relative error. `loss` maps a network
/// output to a scalar and its gradient with respect to that output.
pub fn grad_check<S: Scalar>(
    m: &Mlp<S>,
    input: &[S],
    h: S,
    loss: impl Fn(&[S]) -> (S, Vec<S>),
) -> Result<S> {
    if !(h.is_finite() && h > S::zero()) {
        return Err(Error::validation("step size must be positive and finite"));
    }
    let (out, cache) = mlp_forward(m, input)?;
    let (_, out_grad) = loss(&out);
    if out_grad.len() != m.output_dim() {
        return Err(Error::validation("loss gradient length does not match network output"));
    }
    let analytic = mlp_backward(m, &cache, &out_grad)?;

    fn param_mut<S: Scalar>(net: &mut Mlp<S>, l: usize, is_bias: bool, idx: usize) -> &mut S {
        if is_bias {
            &mut net.biases[l][idx]
        } else {
            &mut net.weights[l][idx]
        }
    }

    let mut probe = m.clone();
    let eval = |net: &Mlp<S>| -> Result<S> {
        let (o, _) = mlp_forward(net, input)?;
        Ok(loss(&o).0)
    };
    let floor = S::from_f64_lossy(1e-8);
    let two_h = h + h;
    let mut worst = S::zero();
    for l in 0..m.weights.len() {
        for k in 0..m.weights[l].len() + m.biases[l].len() {
            let (is_bias, idx) =
                if k < m.weights[l].len() { (false, k) } else { (true, k - m.weights[l].len()) };
            let original = *param_mut(&mut probe, l, is_bias, idx);
            *param_mut(&mut probe, l, is_bias, idx) = original + h;
            let plus = eval(&probe)?;
            *param_mut(&mut probe, l, is_bias, idx) = original - h;
            let minus = eval(&probe)?;
            *param_mut(&mut probe, l, is_bias, idx) = original;
            let numeric = (plus - minus) / two_h;
            let a = if is_bias { analytic.biases[l][idx] } else { analytic.weights[l][idx] };
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// Runs a network over every valid patch center of a stack; see
/// `predict_linear` for the grid geometry.
pub fn predict_mlp<S: Scalar>(
    m: &Mlp<S>,
    stack: &ChannelStack<S>,
    sources: &[usize],
    targets: &[usize],
    radius: usize,
    stride: usize,
) -> Result<ChannelStack<S>> {
    predict_with(stack, sources, targets, radius, stride, m.input_dim(), m.output_dim(), |x| {
        mlp_forward(m, x).map(|(o, _)| o)
    })
}
