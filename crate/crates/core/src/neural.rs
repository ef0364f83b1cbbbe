//! Dense ReLU networks with exact reverse-mode gradients.
//!
//! This is the shared substrate of the point tracker and the Q-network. Hidden
//! layers use ReLU (subgradient 0 at the kink), the output layer is linear.
//! Weights are stored row-major, one `out × in` matrix per layer.

use rand::{seq::index::sample, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Finite-difference step used by [`gradient_check`].
pub const CHECK_STEP: f64 = 1e-5;
const KINK_RETRY_ABOVE: f64 = 1e-6;
/// Nets with more parameters than this are checked on a random subset.
const FULL_CHECK_LIMIT: usize = 4_000;
const CHECK_SUBSET: usize = 400;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NeuralError {
    #[error("a network needs at least two layer sizes, got {0}")]
    TooFewLayers(usize),
    #[error("layer {0} has size zero")]
    ZeroSize(usize),
    #[error("expected input of length {expected}, got {got}")]
    InputDim { expected: usize, got: usize },
    #[error("expected output cotangent of length {expected}, got {got}")]
    OutputDim { expected: usize, got: usize },
    #[error("parameter shapes do not match: {0}")]
    Shape(String),
    #[error("non-finite parameter in layer {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Parameter-shaped buffer: gradients, Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<(), NeuralError> {
    if layer_sizes.len() < 2 {
        return Err(NeuralError::TooFewLayers(layer_sizes.len()));
    }
    if let Some(i) = layer_sizes.iter().position(|&n| n == 0) {
        return Err(NeuralError::ZeroSize(i));
    }
    Ok(())
}

impl Mlp {
    /// Glorot-uniform weights from a seeded generator, zero biases.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self, NeuralError> {
        validate_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = glorot_bound(fan_in, fan_out);
            weights.push((0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)).collect());
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Network with every parameter zero.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self, NeuralError> {
        validate_sizes(layer_sizes)?;
        let g = Gradients::for_sizes(layer_sizes);
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights: g.weights,
            biases: g.biases,
        })
    }

    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self, NeuralError> {
        validate_sizes(&layer_sizes)?;
        let layers = layer_sizes.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(NeuralError::Shape(format!(
                "{layers} layers but {} weight and {} bias arrays",
                weights.len(),
                biases.len()
            )));
        }
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] || biases[l].len() != pair[1] {
                return Err(NeuralError::Shape(format!(
                    "layer {l} expects {}x{} weights and {} biases, got {} and {}",
                    pair[1],
                    pair[0],
                    pair[1],
                    weights[l].len(),
                    biases[l].len()
                )));
            }
            if !weights[l].iter().chain(&biases[l]).all(|v| v.is_finite()) {
                return Err(NeuralError::NonFinite(l));
            }
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Parameters in a fixed order: all weights layer by layer, then all biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().flatten().chain(self.biases.iter().flatten())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .flatten()
            .chain(self.biases.iter_mut().flatten())
    }

    fn param_mut(&mut self, index: usize) -> &mut f64 {
        self.params_mut().nth(index).expect("parameter index in range")
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.check_input(x)?;
        let mut act = x.to_vec();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            act = affine(w, b, &act);
            if l < last {
                relu_in_place(&mut act);
            }
        }
        Ok(act)
    }

    /// Forward pass keeping every layer's activation for a later backward pass.
    pub fn trace(&self, x: &[f64]) -> Result<Trace, NeuralError> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layer_sizes.len());
        activations.push(x.to_vec());
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = affine(w, b, activations.last().expect("input pushed"));
            if l < last {
                relu_in_place(&mut next);
            }
            activations.push(next);
        }
        Ok(Trace { activations })
    }

    /// Parameter gradients for the output cotangent `d_out`.
    pub fn backward(&self, x: &[f64], d_out: &[f64]) -> Result<Gradients, NeuralError> {
        let trace = self.trace(x)?;
        let mut grads = Gradients::zeros_like(self);
        self.accumulate(&trace, d_out, &mut grads)?;
        Ok(grads)
    }

    /// Adds the gradients for one traced sample into `grads`; returns the
    /// cotangent with respect to the input.
    pub fn accumulate(
        &self,
        trace: &Trace,
        d_out: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<f64>, NeuralError> {
        if d_out.len() != self.output_size() {
            return Err(NeuralError::OutputDim {
                expected: self.output_size(),
                got: d_out.len(),
            });
        }
        grads.check_shape(self)?;
        let mut delta = d_out.to_vec();
        for l in (0..self.weights.len()).rev() {
            let input = &trace.activations[l];
            let n_in = self.layer_sizes[l];
            let gw = &mut grads.weights[l];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    let row = &mut gw[o * n_in..(o + 1) * n_in];
                    for (g, &a) in row.iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
                grads.biases[l][o] += d;
            }
            let w = &self.weights[l];
            let mut prev = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    for (p, &wv) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *p += d * wv;
                    }
                }
            }
            if l > 0 {
                // ReLU: active iff the post-activation is strictly positive
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        Ok(delta)
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NeuralError> {
        if x.len() != self.input_size() {
            return Err(NeuralError::InputDim {
                expected: self.input_size(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Overwrites every parameter with the one from `other` (same shape).
    pub fn copy_from(&mut self, other: &Mlp) -> Result<(), NeuralError> {
        if self.layer_sizes != other.layer_sizes {
            return Err(NeuralError::Shape(format!(
                "{:?} vs {:?}",
                self.layer_sizes, other.layer_sizes
            )));
        }
        self.weights.clone_from(&other.weights);
        self.biases.clone_from(&other.biases);
        Ok(())
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Layer activations from [`Mlp::trace`]; index 0 is the input.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has an output")
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(o, &bias)| {
            w[o * n_in..(o + 1) * n_in]
                .iter()
                .zip(x)
                .fold(bias, |acc, (wv, xv)| acc + wv * xv)
        })
        .collect()
}

fn relu_in_place(v: &mut [f64]) {
    for a in v {
        if *a < 0.0 {
            *a = 0.0;
        }
    }
}

impl Gradients {
    fn for_sizes(layer_sizes: &[usize]) -> Self {
        Self {
            weights: layer_sizes.windows(2).map(|p| vec![0.0; p[0] * p[1]]).collect(),
            biases: layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn zeros_like(m: &Mlp) -> Self {
        Self::for_sizes(&m.layer_sizes)
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().flatten().chain(self.biases.iter().flatten())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .flatten()
            .chain(self.biases.iter_mut().flatten())
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    fn check_shape(&self, m: &Mlp) -> Result<(), NeuralError> {
        let ok = self.weights.len() == m.weights.len()
            && self.biases.len() == m.biases.len()
            && self.weights.iter().zip(&m.weights).all(|(a, b)| a.len() == b.len())
            && self.biases.iter().zip(&m.biases).all(|(a, b)| a.len() == b.len());
        if ok {
            Ok(())
        } else {
            Err(NeuralError::Shape("gradient buffer does not match network".into()))
        }
    }
}

#[derive(Debug, Clone)]
struct AdamMoments {
    first: Gradients,
    second: Gradients,
    steps: i32,
}

/// Optimizer configuration and state: plain SGD, or Adam when moments are present.
#[derive(Debug, Clone)]
pub struct OptimState {
    pub learning_rate: f64,
    adam: Option<AdamMoments>,
}

impl OptimState {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            adam: None,
        }
    }

    pub fn adam(learning_rate: f64, m: &Mlp) -> Self {
        Self {
            learning_rate,
            adam: Some(AdamMoments {
                first: Gradients::zeros_like(m),
                second: Gradients::zeros_like(m),
                steps: 0,
            }),
        }
    }

    pub fn is_adam(&self) -> bool {
        self.adam.is_some()
    }
}

/// One optimizer update of `m` along `g`.
pub fn step(m: &mut Mlp, g: &Gradients, opt: &mut OptimState) -> Result<(), NeuralError> {
    g.check_shape(m)?;
    let lr = opt.learning_rate;
    match &mut opt.adam {
        None => {
            for (p, gv) in m.params_mut().zip(g.values()) {
                *p -= lr * gv;
            }
        }
        Some(adam) => {
            adam.first.check_shape(m)?;
            adam.steps += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(adam.steps);
            let c2 = 1.0 - ADAM_BETA2.powi(adam.steps);
            let moments = adam.first.values_mut().zip(adam.second.values_mut());
            for ((p, gv), (m1, m2)) in m.params_mut().zip(g.values()).zip(moments) {
                *m1 = ADAM_BETA1 * *m1 + (1.0 - ADAM_BETA1) * gv;
                *m2 = ADAM_BETA2 * *m2 + (1.0 - ADAM_BETA2) * gv * gv;
                let m_hat = *m1 / c1;
                let v_hat = *m2 / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            }
        }
    }
    Ok(())
}

/// `|a - b| / max(1e-8, |a| + |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

/// Compares `analytic` against central differences of `loss` over the
/// network parameters; returns the largest relative error.
///
/// A parameter that disagrees by more than 1e-6 is re-probed with steps
/// 10x and 100x smaller and scored by its best agreement.
///
/// Every parameter is perturbed for small nets; larger nets are checked on a
/// seeded random subset of parameters.
pub fn check_gradients(
    m: &Mlp,
    analytic: &Gradients,
    loss: impl Fn(&Mlp) -> f64,
    subset_seed: u64,
) -> Result<f64, NeuralError> {
    analytic.check_shape(m)?;
    let count = m.param_count();
    let indices: Vec<usize> = if count <= FULL_CHECK_LIMIT {
        (0..count).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(subset_seed);
        let mut idx = sample(&mut rng, count, CHECK_SUBSET).into_vec();
        idx.sort_unstable();
        idx
    };
    let analytic_flat: Vec<f64> = analytic.values().copied().collect();
    let mut probe = m.clone();
    let mut worst: f64 = 0.0;
    for i in indices {
        let original = *probe.param_mut(i);
        let mut best = f64::INFINITY;
        // a ReLU kink inside [x - h, x + h] biases the central difference;
        // shrinking h moves the probe off the kink
        for h in [CHECK_STEP, CHECK_STEP / 10.0, CHECK_STEP / 100.0] {
            *probe.param_mut(i) = original + h;
            let up = loss(&probe);
            *probe.param_mut(i) = original - h;
            let down = loss(&probe);
            *probe.param_mut(i) = original;
            best = best.min(relative_error(analytic_flat[i], (up - down) / (2.0 * h)));
            if best < KINK_RETRY_ABOVE {
                break;
            }
        }
        worst = worst.max(best);
    }
    Ok(worst)
}

/// Gradient check for a loss on the network output at input `x`.
///
/// `loss` returns the scalar loss and its gradient with respect to the output.
pub fn gradient_check(
    m: &Mlp,
    x: &[f64],
    loss: impl Fn(&[f64]) -> (f64, Vec<f64>),
) -> Result<f64, NeuralError> {
    let out = m.forward(x)?;
    let (_, d_out) = loss(&out);
    let analytic = m.backward(x, &d_out)?;
    check_gradients(
        m,
        &analytic,
        |probe| loss(&probe.forward(x).expect("input length checked")).0,
        0x9e37_79b9,
    )
}
