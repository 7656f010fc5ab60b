//! From-scratch learning stack: a one-hidden-layer ReLU network with exact
//! backpropagation, the Adam optimizer and a fixed-capacity replay buffer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gridworld::{MoveAction, Observation};
use crate::protocol::Symbol;
use crate::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Weights and biases of a two-layer network. Also used as the gradient
/// container, since gradients have exactly the parameter shapes.
///
/// `w1` is `input x hidden`, `w2` is `hidden x output`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

pub type Gradients = MlpParams;

impl MlpParams {
    pub fn zeros(in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        Self {
            w1: Matrix::zeros(in_dim, hidden),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(hidden, out_dim),
            b2: vec![0.0; out_dim],
        }
    }

    pub fn zeros_like(other: &Self) -> Self {
        let (in_dim, hidden) = other.w1.shape();
        Self::zeros(in_dim, hidden, other.b2.len())
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        let (in_dim, hidden) = self.w1.shape();
        (in_dim, hidden, self.b2.len())
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.w1.shape() == other.w1.shape()
            && self.b1.len() == other.b1.len()
            && self.w2.shape() == other.w2.shape()
            && self.b2.len() == other.b2.len()
    }

    pub fn slices(&self) -> [&[f64]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.slices().into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Values retained by [`Mlp::forward`] for the matching backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationCache {
    input: Vec<f64>,
    pre_activation: Vec<f64>,
    hidden: Vec<f64>,
    generation: u64,
}

impl ActivationCache {
    pub fn pre_activation(&self) -> &[f64] {
        &self.pre_activation
    }
}

/// Fully connected network: `input -> ReLU(hidden) -> linear output`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    params: MlpParams,
    /// Bumped on every parameter update so stale caches can be detected.
    #[serde(skip)]
    generation: u64,
}

impl Mlp {
    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if in_dim == 0 || hidden == 0 || out_dim == 0 {
            return Err(Error::InvalidDimension(format!(
                "layer sizes must be positive, got ({in_dim}, {hidden}, {out_dim})"
            )));
        }
        let mut params = MlpParams::zeros(in_dim, hidden, out_dim);
        let bound1 = 1.0 / (in_dim as f64).sqrt();
        for w in params.w1.as_mut_slice() {
            *w = rng.gen_range(-bound1..=bound1);
        }
        let bound2 = 1.0 / (hidden as f64).sqrt();
        for w in params.w2.as_mut_slice() {
            *w = rng.gen_range(-bound2..=bound2);
        }
        Ok(Self {
            params,
            generation: 0,
        })
    }

    pub fn from_params(params: MlpParams) -> Result<Self> {
        let (in_dim, hidden, out_dim) = params.dims();
        if in_dim == 0 || hidden == 0 || out_dim == 0 {
            return Err(Error::InvalidDimension(format!(
                "layer sizes must be positive, got ({in_dim}, {hidden}, {out_dim})"
            )));
        }
        if params.b1.len() != hidden || params.w2.shape().0 != hidden {
            return Err(Error::InvalidDimension(
                "hidden layer sizes disagree between weights and biases".into(),
            ));
        }
        Ok(Self {
            params,
            generation: 0,
        })
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn into_params(self) -> MlpParams {
        self.params
    }

    pub fn in_dim(&self) -> usize {
        self.params.w1.shape().0
    }

    pub fn hidden_dim(&self) -> usize {
        self.params.b1.len()
    }

    pub fn out_dim(&self) -> usize {
        self.params.b2.len()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    fn hidden_pre(&self, input: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let mut pre = p.b1.clone();
        for (i, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &p.w1.as_slice()[i * p.w1.cols..(i + 1) * p.w1.cols];
            for (acc, &w) in pre.iter_mut().zip(row) {
                *acc += x * w;
            }
        }
        pre
    }

    fn output(&self, hidden: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let mut out = p.b2.clone();
        for (j, &h) in hidden.iter().enumerate() {
            if h == 0.0 {
                continue;
            }
            let row = &p.w2.as_slice()[j * p.w2.cols..(j + 1) * p.w2.cols];
            for (acc, &w) in out.iter_mut().zip(row) {
                *acc += h * w;
            }
        }
        out
    }

    /// Output without keeping a cache.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let hidden: Vec<f64> = self
            .hidden_pre(input)
            .into_iter()
            .map(|z| z.max(0.0))
            .collect();
        Ok(self.output(&hidden))
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ActivationCache)> {
        self.check_input(input)?;
        let pre = self.hidden_pre(input);
        let hidden: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
        let out = self.output(&hidden);
        let cache = ActivationCache {
            input: input.to_vec(),
            pre_activation: pre,
            hidden,
            generation: self.generation,
        };
        Ok((out, cache))
    }

    pub fn forward_batch<I: AsRef<[f64]>>(
        &self,
        inputs: &[I],
    ) -> Result<(Vec<Vec<f64>>, Vec<ActivationCache>)> {
        inputs
            .iter()
            .map(|x| self.forward(x.as_ref()))
            .collect::<Result<Vec<_>>>()
            .map(|pairs| pairs.into_iter().unzip())
    }

    pub fn backward(&self, cache: &ActivationCache, output_grad: &[f64]) -> Result<Gradients> {
        let mut grads = MlpParams::zeros_like(&self.params);
        self.backward_into(cache, output_grad, &mut grads)?;
        Ok(grads)
    }

    /// Adds the gradient for one sample into `grads`.
    pub fn backward_into(
        &self,
        cache: &ActivationCache,
        output_grad: &[f64],
        grads: &mut Gradients,
    ) -> Result<()> {
        if cache.generation != self.generation
            || cache.input.len() != self.in_dim()
            || cache.hidden.len() != self.hidden_dim()
        {
            return Err(Error::StaleCache);
        }
        if output_grad.len() != self.out_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.out_dim(),
                actual: output_grad.len(),
            });
        }
        if !grads.same_shape(&self.params) {
            return Err(Error::InvalidDimension(
                "gradient accumulator shape differs from parameters".into(),
            ));
        }
        let p = &self.params;
        let out_dim = self.out_dim();
        let hidden_dim = self.hidden_dim();

        for (b, g) in grads.b2.iter_mut().zip(output_grad) {
            *b += g;
        }
        let mut hidden_grad = vec![0.0; hidden_dim];
        for j in 0..hidden_dim {
            let h = cache.hidden[j];
            let w_row = &p.w2.as_slice()[j * out_dim..(j + 1) * out_dim];
            let g_row = &mut grads.w2.as_mut_slice()[j * out_dim..(j + 1) * out_dim];
            let mut acc = 0.0;
            for k in 0..out_dim {
                g_row[k] += h * output_grad[k];
                acc += w_row[k] * output_grad[k];
            }
            // ReLU derivative taken as 0 at the kink
            if cache.pre_activation[j] > 0.0 {
                hidden_grad[j] = acc;
            }
        }
        for (b, g) in grads.b1.iter_mut().zip(&hidden_grad) {
            *b += g;
        }
        for (i, &x) in cache.input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let g_row = &mut grads.w1.as_mut_slice()[i * hidden_dim..(i + 1) * hidden_dim];
            for (g, &hg) in g_row.iter_mut().zip(&hidden_grad) {
                *g += x * hg;
            }
        }
        Ok(())
    }
}

/// Moment accumulators for Adam, shaped like the network parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    first_moment: MlpParams,
    second_moment: MlpParams,
    t: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamState {
    pub fn new(mlp: &Mlp) -> Self {
        Self::with_constants(mlp, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON)
    }

    pub fn with_constants(mlp: &Mlp, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            first_moment: MlpParams::zeros_like(mlp.params()),
            second_moment: MlpParams::zeros_like(mlp.params()),
            t: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update of `mlp` in place.
pub fn adam_step(mlp: &mut Mlp, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    if !grads.same_shape(&mlp.params) || !state.first_moment.same_shape(&mlp.params) {
        return Err(Error::InvalidDimension(
            "gradient or optimizer state shape differs from parameters".into(),
        ));
    }
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let correction1 = 1.0 - b1.powf(state.t as f64);
    let correction2 = 1.0 - b2.powf(state.t as f64);

    let params = mlp.params.slices_mut();
    let ms = state.first_moment.slices_mut();
    let vs = state.second_moment.slices_mut();
    for (((p, g), m), v) in params.into_iter().zip(grads.slices()).zip(ms).zip(vs) {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / correction1;
            let v_hat = v[i] / correction2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    mlp.generation += 1;
    Ok(())
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// With probability `epsilon` a uniform index, otherwise [`argmax`].
/// Always consumes one uniform draw, plus one more when exploring.
pub fn epsilon_greedy<R: Rng + ?Sized>(values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..values.len())
    } else {
        argmax(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Observation,
    pub move_action: MoveAction,
    /// Present only when the symbol channel is learned.
    pub symbol: Option<Symbol>,
    pub reward: f64,
    pub next_obs: Observation,
    /// True terminal: the TD target does not bootstrap past it.
    pub done: bool,
}

/// Ring buffer of transitions; once full the oldest entry is overwritten.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument(
                "replay capacity must be positive".into(),
            ));
        }
        Ok(Self {
            items: Vec::with_capacity(capacity),
            capacity,
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, transition: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.cursor] = transition;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_ordered(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            self.cursor
        };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Uniform sampling with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<Transition>> {
        if batch == 0 || self.items.len() < batch {
            return Err(Error::InsufficientData {
                needed: batch.max(1),
                available: self.items.len(),
            });
        }
        Ok((0..batch)
            .map(|_| self.items[rng.gen_range(0..self.items.len())])
            .collect())
    }

    /// Slot indices a call to [`sample`](Self::sample) would pick.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if batch == 0 || self.items.len() < batch {
            return Err(Error::InsufficientData {
                needed: batch.max(1),
                available: self.items.len(),
            });
        }
        Ok((0..batch)
            .map(|_| rng.gen_range(0..self.items.len()))
            .collect())
    }
}

/// Mean squared error over `targets` for the chosen output of each sample,
/// followed by one Adam update. Returns the loss before the update.
pub fn fit_chosen_outputs<I: AsRef<[f64]>>(
    mlp: &mut Mlp,
    adam: &mut AdamState,
    inputs: &[I],
    chosen: &[usize],
    targets: &[f64],
    lr: f64,
) -> Result<f64> {
    let n = inputs.len();
    if n == 0 || chosen.len() != n || targets.len() != n {
        return Err(Error::InvalidArgument(
            "inputs, chosen outputs and targets must be non-empty and equally long".into(),
        ));
    }
    let mut grads = MlpParams::zeros_like(mlp.params());
    let mut loss = 0.0;
    let mut out_grad = vec![0.0; mlp.out_dim()];
    for ((x, &a), &y) in inputs.iter().zip(chosen).zip(targets) {
        if a >= mlp.out_dim() {
            return Err(Error::InvalidArgument(format!(
                "output index {a} out of range"
            )));
        }
        let (out, cache) = mlp.forward(x.as_ref())?;
        let err = out[a] - y;
        loss += err * err;
        out_grad.iter_mut().for_each(|g| *g = 0.0);
        out_grad[a] = 2.0 * err;
        mlp.backward_into(&cache, &out_grad, &mut grads)?;
    }
    grads.scale(1.0 / n as f64);
    adam_step(mlp, &grads, adam, lr)?;
    Ok(loss / n as f64)
}
