//! Classifiers (softmax regression, fully-connected ReLU networks), losses
//! with exact gradients, and first-order optimizers.
//!
//! Both model kinds share one layered representation: softmax regression is
//! a single linear layer, the MLP stacks ReLU hidden layers with an identity
//! output layer. The softmax itself lives in the loss, so `forward` returns
//! raw logits.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::{softmax, SoftLabel};
use crate::error::{Error, Result};

/// Which classifier architecture to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Softmax regression (one linear layer).
    Logreg,
    /// Two ReLU hidden layers of 128 units each.
    Mlp2,
}

/// One affine layer. `w` is out×in; ReLU applies on hidden layers only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub relu: bool,
    pub use_bias: bool,
}

/// A layered classifier mapping d-vectors to k logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub layers: Vec<Layer>,
    pub kind: ModelKind,
}

/// Parameter gradients, same shapes as the classifier's layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

impl Gradients {
    fn zeros_like(model: &Classifier) -> Self {
        Gradients {
            w: model.layers.iter().map(|l| Array2::zeros(l.w.dim())).collect(),
            b: model.layers.iter().map(|l| Array1::zeros(l.b.len())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|g| g.iter().all(|v| v.is_finite()))
            && self.b.iter().all(|g| g.iter().all(|v| v.is_finite()))
    }

    /// Scale all gradients in place (used to average over a batch).
    pub fn scale(&mut self, s: f64) {
        for g in &mut self.w {
            *g *= s;
        }
        for g in &mut self.b {
            *g *= s;
        }
    }
}

fn init_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let bound = 1.0 / (cols as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

fn init_vector(len: usize, fan_in: usize, rng: &mut impl Rng) -> Array1<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array1::from_shape_fn(len, |_| rng.gen_range(-bound..bound))
}

impl Classifier {
    /// Softmax regression with uniform ±1/√d initialization.
    pub fn new_logreg(d: usize, k: usize, use_bias: bool, rng: &mut impl Rng) -> Self {
        let layer = Layer {
            w: init_matrix(k, d, rng),
            b: if use_bias {
                init_vector(k, d, rng)
            } else {
                Array1::zeros(k)
            },
            relu: false,
            use_bias,
        };
        Classifier {
            layers: vec![layer],
            kind: ModelKind::Logreg,
        }
    }

    /// ReLU MLP with the given hidden sizes and an identity output layer.
    pub fn new_mlp(d: usize, hidden: &[usize], k: usize, rng: &mut impl Rng) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = d;
        for &h in hidden {
            layers.push(Layer {
                w: init_matrix(h, fan_in, rng),
                b: init_vector(h, fan_in, rng),
                relu: true,
                use_bias: true,
            });
            fan_in = h;
        }
        layers.push(Layer {
            w: init_matrix(k, fan_in, rng),
            b: init_vector(k, fan_in, rng),
            relu: false,
            use_bias: true,
        });
        Classifier {
            layers,
            kind: ModelKind::Mlp2,
        }
    }

    /// Build the architecture selected by `kind` (mlp2 = hidden sizes 128,128).
    pub fn new(kind: ModelKind, d: usize, k: usize, rng: &mut impl Rng) -> Self {
        Classifier::new_with_bias(kind, d, k, true, rng)
    }

    /// Like [`Classifier::new`], with the bias term optional for the linear
    /// model (a bias-free softmax regression has all decision boundaries
    /// through the origin).
    pub fn new_with_bias(
        kind: ModelKind,
        d: usize,
        k: usize,
        bias: bool,
        rng: &mut impl Rng,
    ) -> Self {
        match kind {
            ModelKind::Logreg => Classifier::new_logreg(d, k, bias, rng),
            ModelKind::Mlp2 => Classifier::new_mlp(d, &[128, 128], k, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").w.nrows()
    }

    /// Logits for one input.
    pub fn forward(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut a = x.to_owned();
        for layer in &self.layers {
            a = layer.w.dot(&a);
            if layer.use_bias {
                a += &layer.b;
            }
            if layer.relu {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        Ok(a)
    }

    /// Logits for a batch of inputs (rows).
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut a = x.to_owned();
        for layer in &self.layers {
            a = a.dot(&layer.w.t());
            if layer.use_bias {
                a += &layer.b;
            }
            if layer.relu {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        Ok(a)
    }

    /// Activations of the last hidden layer (the input itself for logreg).
    pub fn penultimate(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut a = x.to_owned();
        for layer in &self.layers[..self.layers.len() - 1] {
            a = layer.w.dot(&a);
            if layer.use_bias {
                a += &layer.b;
            }
            if layer.relu {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        Ok(a)
    }

    /// Mean loss over the batch and its parameter gradients.
    ///
    /// `x` is n×d, `targets` n×k. Gradients are averaged over the batch.
    pub fn backward_batch(
        &self,
        x: ArrayView2<f64>,
        targets: ArrayView2<f64>,
        loss: LossKind,
    ) -> Result<(f64, Gradients)> {
        let n = x.nrows();
        if targets.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: targets.nrows(),
            });
        }
        // Forward pass, keeping post-activation values per layer.
        let mut activations: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        for layer in &self.layers {
            let mut a = activations.last().unwrap().dot(&layer.w.t());
            if layer.use_bias {
                a += &layer.b;
            }
            if layer.relu {
                a.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(a);
        }
        let logits = activations.last().unwrap();

        let mut total = 0.0;
        let mut delta = Array2::<f64>::zeros(logits.dim());
        for i in 0..n {
            let (l, g) = match loss {
                LossKind::CrossEntropy => cross_entropy(logits.row(i), targets.row(i)),
                LossKind::Mse => mse_loss(logits.row(i), targets.row(i)),
            };
            total += l;
            delta.row_mut(i).assign(&g);
        }
        total /= n as f64;
        delta /= n as f64;

        let mut grads = Gradients::zeros_like(self);
        // Backward pass: delta holds dL/d(post-activation of layer li).
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            if layer.relu {
                // ReLU'(0) = 0: mask where the stored activation is positive.
                let act = &activations[li + 1];
                delta.zip_mut_with(act, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            grads.w[li] = delta.t().dot(&activations[li]);
            if layer.use_bias {
                grads.b[li] = delta.sum_axis(Axis(0));
            }
            if li > 0 {
                delta = delta.dot(&layer.w);
            }
        }
        Ok((total, grads))
    }

    /// Gradient of the per-sample loss with respect to the input.
    pub fn input_gradient(
        &self,
        x: ArrayView1<f64>,
        target: ArrayView1<f64>,
        loss: LossKind,
    ) -> Result<Array1<f64>> {
        let mut activations: Vec<Array1<f64>> = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        for layer in &self.layers {
            let mut a = layer.w.dot(activations.last().unwrap());
            if layer.use_bias {
                a += &layer.b;
            }
            if layer.relu {
                a.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(a);
        }
        let logits = activations.last().unwrap();
        let (_, g) = match loss {
            LossKind::CrossEntropy => cross_entropy(logits.view(), target),
            LossKind::Mse => mse_loss(logits.view(), target),
        };
        let mut delta = g;
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            if layer.relu {
                let act = &activations[li + 1];
                delta.zip_mut_with(act, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = layer.w.t().dot(&delta);
        }
        Ok(delta)
    }

    /// Argmax-logit class prediction; ties go to the lowest index.
    pub fn predict(&self, x: ArrayView1<f64>) -> Result<usize> {
        let logits = self.forward(x)?;
        let mut best = 0;
        for c in 1..logits.len() {
            if logits[c] > logits[best] {
                best = c;
            }
        }
        Ok(best)
    }
}

/// Loss applied to the logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    Mse,
}

/// Cross-entropy of logits against a simplex target, with its gradient with
/// respect to the logits (softmax − target). Log-sum-exp stabilized.
pub fn cross_entropy(logits: ArrayView1<f64>, target: ArrayView1<f64>) -> (f64, Array1<f64>) {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
    let loss: f64 = target
        .iter()
        .zip(logits.iter())
        .map(|(&t, &z)| t * (lse - z))
        .sum();
    let probs = softmax(logits.as_slice().expect("contiguous"));
    let grad = &probs - &target;
    (loss, grad)
}

/// Cross-entropy against a [`SoftLabel`].
pub fn cross_entropy_soft(logits: ArrayView1<f64>, target: &SoftLabel) -> (f64, Array1<f64>) {
    cross_entropy(logits, target.0.view())
}

/// Squared L2 distance ‖pred − target‖² (no 1/k factor) and its gradient
/// with respect to `pred`.
pub fn mse_loss(pred: ArrayView1<f64>, target: ArrayView1<f64>) -> (f64, Array1<f64>) {
    let diff = &pred.to_owned() - &target;
    let loss = diff.dot(&diff);
    (loss, diff * 2.0)
}

/// Optimizer family with its fixed hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptKind {
    SgdMomentum { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptKind {
    pub fn sgd() -> Self {
        OptKind::SgdMomentum { momentum: 0.9 }
    }

    pub fn adam() -> Self {
        OptKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer configuration plus its mutable state (momentum/moment buffers).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptKind,
    pub learning_rate: f64,
    /// Decoupled weight decay applied to weight matrices (not biases).
    pub weight_decay: f64,
    /// Epochs at which the learning rate is multiplied by `decay_factor`.
    pub milestones: Vec<usize>,
    pub decay_factor: f64,
    #[serde(skip)]
    velocity_w: Vec<Array2<f64>>,
    #[serde(skip)]
    velocity_b: Vec<Array1<f64>>,
    #[serde(skip)]
    second_w: Vec<Array2<f64>>,
    #[serde(skip)]
    second_b: Vec<Array1<f64>>,
    #[serde(skip)]
    step_count: u64,
}

impl OptimizerState {
    pub fn new(kind: OptKind, learning_rate: f64, weight_decay: f64) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {learning_rate}"
            )));
        }
        Ok(OptimizerState {
            kind,
            learning_rate,
            weight_decay,
            milestones: Vec::new(),
            decay_factor: 0.1,
            velocity_w: Vec::new(),
            velocity_b: Vec::new(),
            second_w: Vec::new(),
            second_b: Vec::new(),
            step_count: 0,
        })
    }

    /// Multi-step decay milestones at the given fractions of total epochs.
    pub fn with_milestones_at(mut self, fractions: &[f64], epochs: usize, factor: f64) -> Self {
        self.milestones = fractions
            .iter()
            .map(|f| ((epochs as f64) * f).floor() as usize)
            .collect();
        self.decay_factor = factor;
        self
    }

    /// Learning rate in effect at the given epoch (0-based).
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        let hits = self.milestones.iter().filter(|&&m| epoch >= m).count();
        self.learning_rate * self.decay_factor.powi(hits as i32)
    }

    /// Apply one update. `epoch` selects the scheduled learning rate.
    pub fn step(&mut self, model: &mut Classifier, grads: &Gradients, epoch: usize) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::Numerical(
                "non-finite gradient encountered; aborting".into(),
            ));
        }
        if self.velocity_w.len() != model.layers.len() {
            self.velocity_w = model.layers.iter().map(|l| Array2::zeros(l.w.dim())).collect();
            self.velocity_b = model.layers.iter().map(|l| Array1::zeros(l.b.len())).collect();
            self.second_w = self.velocity_w.clone();
            self.second_b = self.velocity_b.clone();
            self.step_count = 0;
        }
        let lr = self.lr_at_epoch(epoch);
        self.step_count += 1;
        match self.kind {
            OptKind::SgdMomentum { momentum } => {
                for (li, layer) in model.layers.iter_mut().enumerate() {
                    self.velocity_w[li] = &self.velocity_w[li] * momentum + &grads.w[li];
                    layer.w.scaled_add(-lr, &self.velocity_w[li]);
                    if layer.use_bias {
                        self.velocity_b[li] = &self.velocity_b[li] * momentum + &grads.b[li];
                        layer.b.scaled_add(-lr, &self.velocity_b[li]);
                    }
                }
            }
            OptKind::Adam { beta1, beta2, eps } => {
                let t = self.step_count as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for (li, layer) in model.layers.iter_mut().enumerate() {
                    self.velocity_w[li] =
                        &self.velocity_w[li] * beta1 + &(&grads.w[li] * (1.0 - beta1));
                    self.second_w[li] =
                        &self.second_w[li] * beta2 + &(grads.w[li].mapv(|g| g * g) * (1.0 - beta2));
                    let update = (&self.velocity_w[li] / bc1)
                        / &self.second_w[li].mapv(|v| (v / bc2).sqrt() + eps);
                    layer.w.scaled_add(-lr, &update);
                    if layer.use_bias {
                        self.velocity_b[li] =
                            &self.velocity_b[li] * beta1 + &(&grads.b[li] * (1.0 - beta1));
                        self.second_b[li] = &self.second_b[li] * beta2
                            + &(grads.b[li].mapv(|g| g * g) * (1.0 - beta2));
                        let update = (&self.velocity_b[li] / bc1)
                            / &self.second_b[li].mapv(|v| (v / bc2).sqrt() + eps);
                        layer.b.scaled_add(-lr, &update);
                    }
                }
            }
        }
        if self.weight_decay != 0.0 {
            for layer in &mut model.layers {
                let wd = lr * self.weight_decay;
                layer.w.mapv_inplace(|w| w - wd * w);
            }
        }
        Ok(())
    }
}
