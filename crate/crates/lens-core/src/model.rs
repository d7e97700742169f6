//! A small fully-connected classifier with manual backpropagation.
//!
//! Deliberately minimal: dense layers, one activation applied after
//! every layer except the last, softmax cross-entropy, plain SGD.
//! Softplus with a sharpness parameter is the default activation so
//! that input gradients (and the finite-difference Hessian-vector
//! products the attacks build on) are smooth; ReLU is available when a
//! piecewise-linear model is wanted. Training can optionally harden the
//! model with PGD adversarial examples. Checkpoints round-trip through
//! a plain-text format (`TOYNET1`) bit-exactly.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{CoreError, Result};
use crate::io::fmt_sig17;
use crate::map::ImageTensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    /// `ln(1 + exp(beta * z)) / beta`, a smooth ReLU; larger `beta`
    /// hugs the corner tighter.
    Softplus { beta: f64 },
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => z.max(0.0),
            Activation::Softplus { beta } => {
                let t = beta * z;
                // Stable on both tails: ln(1+e^t) = max(t,0) + ln_1p(e^-|t|).
                (t.max(0.0) + (-t.abs()).exp().ln_1p()) / beta
            }
        }
    }

    fn derivative(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus { beta } => {
                // Logistic sigma(beta z).
                let t = beta * z;
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    fn beta_or_zero(&self) -> f64 {
        match *self {
            Activation::Relu => 0.0,
            Activation::Softplus { beta } => beta,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::Softplus { .. } => write!(f, "softplus"),
        }
    }
}

impl FromStr for Activation {
    type Err = CoreError;

    /// Parses `relu` or `softplus` (with the default sharpness 10).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "softplus" => Ok(Activation::Softplus { beta: DEFAULT_SOFTPLUS_BETA }),
            other => Err(CoreError::Model(format!("unknown activation {other:?}"))),
        }
    }
}

pub const DEFAULT_SOFTPLUS_BETA: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    /// `out x in`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
    in_dim: usize,
    out_dim: usize,
}

impl Layer {
    fn affine(&self, input: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(self.in_dim)) {
            for (w, x) in row.iter().zip(input) {
                *o += w * x;
            }
        }
        out
    }

    /// `W^T delta` — propagates a gradient to the layer input.
    fn back(&self, delta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.in_dim];
        for (d, row) in delta.iter().zip(self.weights.chunks_exact(self.in_dim)) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += d * w;
            }
        }
        out
    }
}

/// Dense feed-forward classifier. The last layer emits raw logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyNetwork {
    layers: Vec<Layer>,
    activation: Activation,
}

/// Gaussian-initialised network with layer sizes `dims`
/// (input, hidden..., classes); weights are `N(0, 1/fan_in)`, biases
/// zero, reproducible from `seed`.
pub fn init_network(dims: &[usize], activation: Activation, seed: u64) -> Result<ToyNetwork> {
    if dims.len() < 2 {
        return Err(CoreError::Model("need at least an input and an output layer".into()));
    }
    if dims.contains(&0) {
        return Err(CoreError::Model("layer sizes must be positive".into()));
    }
    if let Activation::Softplus { beta } = activation {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(CoreError::Model("softplus sharpness must be positive".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let layers = dims
        .windows(2)
        .map(|d| {
            let (in_dim, out_dim) = (d[0], d[1]);
            let scale = 1.0 / (in_dim as f64).sqrt();
            Layer {
                weights: (0..in_dim * out_dim)
                    .map(|_| normal.sample(&mut rng) * scale)
                    .collect(),
                bias: vec![0.0; out_dim],
                in_dim,
                out_dim,
            }
        })
        .collect();
    Ok(ToyNetwork { layers, activation })
}

impl ToyNetwork {
    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn n_classes(&self) -> usize {
        self.layers.last().expect("at least one layer").out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(CoreError::Model(format!(
                "input length {} does not match network input {}",
                x.len(),
                self.input_dim()
            )));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(CoreError::NonFinite { what: "network input" });
        }
        Ok(())
    }

    fn check_class(&self, class: usize) -> Result<()> {
        if class >= self.n_classes() {
            return Err(CoreError::Model(format!(
                "class {class} out of range for {} outputs",
                self.n_classes()
            )));
        }
        Ok(())
    }

    /// Pre-activations of every layer; `pre[l]` feeds the activation
    /// (or, for the last layer, is the logit vector).
    fn forward_cache(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act: Vec<f64> = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(&act);
            if l + 1 < self.layers.len() {
                act = z.iter().map(|v| self.activation.apply(*v)).collect();
            }
            pre.push(z);
        }
        pre
    }

    /// Logits for input `x`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward_cache(x).pop().expect("at least one layer"))
    }

    /// Predicted class: highest logit, lowest index on ties.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let logits = self.forward(x)?;
        Ok(argmax(&logits))
    }

    /// Gradient of `logit[class]` with respect to the input, by
    /// backpropagation.
    pub fn grad_input(&self, x: &[f64], class: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.check_class(class)?;
        let pre = self.forward_cache(x);
        let mut delta = vec![0.0; self.n_classes()];
        delta[class] = 1.0;
        Ok(self.backprop_to_input(&pre, delta))
    }

    /// Gradient of the softmax cross-entropy loss at `label` with
    /// respect to the input.
    pub fn loss_grad_input(&self, x: &[f64], label: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.check_class(label)?;
        let pre = self.forward_cache(x);
        let mut delta = softmax(pre.last().expect("layers"));
        delta[label] -= 1.0;
        Ok(self.backprop_to_input(&pre, delta))
    }

    fn backprop_to_input(&self, pre: &[Vec<f64>], mut delta: Vec<f64>) -> Vec<f64> {
        for l in (0..self.layers.len()).rev() {
            let to_prev = self.layers[l].back(&delta);
            if l == 0 {
                return to_prev;
            }
            delta = to_prev
                .iter()
                .zip(&pre[l - 1])
                .map(|(d, z)| d * self.activation.derivative(*z))
                .collect();
        }
        unreachable!("network has at least one layer");
    }

    /// Finite-difference Hessian-vector product of `logit[class]`:
    /// `(grad(x + r d) - grad(x - r d)) / (2 r)`.
    pub fn hvp_fd(&self, x: &[f64], direction: &[f64], class: usize, r: f64) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.check_input(direction)?;
        self.check_class(class)?;
        if !(r.is_finite() && r > 0.0) {
            return Err(CoreError::Model("finite-difference radius must be positive".into()));
        }
        let probe = |sign: f64| -> Vec<f64> {
            x.iter().zip(direction).map(|(a, d)| a + sign * r * d).collect()
        };
        let plus = self.grad_input(&probe(1.0), class)?;
        let minus = self.grad_input(&probe(-1.0), class)?;
        Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * r)).collect())
    }
}

/// Sign for signed-gradient steps; unlike `f64::signum` a zero
/// gradient stays put instead of drifting toward +1.
pub(crate) fn step_sign(g: f64) -> f64 {
    if g > 0.0 {
        1.0
    } else if g < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// `-ln softmax(logits)[label]`, computed as `logsumexp - logit`.
fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// PGD adversarial-training settings (Linf ball).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgdTraining {
    pub epsilon: f64,
    pub steps: usize,
    pub step_size: f64,
}

impl Default for PgdTraining {
    fn default() -> Self {
        PgdTraining { epsilon: 0.3, steps: 40, step_size: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// `Some` trains on PGD adversarial examples instead of clean ones.
    pub pgd: Option<PgdTraining>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 30, batch_size: 32, learning_rate: 0.1, seed: 0, pgd: None }
    }
}

/// Summary returned by [`train`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub final_loss: f64,
    pub train_accuracy: f64,
}

/// Minibatch SGD on softmax cross-entropy. With `cfg.pgd` set, every
/// example is replaced by a PGD adversary (random start in the Linf
/// ball, signed-gradient steps, projection onto the ball and `[0,1]`)
/// before the gradient step — the Madry recipe.
pub fn train(
    net: &mut ToyNetwork,
    images: &[ImageTensor],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if images.is_empty() || images.len() != labels.len() {
        return Err(CoreError::Model(format!(
            "got {} images and {} labels",
            images.len(),
            labels.len()
        )));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(CoreError::Model("epochs and batch_size must be positive".into()));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(CoreError::Model("learning rate must be positive".into()));
    }
    if let Some(p) = &cfg.pgd {
        if !(p.epsilon.is_finite() && p.epsilon >= 0.0)
            || !(p.step_size.is_finite() && p.step_size > 0.0)
        {
            return Err(CoreError::Model("bad PGD training parameters".into()));
        }
    }
    for (i, img) in images.iter().enumerate() {
        if img.len() != net.input_dim() {
            return Err(CoreError::Model(format!(
                "image {i} has {} pixels, network expects {}",
                img.len(),
                net.input_dim()
            )));
        }
        if labels[i] >= net.n_classes() {
            return Err(CoreError::Model(format!("label {} out of range", labels[i])));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut last_loss = f64::NAN;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        // Ramp the adversarial budget over the first half of training;
        // starting at the full budget from a random init stalls at
        // chance level, the curriculum reaches the same final budget.
        let ramp = if cfg.epochs > 1 {
            (epoch as f64 / (cfg.epochs as f64 / 2.0)).min(1.0)
        } else {
            1.0
        };
        let pgd_now = cfg.pgd.as_ref().map(|p| PgdTraining {
            epsilon: p.epsilon * ramp,
            ..*p
        });
        for batch in order.chunks(cfg.batch_size) {
            let mut grad_w: Vec<Vec<f64>> =
                net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
            let mut grad_b: Vec<Vec<f64>> =
                net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect();
            let mut batch_loss = 0.0;

            for &i in batch {
                let clean = images[i].values();
                let example: Vec<f64> = match &pgd_now {
                    None => clean.to_vec(),
                    Some(p) => pgd_example(net, clean, labels[i], p, &mut rng)?,
                };
                batch_loss += accumulate_example(
                    net,
                    &example,
                    labels[i],
                    &mut grad_w,
                    &mut grad_b,
                );
            }

            if !batch_loss.is_finite() {
                return Err(CoreError::Model("training diverged (non-finite loss)".into()));
            }
            last_loss = batch_loss / batch.len() as f64;
            let scale = cfg.learning_rate / batch.len() as f64;
            for (layer, (gw, gb)) in net.layers.iter_mut().zip(grad_w.iter().zip(&grad_b)) {
                for (w, g) in layer.weights.iter_mut().zip(gw) {
                    *w -= scale * g;
                }
                for (b, g) in layer.bias.iter_mut().zip(gb) {
                    *b -= scale * g;
                }
            }
        }
    }

    Ok(TrainReport { final_loss: last_loss, train_accuracy: accuracy(net, images, labels)? })
}

/// Adds one example's loss gradient into the weight/bias accumulators,
/// returning its loss.
fn accumulate_example(
    net: &ToyNetwork,
    x: &[f64],
    label: usize,
    grad_w: &mut [Vec<f64>],
    grad_b: &mut [Vec<f64>],
) -> f64 {
    let pre = net.forward_cache(x);
    let logits = pre.last().expect("layers");
    let loss = cross_entropy(logits, label);

    let mut delta = softmax(logits);
    delta[label] -= 1.0;
    for l in (0..net.layers.len()).rev() {
        let input: Vec<f64> = if l == 0 {
            x.to_vec()
        } else {
            pre[l - 1].iter().map(|z| net.activation.apply(*z)).collect()
        };
        let in_dim = net.layers[l].in_dim;
        for (o, d) in delta.iter().enumerate() {
            grad_b[l][o] += d;
            for (j, inp) in input.iter().enumerate() {
                grad_w[l][o * in_dim + j] += d * inp;
            }
        }
        if l > 0 {
            delta = net.layers[l]
                .back(&delta)
                .iter()
                .zip(&pre[l - 1])
                .map(|(d, z)| d * net.activation.derivative(*z))
                .collect();
        }
    }
    loss
}

fn pgd_example(
    net: &ToyNetwork,
    clean: &[f64],
    label: usize,
    p: &PgdTraining,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut x: Vec<f64> = clean
        .iter()
        .map(|v| (v + rng.gen_range(-p.epsilon..=p.epsilon)).clamp(0.0, 1.0))
        .collect();
    for _ in 0..p.steps {
        let g = net.loss_grad_input(&x, label)?;
        for ((xi, gi), ci) in x.iter_mut().zip(&g).zip(clean) {
            let stepped = *xi + p.step_size * step_sign(*gi);
            *xi = stepped.clamp(ci - p.epsilon, ci + p.epsilon).clamp(0.0, 1.0);
        }
    }
    Ok(x)
}

/// Fraction of examples whose predicted class matches the label.
pub fn accuracy(net: &ToyNetwork, images: &[ImageTensor], labels: &[usize]) -> Result<f64> {
    if images.is_empty() || images.len() != labels.len() {
        return Err(CoreError::Model("empty or mismatched evaluation set".into()));
    }
    let mut hits = 0usize;
    for (img, label) in images.iter().zip(labels) {
        if net.predict(img.values())? == *label {
            hits += 1;
        }
    }
    Ok(hits as f64 / images.len() as f64)
}

/// Writes a `TOYNET1` checkpoint:
///
/// ```text
/// TOYNET1 <n_layers> <activation> <beta>
/// DIMS <out> <in>
/// <out rows of in weights>
/// <bias row>
/// ...repeated per layer
/// ```
pub fn save_network(path: &Path, net: &ToyNetwork) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "TOYNET1 {} {} {}\n",
        net.layers.len(),
        net.activation,
        fmt_sig17(net.activation.beta_or_zero())
    ));
    for layer in &net.layers {
        out.push_str(&format!("DIMS {} {}\n", layer.out_dim, layer.in_dim));
        for row in layer.weights.chunks_exact(layer.in_dim) {
            let line: Vec<String> = row.iter().map(|v| fmt_sig17(*v)).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        let line: Vec<String> = layer.bias.iter().map(|v| fmt_sig17(*v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CoreError::io(path, e))
}

/// Reads a `TOYNET1` checkpoint written by [`save_network`].
pub fn load_network(path: &Path) -> Result<ToyNetwork> {
    let text = fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let mut next_line = |what: &str| -> Result<(usize, &str)> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| CoreError::parse(path, format!("unexpected end of file, expected {what}")))
    };

    let (_, header) = next_line("header")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "TOYNET1" {
        return Err(CoreError::parse(path, "line 1: expected `TOYNET1 <layers> <activation> <beta>`"));
    }
    let n_layers: usize = fields[1]
        .parse()
        .map_err(|_| CoreError::parse(path, format!("line 1: bad layer count {:?}", fields[1])))?;
    if n_layers == 0 {
        return Err(CoreError::parse(path, "line 1: network needs at least one layer"));
    }
    let beta: f64 = fields[3]
        .parse()
        .map_err(|_| CoreError::parse(path, format!("line 1: bad beta {:?}", fields[3])))?;
    let activation = match fields[2] {
        "relu" => Activation::Relu,
        "softplus" => {
            if !(beta.is_finite() && beta > 0.0) {
                return Err(CoreError::parse(path, "line 1: softplus needs positive beta"));
            }
            Activation::Softplus { beta }
        }
        other => return Err(CoreError::parse(path, format!("line 1: unknown activation {other:?}"))),
    };

    let parse_row = |lineno: usize, line: &str, n: usize| -> Result<Vec<f64>> {
        let mut row = Vec::with_capacity(n);
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                CoreError::parse(path, format!("line {lineno}: bad value {tok:?}"))
            })?;
            if !v.is_finite() {
                return Err(CoreError::parse(path, format!("line {lineno}: non-finite value")));
            }
            row.push(v);
        }
        if row.len() != n {
            return Err(CoreError::parse(
                path,
                format!("line {lineno}: expected {n} values, found {}", row.len()),
            ));
        }
        Ok(row)
    };

    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let (lineno, dims_line) = next_line("DIMS")?;
        let f: Vec<&str> = dims_line.split_whitespace().collect();
        if f.len() != 3 || f[0] != "DIMS" {
            return Err(CoreError::parse(path, format!("line {lineno}: expected `DIMS <out> <in>`")));
        }
        let out_dim: usize = f[1]
            .parse()
            .map_err(|_| CoreError::parse(path, format!("line {lineno}: bad out dim")))?;
        let in_dim: usize = f[2]
            .parse()
            .map_err(|_| CoreError::parse(path, format!("line {lineno}: bad in dim")))?;
        if out_dim == 0 || in_dim == 0 {
            return Err(CoreError::parse(path, format!("line {lineno}: zero layer dimension")));
        }
        let mut weights = Vec::with_capacity(out_dim * in_dim);
        for _ in 0..out_dim {
            let (lineno, line) = next_line("weight row")?;
            weights.extend(parse_row(lineno, line, in_dim)?);
        }
        let (lineno, line) = next_line("bias row")?;
        let bias = parse_row(lineno, line, out_dim)?;
        layers.push(Layer { weights, bias, in_dim, out_dim });
    }
    for pair in layers.windows(2) {
        if pair[0].out_dim != pair[1].in_dim {
            return Err(CoreError::parse(path, "consecutive layer dimensions do not chain"));
        }
    }
    if lines.any(|(_, l)| !l.trim().is_empty()) {
        return Err(CoreError::parse(path, "trailing data after last layer"));
    }
    Ok(ToyNetwork { layers, activation })
}
