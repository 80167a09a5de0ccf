//! Fully connected autoencoder trained with mini-batch Adam on mean squared
//! reconstruction error.
//!
//! The encoder maps `p → h1 → … → k` and the decoder mirrors it back to `p`.
//! Hidden layers use the configured activation; the latent and output layers
//! are linear.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(s) => {
                if z > 0.0 {
                    z
                } else {
                    s * z
                }
            }
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(s) => {
                if z > 0.0 {
                    1.0
                } else {
                    s
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Encoder hidden widths; the decoder uses them in reverse.
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 256,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            hidden: vec![30, 30],
            activation: Activation::LeakyRelu(0.01),
        }
    }
}

/// One affine layer, `out = act(W·in + b)` with `W` stored `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    /// Weights and biases uniform in `±1/√inputs` (the usual `Linear`
    /// default). Non-zero biases keep a dead upstream layer from parking
    /// every downstream pre-activation exactly on the ReLU kink.
    fn init<R: Rng>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = 1.0 / (inputs as f64).sqrt();
        Dense {
            inputs,
            outputs,
            weights: (0..inputs * outputs)
                .map(|_| rng.gen_range(-limit..=limit))
                .collect(),
            bias: (0..outputs)
                .map(|_| rng.gen_range(-limit..=limit))
                .collect(),
            activation,
        }
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Forward `rows` inputs; writes pre-activations and activations.
    fn forward(&self, input: &[f64], rows: usize, pre: &mut [f64], out: &mut [f64]) {
        for r in 0..rows {
            let x = &input[r * self.inputs..(r + 1) * self.inputs];
            for o in 0..self.outputs {
                let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                let z = self.bias[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                pre[r * self.outputs + o] = z;
                out[r * self.outputs + o] = self.activation.apply(z);
            }
        }
    }
}

/// Fitted autoencoder plus its training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeModel {
    pub layers: Vec<Dense>,
    /// Number of encoder layers; the latent is the output of layer
    /// `encoder_layers − 1`.
    pub encoder_layers: usize,
    /// Mean squared reconstruction error of each epoch.
    pub training_log: Vec<f64>,
    pub seed: u64,
}

struct Workspace {
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Workspace {
    fn new(model: &AeModel, rows: usize) -> Self {
        let mut act = vec![vec![0.0; rows * model.input_dim()]];
        let mut pre = Vec::new();
        for l in &model.layers {
            pre.push(vec![0.0; rows * l.outputs]);
            act.push(vec![0.0; rows * l.outputs]);
        }
        let widest = model
            .layers
            .iter()
            .map(|l| l.outputs.max(l.inputs))
            .max()
            .unwrap_or(0);
        Workspace {
            pre,
            act,
            delta: vec![0.0; rows * widest],
            delta_prev: vec![0.0; rows * widest],
        }
    }
}

/// Adam optimiser state over a flat parameter vector.
struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(n: usize, cfg: &TrainConfig) -> Self {
        Adam {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn update(&mut self, model: &mut AeModel, grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let mut k = 0;
        for layer in &mut model.layers {
            for p in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                let g = grad[k];
                self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
                self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
                let mhat = self.m[k] / c1;
                let vhat = self.v[k] / c2;
                *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
                k += 1;
            }
        }
    }
}

impl AeModel {
    /// Fresh network `input → hidden… → latent → …hidden → input` with
    /// seeded uniform `±1/√fan_in` weights and biases.
    pub fn init(
        input: usize,
        hidden: &[usize],
        latent: usize,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if input == 0 || latent == 0 || hidden.contains(&0) {
            return Err(Error::arg("layer widths must be positive"));
        }
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(latent);
        widths.extend(hidden.iter().rev());
        widths.push(input);
        let encoder_layers = hidden.len() + 1;
        let n_layers = widths.len() - 1;
        let mut r = rng::seeded(seed);
        let layers = (0..n_layers)
            .map(|l| {
                let linear = l == encoder_layers - 1 || l == n_layers - 1;
                let act = if linear {
                    Activation::Identity
                } else {
                    activation
                };
                Dense::init(widths[l], widths[l + 1], act, &mut r)
            })
            .collect();
        Ok(AeModel {
            layers,
            encoder_layers,
            training_log: Vec::new(),
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[self.encoder_layers - 1].outputs
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    /// All weights and biases, layer by layer (weights row-major, then bias).
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::arg(format!(
                "{} parameters, expected {}",
                flat.len(),
                self.n_params()
            )));
        }
        let mut it = flat.iter();
        for l in &mut self.layers {
            for p in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *p = *it.next().unwrap();
            }
        }
        Ok(())
    }

    fn run(&self, x: &[f64], rows: usize, upto: usize, ws: &mut Workspace) {
        ws.act[0][..x.len()].copy_from_slice(x);
        for l in 0..upto {
            let (before, after) = ws.act.split_at_mut(l + 1);
            let layer = &self.layers[l];
            layer.forward(
                &before[l][..rows * layer.inputs],
                rows,
                &mut ws.pre[l][..rows * layer.outputs],
                &mut after[0][..rows * layer.outputs],
            );
        }
    }

    fn apply_layers(&self, x: &Matrix, upto: usize) -> Result<Matrix> {
        x.check_cols(self.input_dim(), "autoencoder input")?;
        let out_dim = self.layers[upto - 1].outputs;
        let mut out = Matrix::zeros(x.rows(), out_dim);
        const CHUNK: usize = 1024;
        let mut ws = Workspace::new(self, CHUNK.min(x.rows().max(1)));
        let mut start = 0;
        while start < x.rows() {
            let rows = CHUNK.min(x.rows() - start);
            let p = self.input_dim();
            self.run(
                &x.data()[start * p..(start + rows) * p],
                rows,
                upto,
                &mut ws,
            );
            out.data_mut()[start * out_dim..(start + rows) * out_dim]
                .copy_from_slice(&ws.act[upto][..rows * out_dim]);
            start += rows;
        }
        Ok(out)
    }

    /// Latent representation of every row.
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.apply_layers(x, self.encoder_layers)
    }

    /// Full encode–decode pass.
    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        self.apply_layers(x, self.layers.len())
    }

    /// Mean squared reconstruction error over all entries of `x`.
    pub fn loss(&self, x: &Matrix) -> Result<f64> {
        let y = self.reconstruct(x)?;
        let n = x.data().len().max(1) as f64;
        Ok(y.data()
            .iter()
            .zip(x.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n)
    }

    /// Loss on `x` and its gradient with respect to [`AeModel::params`].
    pub fn loss_and_gradient(&self, x: &Matrix) -> Result<(f64, Vec<f64>)> {
        x.check_cols(self.input_dim(), "autoencoder input")?;
        let mut ws = Workspace::new(self, x.rows());
        let mut grad = vec![0.0; self.n_params()];
        let loss = self.backprop(x.data(), x.rows(), &mut ws, &mut grad);
        Ok((loss, grad))
    }

    fn backprop(&self, x: &[f64], rows: usize, ws: &mut Workspace, grad: &mut [f64]) -> f64 {
        let n_layers = self.layers.len();
        self.run(x, rows, n_layers, ws);
        let p = self.input_dim();
        let out = &ws.act[n_layers][..rows * p];
        let scale = 2.0 / (rows * p) as f64;
        let mut loss = 0.0;
        for (i, (o, t)) in out.iter().zip(x).enumerate() {
            let e = o - t;
            loss += e * e;
            ws.delta[i] = scale * e;
        }
        loss /= (rows * p) as f64;

        // parameter offsets of each layer in the flat vector
        let mut offsets = Vec::with_capacity(n_layers);
        let mut acc = 0;
        for l in &self.layers {
            offsets.push(acc);
            acc += l.n_params();
        }

        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let (ni, no) = (layer.inputs, layer.outputs);
            let pre = &ws.pre[l];
            for (d, z) in ws.delta[..rows * no].iter_mut().zip(pre) {
                *d *= layer.activation.derivative(*z);
            }
            let input = &ws.act[l];
            let (gw, gb) = grad[offsets[l]..offsets[l] + layer.n_params()].split_at_mut(ni * no);
            for r in 0..rows {
                let d = &ws.delta[r * no..(r + 1) * no];
                let a = &input[r * ni..(r + 1) * ni];
                for o in 0..no {
                    let dv = d[o];
                    gb[o] += dv;
                    for (g, av) in gw[o * ni..(o + 1) * ni].iter_mut().zip(a) {
                        *g += dv * av;
                    }
                }
            }
            if l > 0 {
                let dp = &mut ws.delta_prev[..rows * ni];
                dp.iter_mut().for_each(|v| *v = 0.0);
                for r in 0..rows {
                    let d = &ws.delta[r * no..(r + 1) * no];
                    let out_row = &mut dp[r * ni..(r + 1) * ni];
                    for o in 0..no {
                        let dv = d[o];
                        for (q, w) in out_row.iter_mut().zip(&layer.weights[o * ni..(o + 1) * ni]) {
                            *q += dv * w;
                        }
                    }
                }
                std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
            }
        }
        loss
    }

    /// Train a fresh autoencoder with latent width `k` on the rows of `x`.
    ///
    /// Each epoch visits every row once in a seeded shuffled order, in batches
    /// of `batch_size` (the last batch may be short). Training is a pure
    /// function of `(x, k, config)`.
    pub fn fit(x: &Matrix, k: usize, config: &TrainConfig) -> Result<Self> {
        if config.epochs == 0 || config.batch_size == 0 {
            return Err(Error::arg("epochs and batch size must be at least 1"));
        }
        if x.rows() == 0 {
            return Err(Error::arg("cannot train on zero rows"));
        }
        let mut model = AeModel::init(x.cols(), &config.hidden, k, config.activation, config.seed)?;
        let mut shuffle = rng::seeded(rng::derive_seed(config.seed, 1));
        let mut adam = Adam::new(model.n_params(), config);
        let p = x.cols();
        let bs = config.batch_size.min(x.rows());
        let mut ws = Workspace::new(&model, bs);
        let mut grad = vec![0.0; model.n_params()];
        let mut batch = vec![0.0; bs * p];
        let mut order: Vec<usize> = (0..x.rows()).collect();

        for epoch in 0..config.epochs {
            order.shuffle(&mut shuffle);
            let mut total = 0.0;
            for chunk in order.chunks(bs) {
                for (slot, &i) in chunk.iter().enumerate() {
                    batch[slot * p..(slot + 1) * p].copy_from_slice(x.row(i));
                }
                grad.iter_mut().for_each(|g| *g = 0.0);
                let loss =
                    model.backprop(&batch[..chunk.len() * p], chunk.len(), &mut ws, &mut grad);
                if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::TrainingDiverged { epoch });
                }
                total += loss * chunk.len() as f64;
                adam.update(&mut model, &grad);
            }
            model.training_log.push(total / x.rows() as f64);
        }
        Ok(model)
    }
}
