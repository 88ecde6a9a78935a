//! Stacked LSTM regressor trained with Adam on sliding windows of scaled closes.
//!
//! Layout: LSTM(hidden1, full sequence) -> LSTM(hidden2, last state) ->
//! Dense(dense, identity) -> Dense(1, identity). LSTM weights are stored as a
//! row-major (4H x (I + H)) matrix over the concatenation [x_t, h_{t-1}], with
//! gate rows ordered input, forget, cell, output.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{Alphabet, ScalingMeta, SignalSeries};

pub const DEFAULT_LAG: usize = 39;
pub const CLOSE_COLUMN: &str = "close";

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub input_size: usize,
    pub hidden_size: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub input_size: usize,
    pub output_size: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
struct StepCache {
    /// [x_t, h_{t-1}]
    z: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmLayer {
    fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let cols = input_size + hidden_size;
        Self { input_size, hidden_size, weight: vec![0.0; 4 * hidden_size * cols], bias: vec![0.0; 4 * hidden_size] }
    }

    fn init(input_size: usize, hidden_size: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut layer = Self::zeros(input_size, hidden_size);
        let bound = 1.0 / ((input_size + hidden_size) as f64).sqrt();
        layer.weight.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
        layer.bias[hidden_size..2 * hidden_size].iter_mut().for_each(|b| *b = 1.0);
        layer
    }

    /// Runs the whole sequence; returns hidden states per step and the caches.
    fn forward(&self, xs: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<StepCache>) {
        let h_size = self.hidden_size;
        let cols = self.input_size + h_size;
        let mut h = vec![0.0; h_size];
        let mut c = vec![0.0; h_size];
        let mut hs = Vec::with_capacity(xs.len());
        let mut caches = Vec::with_capacity(xs.len());
        for x in xs {
            let mut z = Vec::with_capacity(cols);
            z.extend_from_slice(x);
            z.extend_from_slice(&h);
            let mut a = self.bias.clone();
            for (r, ar) in a.iter_mut().enumerate() {
                let row = &self.weight[r * cols..(r + 1) * cols];
                *ar += row.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>();
            }
            let i: Vec<f64> = a[..h_size].iter().map(|&v| sigmoid(v)).collect();
            let f: Vec<f64> = a[h_size..2 * h_size].iter().map(|&v| sigmoid(v)).collect();
            let g: Vec<f64> = a[2 * h_size..3 * h_size].iter().map(|v| v.tanh()).collect();
            let o: Vec<f64> = a[3 * h_size..].iter().map(|&v| sigmoid(v)).collect();
            let c_prev = c.clone();
            for k in 0..h_size {
                c[k] = f[k] * c_prev[k] + i[k] * g[k];
            }
            let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            for k in 0..h_size {
                h[k] = o[k] * tanh_c[k];
            }
            hs.push(h.clone());
            caches.push(StepCache { z, c_prev, i, f, g, o, tanh_c });
        }
        (hs, caches)
    }

    /// BPTT. `dh_out[t]` is the loss gradient flowing into h_t from above.
    /// Accumulates into `grad` and returns the gradient w.r.t. each input x_t.
    fn backward(&self, caches: &[StepCache], dh_out: &[Vec<f64>], grad: &mut LstmLayer) -> Vec<Vec<f64>> {
        let h_size = self.hidden_size;
        let cols = self.input_size + h_size;
        let mut dh_next = vec![0.0; h_size];
        let mut dc_next = vec![0.0; h_size];
        let mut dxs = vec![Vec::new(); caches.len()];
        let mut da = vec![0.0; 4 * h_size];
        for t in (0..caches.len()).rev() {
            let s = &caches[t];
            for k in 0..h_size {
                let dh = dh_out[t][k] + dh_next[k];
                let d_o = dh * s.tanh_c[k];
                let dc = dc_next[k] + dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                let di = dc * s.g[k];
                let dg = dc * s.i[k];
                let df = dc * s.c_prev[k];
                dc_next[k] = dc * s.f[k];
                da[k] = di * s.i[k] * (1.0 - s.i[k]);
                da[h_size + k] = df * s.f[k] * (1.0 - s.f[k]);
                da[2 * h_size + k] = dg * (1.0 - s.g[k] * s.g[k]);
                da[3 * h_size + k] = d_o * s.o[k] * (1.0 - s.o[k]);
            }
            let mut dz = vec![0.0; cols];
            for (r, &dar) in da.iter().enumerate() {
                grad.bias[r] += dar;
                let row = &self.weight[r * cols..(r + 1) * cols];
                let grow = &mut grad.weight[r * cols..(r + 1) * cols];
                for j in 0..cols {
                    grow[j] += dar * s.z[j];
                    dz[j] += dar * row[j];
                }
            }
            dh_next.copy_from_slice(&dz[self.input_size..]);
            dz.truncate(self.input_size);
            dxs[t] = dz;
        }
        dxs
    }
}

impl DenseLayer {
    fn zeros(input_size: usize, output_size: usize) -> Self {
        Self { input_size, output_size, weight: vec![0.0; input_size * output_size], bias: vec![0.0; output_size] }
    }

    fn init(input_size: usize, output_size: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut layer = Self::zeros(input_size, output_size);
        let bound = 1.0 / (input_size as f64).sqrt();
        layer.weight.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
        layer
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.output_size)
            .map(|r| {
                let row = &self.weight[r * self.input_size..(r + 1) * self.input_size];
                self.bias[r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    fn backward(&self, x: &[f64], dy: &[f64], grad: &mut DenseLayer) -> Vec<f64> {
        let mut dx = vec![0.0; self.input_size];
        for (r, &d) in dy.iter().enumerate() {
            grad.bias[r] += d;
            let row = &self.weight[r * self.input_size..(r + 1) * self.input_size];
            let grow = &mut grad.weight[r * self.input_size..(r + 1) * self.input_size];
            for j in 0..self.input_size {
                grow[j] += d * x[j];
                dx[j] += d * row[j];
            }
        }
        dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmArchitecture {
    pub hidden1: usize,
    pub hidden2: usize,
    pub dense: usize,
}

impl Default for LstmArchitecture {
    fn default() -> Self {
        Self { hidden1: 128, hidden2: 64, dense: 25 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub lstm1: LstmLayer,
    pub lstm2: LstmLayer,
    pub dense1: DenseLayer,
    pub dense2: DenseLayer,
}

pub struct ForwardCache {
    cache1: Vec<StepCache>,
    h1: Vec<Vec<f64>>,
    cache2: Vec<StepCache>,
    h2_last: Vec<f64>,
    d1: Vec<f64>,
    pub prediction: f64,
}

const TENSOR_NAMES: [&str; 8] = [
    "lstm1.weight",
    "lstm1.bias",
    "lstm2.weight",
    "lstm2.bias",
    "dense1.weight",
    "dense1.bias",
    "dense2.weight",
    "dense2.bias",
];

impl LstmModel {
    pub fn zeros(arch: LstmArchitecture) -> Self {
        Self {
            lstm1: LstmLayer::zeros(1, arch.hidden1),
            lstm2: LstmLayer::zeros(arch.hidden1, arch.hidden2),
            dense1: DenseLayer::zeros(arch.hidden2, arch.dense),
            dense2: DenseLayer::zeros(arch.dense, 1),
        }
    }

    pub fn init(arch: LstmArchitecture, seed: u64) -> Result<Self> {
        if arch.hidden1 == 0 || arch.hidden2 == 0 || arch.dense == 0 {
            return Err(Error::invalid("LSTM layer sizes must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            lstm1: LstmLayer::init(1, arch.hidden1, &mut rng),
            lstm2: LstmLayer::init(arch.hidden1, arch.hidden2, &mut rng),
            dense1: DenseLayer::init(arch.hidden2, arch.dense, &mut rng),
            dense2: DenseLayer::init(arch.dense, 1, &mut rng),
        })
    }

    pub fn architecture(&self) -> LstmArchitecture {
        LstmArchitecture { hidden1: self.lstm1.hidden_size, hidden2: self.lstm2.hidden_size, dense: self.dense1.output_size }
    }

    pub fn tensors(&self) -> [&Vec<f64>; 8] {
        [
            &self.lstm1.weight,
            &self.lstm1.bias,
            &self.lstm2.weight,
            &self.lstm2.bias,
            &self.dense1.weight,
            &self.dense1.bias,
            &self.dense2.weight,
            &self.dense2.bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 8] {
        [
            &mut self.lstm1.weight,
            &mut self.lstm1.bias,
            &mut self.lstm2.weight,
            &mut self.lstm2.bias,
            &mut self.dense1.weight,
            &mut self.dense1.bias,
            &mut self.dense2.weight,
            &mut self.dense2.bias,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn forward(&self, window: &[f64]) -> Result<ForwardCache> {
        if window.is_empty() {
            return Err(Error::invalid("empty input window"));
        }
        let inputs: Vec<Vec<f64>> = window.iter().map(|&v| vec![v]).collect();
        let (h1, cache1) = self.lstm1.forward(&inputs);
        let (h2, cache2) = self.lstm2.forward(&h1);
        let h2_last = h2.last().expect("non-empty").clone();
        let d1 = self.dense1.forward(&h2_last);
        let prediction = self.dense2.forward(&d1)[0];
        Ok(ForwardCache { cache1, h1, cache2, h2_last, d1, prediction })
    }

    pub fn predict(&self, window: &[f64]) -> Result<f64> {
        Ok(self.forward(window)?.prediction)
    }

    /// Gradient of the squared error (prediction - target)^2 for every parameter.
    pub fn backward(&self, cache: &ForwardCache, target: f64) -> LstmModel {
        let mut grad = LstmModel::zeros(self.architecture());
        let dy = [2.0 * (cache.prediction - target)];
        let dd1 = self.dense2.backward(&cache.d1, &dy, &mut grad.dense2);
        let dh2 = self.dense1.backward(&cache.h2_last, &dd1, &mut grad.dense1);
        let steps = cache.h1.len();
        let mut dh2_seq = vec![vec![0.0; self.lstm2.hidden_size]; steps];
        dh2_seq[steps - 1] = dh2;
        let dh1 = self.lstm2.backward(&cache.cache2, &dh2_seq, &mut grad.lstm2);
        self.lstm1.backward(&cache.cache1, &dh1, &mut grad.lstm1);
        grad
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            architecture: self.architecture(),
            tensors: TENSOR_NAMES.iter().zip(self.tensors()).map(|(n, t)| (n.to_string(), t.clone())).collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(json)?;
        let mut model = LstmModel::zeros(file.architecture);
        for (name, slot) in TENSOR_NAMES.iter().zip(model.tensors_mut()) {
            let t = file.tensors.get(*name).ok_or_else(|| Error::invalid(format!("missing tensor {name}")))?;
            if t.len() != slot.len() {
                return Err(Error::invalid(format!("tensor {name} has {} values, expected {}", t.len(), slot.len())));
            }
            slot.copy_from_slice(t);
        }
        Ok(model)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    architecture: LstmArchitecture,
    tensors: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl WindowDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn extend(&mut self, other: WindowDataset) {
        self.inputs.extend(other.inputs);
        self.targets.extend(other.targets);
    }
}

pub fn build_windows(values: &[f64], lag: usize) -> Result<WindowDataset> {
    if lag == 0 {
        return Err(Error::invalid("window lag must be positive"));
    }
    if values.len() <= lag {
        return Err(Error::insufficient(lag + 1, values.len()));
    }
    let count = values.len() - lag;
    Ok(WindowDataset {
        inputs: (0..count).map(|i| values[i..i + lag].to_vec()).collect(),
        targets: (0..count).map(|i| values[i + lag]).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 5, batch_size: 1, learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, seed: 0 }
    }
}

struct Adam {
    m: LstmModel,
    v: LstmModel,
    step: i32,
}

impl Adam {
    fn new(arch: LstmArchitecture) -> Self {
        Self { m: LstmModel::zeros(arch), v: LstmModel::zeros(arch), step: 0 }
    }

    fn update(&mut self, model: &mut LstmModel, grad: &LstmModel, cfg: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        let params = model.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in params.into_iter().zip(grad.tensors()).zip(ms).zip(vs) {
            for k in 0..p.len() {
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedLstm {
    pub model: LstmModel,
    /// Mean squared error per epoch, measured during the pass.
    pub epoch_losses: Vec<f64>,
}

pub fn train(dataset: &WindowDataset, arch: LstmArchitecture, config: &TrainConfig) -> Result<TrainedLstm> {
    if dataset.is_empty() {
        return Err(Error::insufficient(1, 0));
    }
    if config.epochs == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::invalid("training needs epochs >= 1 and a positive learning rate"));
    }
    if config.batch_size != 1 {
        return Err(Error::invalid("only batch_size 1 is supported"));
    }
    let mut model = LstmModel::init(arch, config.seed)?;
    let mut adam = Adam::new(arch);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        for (sample, (x, &y)) in dataset.inputs.iter().zip(&dataset.targets).enumerate() {
            let cache = model.forward(x)?;
            let loss = (cache.prediction - y).powi(2);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, sample });
            }
            total += loss;
            let grad = model.backward(&cache, y);
            adam.update(&mut model, &grad, config);
        }
        epoch_losses.push(total / dataset.len() as f64);
    }
    Ok(TrainedLstm { model, epoch_losses })
}

/// Signals from predicted scaled closes: 1 iff ln(predicted / prior close) > 0.
/// `prior_closes[i]` is the last actual close inside window `i`.
pub fn predict_signals(
    model: &LstmModel,
    windows: &[Vec<f64>],
    scaling: &ScalingMeta,
    prior_closes: &[f64],
    dates: &[NaiveDate],
) -> Result<SignalSeries> {
    if windows.len() != prior_closes.len() || windows.len() != dates.len() {
        return Err(Error::invalid("windows, prior closes and dates must align"));
    }
    let mut values = Vec::with_capacity(windows.len());
    for (w, &prior) in windows.iter().zip(prior_closes) {
        let scaled = model.predict(w)?;
        let price = scaling
            .invert_value(CLOSE_COLUMN, scaled)
            .ok_or_else(|| Error::invalid("scaler metadata has no close column"))?;
        values.push(signal_from_price(price, prior));
    }
    SignalSeries::new(dates.to_vec(), values, Alphabet::Binary)
}

/// 1 iff the log return from `prior` to `predicted` is positive. A non-positive
/// predicted price is treated as a down move.
pub fn signal_from_price(predicted: f64, prior: f64) -> i8 {
    let up = predicted > 0.0 && (predicted / prior).ln() > 0.0;
    Alphabet::Binary.code(up)
}
