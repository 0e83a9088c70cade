//! Dense `w → h → w` autoencoder with a tanh bottleneck, trained by
//! full-batch gradient descent on mean squared reconstruction error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub input: usize,
    pub hidden: usize,
    /// `hidden × input`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `input × hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub training_error_mean: f64,
    pub training_error_std: f64,
}

/// Windows per partial-gradient chunk. Fixed, so the summation order and
/// therefore the trained weights do not depend on the thread count.
const CHUNK: usize = 64;

impl AutoencoderModel {
    /// Seeded uniform(−r, r) weights with `r = sqrt(6/(w+h))`, zero biases.
    pub fn init(input: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = (6.0 / (input + hidden) as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-r..r)).collect() };
        let w1 = draw(hidden * input);
        let w2 = draw(input * hidden);
        Self {
            input,
            hidden,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; input],
            training_error_mean: 0.0,
            training_error_std: 0.0,
        }
    }

    pub fn param_count(&self) -> usize {
        2 * self.input * self.hidden + self.input + self.hidden
    }

    /// `[w1, b1, w2, b2]` flattened.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend(&self.w1);
        p.extend(&self.b1);
        p.extend(&self.w2);
        p.extend(&self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (w, h) = (self.input, self.hidden);
        let (a, rest) = p.split_at(h * w);
        let (b, rest) = rest.split_at(h);
        let (c, d) = rest.split_at(w * h);
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2.copy_from_slice(d);
    }

    fn hidden_act(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.input..(j + 1) * self.input];
                (row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b1[j]).tanh()
            })
            .collect()
    }

    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        let a = self.hidden_act(x);
        (0..self.input)
            .map(|i| {
                let row = &self.w2[i * self.hidden..(i + 1) * self.hidden];
                row.iter().zip(&a).map(|(p, q)| p * q).sum::<f64>() + self.b2[i]
            })
            .collect()
    }

    /// Mean squared reconstruction error of one window.
    pub fn score(&self, x: &[f64]) -> f64 {
        let y = self.reconstruct(x);
        y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / self.input as f64
    }

    /// Mean of per-window scores.
    pub fn loss(&self, windows: &[Vec<f64>]) -> f64 {
        windows.iter().map(|x| self.score(x)).sum::<f64>() / windows.len() as f64
    }

    /// Loss and its gradient with respect to [`params`](Self::params).
    pub fn loss_and_gradient(&self, windows: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let n = windows.len();
        let chunks = n.div_ceil(CHUNK);
        let partials = par::map_range(chunks, |c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            self.chunk_gradient(&windows[lo..hi])
        });
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.param_count()];
        for (l, g) in partials {
            loss += l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        let scale = 1.0 / n as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        (loss * scale, grad)
    }

    /// Unnormalized loss sum and gradient sum over a chunk.
    fn chunk_gradient(&self, windows: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let (w, h) = (self.input, self.hidden);
        let mut g = vec![0.0; self.param_count()];
        let (gw1, rest) = g.split_at_mut(h * w);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gw2, gb2) = rest.split_at_mut(w * h);
        let mut loss = 0.0;
        let mut dy = vec![0.0; w];
        let mut dz = vec![0.0; h];
        for x in windows {
            let a = self.hidden_act(x);
            for i in 0..w {
                let row = &self.w2[i * h..(i + 1) * h];
                let y = row.iter().zip(&a).map(|(p, q)| p * q).sum::<f64>() + self.b2[i];
                let e = y - x[i];
                loss += e * e / w as f64;
                dy[i] = 2.0 * e / w as f64;
            }
            for i in 0..w {
                gb2[i] += dy[i];
                for j in 0..h {
                    gw2[i * h + j] += dy[i] * a[j];
                }
            }
            for j in 0..h {
                let back: f64 = (0..w).map(|i| self.w2[i * h + j] * dy[i]).sum();
                dz[j] = back * (1.0 - a[j] * a[j]);
            }
            for j in 0..h {
                gb1[j] += dz[j];
                for k in 0..w {
                    gw1[j * w + k] += dz[j] * x[k];
                }
            }
        }
        (loss, g)
    }
}

#[derive(Debug, Clone)]
pub struct TrainedAutoencoder {
    pub model: AutoencoderModel,
    /// Loss before training and after each epoch.
    pub loss_history: Vec<f64>,
}

pub fn ae_train(windows: &[Vec<f64>], hidden: usize, epochs: usize, learning_rate: f64, seed: u64) -> Result<AutoencoderModel> {
    ae_train_traced(windows, hidden, epochs, learning_rate, seed).map(|t| t.model)
}

pub fn ae_train_traced(
    windows: &[Vec<f64>],
    hidden: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<TrainedAutoencoder> {
    if windows.len() < 10 {
        return Err(Error::invalid("autoencoder needs at least 10 training windows"));
    }
    let w = windows[0].len();
    if windows.iter().any(|x| x.len() != w) {
        return Err(Error::invalid("autoencoder windows differ in length"));
    }
    if hidden == 0 || hidden >= w {
        return Err(Error::invalid(format!("autoencoder needs 0 < hidden ({hidden}) < input ({w})")));
    }
    if !(learning_rate > 0.0) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    let mut model = AutoencoderModel::init(w, hidden, seed);
    let mut history = Vec::with_capacity(epochs + 1);
    let mut params = model.params();
    for epoch in 0..epochs {
        let (loss, grad) = model.loss_and_gradient(windows);
        if !loss.is_finite() {
            return Err(Error::numeric(format!("autoencoder loss is not finite at epoch {epoch}")));
        }
        history.push(loss);
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= learning_rate * g;
        }
        model.set_params(&params);
    }
    let scores: Vec<f64> = par::map_slice(windows, |x| model.score(x));
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    if !mean.is_finite() {
        return Err(Error::numeric(format!("autoencoder loss is not finite at epoch {epochs}")));
    }
    history.push(mean);
    model.training_error_mean = mean;
    model.training_error_std = (scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / scores.len() as f64).sqrt();
    Ok(TrainedAutoencoder {
        model,
        loss_history: history,
    })
}

pub fn ae_score(model: &AutoencoderModel, window: &[f64]) -> f64 {
    model.score(window)
}
