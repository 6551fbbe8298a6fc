//! Dense, 1-D convolution and batch-norm layers with hand-written backward
//! passes. Matrices are row-major `Vec<f64>`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    pub fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

/// Fully connected layer, `w` is `n_out x n_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    /// Weights and biases uniform in +-1/sqrt(n_in).
    pub fn init(n_in: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        Self {
            n_in,
            n_out,
            w: uniform(rng, n_in * n_out, bound),
            b: uniform(rng, n_out, bound),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_out)
            .map(|o| {
                let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
                self.b[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    /// Accumulates parameter gradients and returns dL/dx.
    pub fn backward(&self, x: &[f64], dy: &[f64], gw: &mut [f64], gb: &mut [f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.n_in];
        for (o, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[o] += d;
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            let grow = &mut gw[o * self.n_in..(o + 1) * self.n_in];
            for i in 0..self.n_in {
                grow[i] += d * x[i];
                dx[i] += d * row[i];
            }
        }
        dx
    }
}

/// Frame-wise convolution with zero "same" padding and no bias (a following
/// batch norm supplies the shift). `w` is `out x in x kernel`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub n_in: usize,
    pub n_out: usize,
    pub kernel: usize,
    pub w: Vec<f64>,
}

impl Conv1d {
    pub fn init(n_in: usize, n_out: usize, kernel: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / ((n_in * kernel) as f64).sqrt();
        Self {
            n_in,
            n_out,
            kernel,
            w: uniform(rng, n_out * n_in * kernel, bound),
        }
    }

    fn wi(&self, o: usize, c: usize, j: usize) -> usize {
        (o * self.n_in + c) * self.kernel + j
    }

    /// `x` is `frames x n_in`; output `frames x n_out`.
    pub fn forward(&self, x: &[f64], frames: usize) -> Vec<f64> {
        let pad = self.kernel / 2;
        let mut y = vec![0.0; frames * self.n_out];
        for t in 0..frames {
            for j in 0..self.kernel {
                let Some(src) = (t + j).checked_sub(pad).filter(|&s| s < frames) else {
                    continue;
                };
                let xin = &x[src * self.n_in..(src + 1) * self.n_in];
                for o in 0..self.n_out {
                    let mut acc = 0.0;
                    for (c, v) in xin.iter().enumerate() {
                        acc += self.w[self.wi(o, c, j)] * v;
                    }
                    y[t * self.n_out + o] += acc;
                }
            }
        }
        y
    }

    pub fn backward(&self, x: &[f64], frames: usize, dy: &[f64], gw: &mut [f64]) -> Vec<f64> {
        let pad = self.kernel / 2;
        let mut dx = vec![0.0; frames * self.n_in];
        for t in 0..frames {
            for j in 0..self.kernel {
                let Some(src) = (t + j).checked_sub(pad).filter(|&s| s < frames) else {
                    continue;
                };
                for o in 0..self.n_out {
                    let d = dy[t * self.n_out + o];
                    if d == 0.0 {
                        continue;
                    }
                    for c in 0..self.n_in {
                        let wi = self.wi(o, c, j);
                        gw[wi] += d * x[src * self.n_in + c];
                        dx[src * self.n_in + c] += d * self.w[wi];
                    }
                }
            }
        }
        dx
    }
}

/// Per-channel batch normalization over every (sample, frame) position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub channels: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

/// Saved train-mode quantities for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Vec<Vec<f64>>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: usize,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
        }
    }

    /// Train mode: normalizes with batch statistics. Each entry of `xs` is a
    /// `frames x channels` block.
    pub fn forward_train(&self, xs: &[Vec<f64>]) -> (Vec<Vec<f64>>, BnCache) {
        let c = self.channels;
        let count: usize = xs.iter().map(|x| x.len() / c).sum();
        let n = count as f64;
        let mut mean = vec![0.0; c];
        for x in xs {
            for (i, v) in x.iter().enumerate() {
                mean[i % c] += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; c];
        for x in xs {
            for (i, v) in x.iter().enumerate() {
                var[i % c] += (v - mean[i % c]).powi(2);
            }
        }
        var.iter_mut().for_each(|v| *v /= n);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let xhat: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| {
                x.iter()
                    .enumerate()
                    .map(|(i, v)| (v - mean[i % c]) * inv_std[i % c])
                    .collect()
            })
            .collect();
        let y = xhat
            .iter()
            .map(|xh| {
                xh.iter()
                    .enumerate()
                    .map(|(i, v)| self.gamma[i % c] * v + self.beta[i % c])
                    .collect()
            })
            .collect();
        (
            y,
            BnCache {
                xhat,
                inv_std,
                mean,
                var,
                count,
            },
        )
    }

    pub fn forward_eval(&self, x: &[f64]) -> Vec<f64> {
        let c = self.channels;
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                let k = i % c;
                self.gamma[k] * (v - self.running_mean[k]) / (self.running_var[k] + BN_EPS).sqrt()
                    + self.beta[k]
            })
            .collect()
    }

    /// Returns dL/dx per block; accumulates into `g_gamma`, `g_beta`.
    pub fn backward(
        &self,
        cache: &BnCache,
        dys: &[Vec<f64>],
        g_gamma: &mut [f64],
        g_beta: &mut [f64],
    ) -> Vec<Vec<f64>> {
        let c = self.channels;
        let n = cache.count as f64;
        let mut sum_dy = vec![0.0; c];
        let mut sum_dy_xhat = vec![0.0; c];
        for (dy, xh) in dys.iter().zip(&cache.xhat) {
            for (i, (d, h)) in dy.iter().zip(xh).enumerate() {
                sum_dy[i % c] += d;
                sum_dy_xhat[i % c] += d * h;
            }
        }
        for k in 0..c {
            g_gamma[k] += sum_dy_xhat[k];
            g_beta[k] += sum_dy[k];
        }
        dys.iter()
            .zip(&cache.xhat)
            .map(|(dy, xh)| {
                dy.iter()
                    .zip(xh)
                    .enumerate()
                    .map(|(i, (d, h))| {
                        let k = i % c;
                        self.gamma[k] * cache.inv_std[k] / n
                            * (n * d - sum_dy[k] - h * sum_dy_xhat[k])
                    })
                    .collect()
            })
            .collect()
    }

    /// Exponential running update; the variance uses the unbiased estimate.
    pub fn update_running(&mut self, cache: &BnCache) {
        let n = cache.count as f64;
        let unbias = if cache.count > 1 { n / (n - 1.0) } else { 1.0 };
        for k in 0..self.channels {
            self.running_mean[k] =
                (1.0 - BN_MOMENTUM) * self.running_mean[k] + BN_MOMENTUM * cache.mean[k];
            self.running_var[k] =
                (1.0 - BN_MOMENTUM) * self.running_var[k] + BN_MOMENTUM * cache.var[k] * unbias;
        }
    }
}
