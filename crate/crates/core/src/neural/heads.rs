//! The two fine-tuning heads: a fully connected stack over pooled embeddings
//! and a conv/batch-norm stack over frame sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Activation, BatchNorm, BnCache, Conv1d, Dense};
use super::{EmbeddingMatrix, NeuralError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    /// Hidden layer widths; a final layer with one output follows.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Drop probability after each hidden activation.
    pub dropout: f64,
}

impl MlpConfig {
    /// 256 -> 16 -> 1 with ReLU and dropout 0.2.
    pub fn standard(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: vec![256, 16],
            activation: Activation::Relu,
            dropout: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpHead {
    pub config: MlpConfig,
    pub layers: Vec<Dense>,
}

#[derive(Debug, Clone)]
struct StackCache {
    /// Input seen by each layer (after dropout for hidden ones).
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
}

impl MlpHead {
    pub fn new(config: MlpConfig, seed: u64) -> Result<Self, NeuralError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_rng(config, &mut rng)
    }

    fn with_rng(config: MlpConfig, rng: &mut ChaCha8Rng) -> Result<Self, NeuralError> {
        if config.input_dim == 0 || config.hidden.contains(&0) {
            return Err(NeuralError::InvalidConfig(
                "layer widths must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(NeuralError::InvalidConfig(format!(
                "dropout {} outside [0, 1)",
                config.dropout
            )));
        }
        let mut dims = vec![config.input_dim];
        dims.extend(&config.hidden);
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| Dense::init(w[0], w[1], rng))
            .collect();
        Ok(Self { config, layers })
    }

    fn forward_sample(&self, x: &[f64], mut dropout: Option<&mut ChaCha8Rng>) -> (f64, StackCache) {
        let last = self.layers.len() - 1;
        let mut cache = StackCache {
            inputs: Vec::new(),
            pre: Vec::new(),
            masks: Vec::new(),
        };
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h);
            cache.inputs.push(h);
            if i == last {
                return (z[0], cache);
            }
            let mut a: Vec<f64> = z.iter().map(|&v| self.config.activation.apply(v)).collect();
            let p = self.config.dropout;
            let mask = match dropout.as_deref_mut() {
                Some(rng) if p > 0.0 => {
                    let keep = 1.0 - p;
                    let m: Vec<f64> = (0..a.len())
                        .map(|_| {
                            if rng.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    a.iter_mut().zip(&m).for_each(|(v, s)| *v *= s);
                    Some(m)
                }
                _ => None,
            };
            cache.pre.push(z);
            cache.masks.push(mask);
            h = a;
        }
        unreachable!("stack has at least one layer")
    }

    /// Adds parameter gradients into `grads` (w, b per layer) and returns
    /// dL/dinput.
    fn backward_sample(&self, cache: &StackCache, dout: f64, grads: &mut [Vec<f64>]) -> Vec<f64> {
        let mut d = vec![dout];
        for i in (0..self.layers.len()).rev() {
            let (gw, rest) = grads[2 * i..].split_at_mut(1);
            let dx = self.layers[i].backward(&cache.inputs[i], &d, &mut gw[0], &mut rest[0]);
            if i == 0 {
                return dx;
            }
            let h = i - 1;
            d = dx
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let m = cache.masks[h].as_ref().map_or(1.0, |m| m[k]);
                    v * m * self.config.activation.derivative(cache.pre[h][k])
                })
                .collect();
        }
        unreachable!()
    }

    fn params(&self) -> Vec<&Vec<f64>> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w, &mut l.b])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvConfig {
    pub channels_in: usize,
    /// Output channels of each conv layer.
    pub conv_channels: Vec<usize>,
    /// Odd kernel width.
    pub kernel: usize,
    /// Hidden widths of the FC stack after pooling.
    pub fc_hidden: Vec<usize>,
    pub dropout: f64,
}

impl ConvConfig {
    /// conv 64, conv 32 (kernel 3), pool, FC 512 -> 64 -> 1, dropout 0.2.
    pub fn standard(channels_in: usize) -> Self {
        Self {
            channels_in,
            conv_channels: vec![64, 32],
            kernel: 3,
            fc_hidden: vec![512, 64],
            dropout: 0.2,
        }
    }
}

/// Conv -> batch norm -> ReLU blocks, global average pooling over frames,
/// then an FC stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvHead {
    pub config: ConvConfig,
    pub convs: Vec<Conv1d>,
    pub norms: Vec<BatchNorm>,
    pub fc: MlpHead,
}

#[derive(Debug, Clone)]
struct ConvBlockCache {
    inputs: Vec<Vec<f64>>,
    normed: Vec<Vec<f64>>,
    bn: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct ConvCache {
    frames: Vec<usize>,
    blocks: Vec<ConvBlockCache>,
    fc: Vec<StackCache>,
}

impl ConvHead {
    pub fn new(config: ConvConfig, seed: u64) -> Result<Self, NeuralError> {
        if config.channels_in == 0
            || config.conv_channels.is_empty()
            || config.conv_channels.contains(&0)
        {
            return Err(NeuralError::InvalidConfig(
                "conv widths must be positive".into(),
            ));
        }
        if config.kernel.is_multiple_of(2) {
            return Err(NeuralError::InvalidConfig(
                "kernel width must be odd".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut convs = Vec::new();
        let mut norms = Vec::new();
        let mut c_in = config.channels_in;
        for &c in &config.conv_channels {
            convs.push(Conv1d::init(c_in, c, config.kernel, &mut rng));
            norms.push(BatchNorm::new(c));
            c_in = c;
        }
        let fc = MlpHead::with_rng(
            MlpConfig {
                input_dim: c_in,
                hidden: config.fc_hidden.clone(),
                activation: Activation::Relu,
                dropout: config.dropout,
            },
            &mut rng,
        )?;
        Ok(Self {
            config,
            convs,
            norms,
            fc,
        })
    }

    fn forward_batch(
        &self,
        batch: &[&EmbeddingMatrix],
        mode: Mode,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> (Vec<f64>, ConvCache) {
        let frames: Vec<usize> = batch.iter().map(|e| e.rows()).collect();
        let mut hs: Vec<Vec<f64>> = batch.iter().map(|e| e.values().to_vec()).collect();
        let mut blocks = Vec::new();
        for (conv, bn) in self.convs.iter().zip(&self.norms) {
            let zs: Vec<Vec<f64>> = hs
                .iter()
                .zip(&frames)
                .map(|(h, &t)| conv.forward(h, t))
                .collect();
            let (normed, bn_cache) = match mode {
                Mode::Train => {
                    let (y, c) = bn.forward_train(&zs);
                    (y, Some(c))
                }
                Mode::Eval => (zs.iter().map(|z| bn.forward_eval(z)).collect(), None),
            };
            let next = normed
                .iter()
                .map(|v| v.iter().map(|x| x.max(0.0)).collect())
                .collect();
            blocks.push(ConvBlockCache {
                inputs: std::mem::replace(&mut hs, next),
                normed,
                bn: bn_cache,
            });
        }
        let c = *self.config.conv_channels.last().unwrap();
        let mut outs = Vec::with_capacity(batch.len());
        let mut fc = Vec::with_capacity(batch.len());
        for (h, &t) in hs.iter().zip(&frames) {
            let mut pooled = vec![0.0; c];
            for (i, v) in h.iter().enumerate() {
                pooled[i % c] += v;
            }
            pooled.iter_mut().for_each(|v| *v /= t as f64);
            let (y, cache) = self.fc.forward_sample(&pooled, dropout.as_deref_mut());
            outs.push(y);
            fc.push(cache);
        }
        (outs, ConvCache { frames, blocks, fc })
    }

    /// Backward through train-mode batch norm.
    fn backward_batch(&self, cache: &ConvCache, dout: &[f64]) -> Vec<Vec<f64>> {
        let mut grads: Vec<Vec<f64>> = self.params().iter().map(|p| vec![0.0; p.len()]).collect();
        let n_conv = self.convs.len();
        let fc_off = 3 * n_conv;
        let c = *self.config.conv_channels.last().unwrap();
        let mut ds: Vec<Vec<f64>> = Vec::with_capacity(dout.len());
        for ((fc_cache, &d), &t) in cache.fc.iter().zip(dout).zip(&cache.frames) {
            let dp = self.fc.backward_sample(fc_cache, d, &mut grads[fc_off..]);
            ds.push((0..t * c).map(|i| dp[i % c] / t as f64).collect());
        }
        for l in (0..n_conv).rev() {
            let block = &cache.blocks[l];
            let dnorm: Vec<Vec<f64>> = ds
                .iter()
                .zip(&block.normed)
                .map(|(d, y)| {
                    d.iter()
                        .zip(y)
                        .map(|(g, v)| if *v > 0.0 { *g } else { 0.0 })
                        .collect()
                })
                .collect();
            let bn_cache = block
                .bn
                .as_ref()
                .expect("backward requires a train-mode forward");
            let (gw, rest) = grads[3 * l..].split_at_mut(1);
            let (gg, gb) = rest.split_at_mut(1);
            let dz = self.norms[l].backward(bn_cache, &dnorm, &mut gg[0], &mut gb[0]);
            ds = dz
                .iter()
                .zip(&block.inputs)
                .zip(&cache.frames)
                .map(|((d, x), &t)| self.convs[l].backward(x, t, d, &mut gw[0]))
                .collect();
        }
        grads
    }

    fn params(&self) -> Vec<&Vec<f64>> {
        let mut p: Vec<&Vec<f64>> = Vec::new();
        for (conv, bn) in self.convs.iter().zip(&self.norms) {
            p.extend([&conv.w, &bn.gamma, &bn.beta]);
        }
        p.extend(self.fc.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut p: Vec<&mut Vec<f64>> = Vec::new();
        for (conv, bn) in self.convs.iter_mut().zip(self.norms.iter_mut()) {
            p.push(&mut conv.w);
            p.push(&mut bn.gamma);
            p.push(&mut bn.beta);
        }
        p.extend(self.fc.params_mut());
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Head {
    Mlp(MlpHead),
    Conv(ConvHead),
}

/// Forward state needed for backpropagation.
#[derive(Debug, Clone)]
pub struct BatchCache(CacheKind);

#[derive(Debug, Clone)]
enum CacheKind {
    Mlp(Vec<StackCache>),
    Conv(ConvCache),
}

impl Head {
    pub fn kind(&self) -> &'static str {
        match self {
            Head::Mlp(_) => "mlp",
            Head::Conv(_) => "conv",
        }
    }

    /// Channels the head expects per frame.
    pub fn input_channels(&self) -> usize {
        match self {
            Head::Mlp(h) => h.config.input_dim,
            Head::Conv(h) => h.config.channels_in,
        }
    }

    pub fn check_input(&self, e: &EmbeddingMatrix) -> Result<(), NeuralError> {
        if e.cols() != self.input_channels() {
            return Err(NeuralError::ShapeMismatch {
                expected: self.input_channels(),
                got: e.cols(),
            });
        }
        Ok(())
    }

    /// Single-sample forward. Train mode draws dropout masks from `rng` and,
    /// for the conv head, normalizes with this sample's own statistics.
    pub fn forward(
        &self,
        e: &EmbeddingMatrix,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64, NeuralError> {
        self.check_input(e)?;
        let dropout = if mode == Mode::Train { Some(rng) } else { None };
        Ok(self.forward_batch(&[e], mode, dropout).0[0])
    }

    /// Eval-mode prediction.
    pub fn predict(&self, e: &EmbeddingMatrix) -> Result<f64, NeuralError> {
        self.check_input(e)?;
        Ok(self.forward_batch(&[e], Mode::Eval, None).0[0])
    }

    /// Batched forward. Dropout is applied only when `dropout` is given.
    /// Inputs are assumed validated.
    pub(crate) fn forward_batch(
        &self,
        batch: &[&EmbeddingMatrix],
        mode: Mode,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> (Vec<f64>, BatchCache) {
        match self {
            Head::Mlp(h) => {
                let (outs, caches) = batch
                    .iter()
                    .map(|e| h.forward_sample(&e.pooled(), dropout.as_deref_mut()))
                    .unzip();
                (outs, BatchCache(CacheKind::Mlp(caches)))
            }
            Head::Conv(h) => {
                let (outs, cache) = h.forward_batch(batch, mode, dropout);
                (outs, BatchCache(CacheKind::Conv(cache)))
            }
        }
    }

    /// Parameter gradients given dL/doutput per sample, in [`Head::params`]
    /// order.
    pub(crate) fn backward_batch(&self, cache: &BatchCache, dout: &[f64]) -> Vec<Vec<f64>> {
        match (self, &cache.0) {
            (Head::Mlp(h), CacheKind::Mlp(caches)) => {
                let mut grads: Vec<Vec<f64>> =
                    h.params().iter().map(|p| vec![0.0; p.len()]).collect();
                for (c, &d) in caches.iter().zip(dout) {
                    h.backward_sample(c, d, &mut grads);
                }
                grads
            }
            (Head::Conv(h), CacheKind::Conv(c)) => h.backward_batch(c, dout),
            _ => panic!("cache does not belong to this head"),
        }
    }

    /// Folds train-mode batch statistics into the running estimates.
    pub(crate) fn update_running(&mut self, cache: &BatchCache) {
        if let (Head::Conv(h), CacheKind::Conv(c)) = (self, &cache.0) {
            for (bn, block) in h.norms.iter_mut().zip(&c.blocks) {
                if let Some(bc) = &block.bn {
                    bn.update_running(bc);
                }
            }
        }
    }

    pub fn params(&self) -> Vec<&Vec<f64>> {
        match self {
            Head::Mlp(h) => h.params(),
            Head::Conv(h) => h.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Head::Mlp(h) => h.params_mut(),
            Head::Conv(h) => h.params_mut(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
