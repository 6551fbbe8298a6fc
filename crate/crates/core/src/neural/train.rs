use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::heads::{Head, Mode};
use super::{EmbeddingMatrix, NeuralError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Optimizer {
    /// beta1 0.9, beta2 0.999, eps 1e-8.
    Adam,
    /// Heavy-ball momentum 0.9.
    Momentum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 200,
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NeuralError::InvalidConfig(format!(
                "learning rate {} must be > 0",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(NeuralError::InvalidConfig(
                "epochs and batch size must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub head: Head,
    /// Eval-mode MSE over the training set after each epoch.
    pub loss_curve: Vec<f64>,
    pub steps: usize,
}

fn check_data(head: &Head, xs: &[EmbeddingMatrix], ys: &[f64]) -> Result<(), NeuralError> {
    if xs.is_empty() {
        return Err(NeuralError::EmptyData);
    }
    if xs.len() != ys.len() {
        return Err(NeuralError::ShapeMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    xs.iter().try_for_each(|x| head.check_input(x))?;
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(NeuralError::BadFormat("non-finite target".into()));
    }
    Ok(())
}

/// Mean squared error of one batched forward.
pub fn batch_loss(
    head: &Head,
    xs: &[EmbeddingMatrix],
    ys: &[f64],
    mode: Mode,
) -> Result<f64, NeuralError> {
    check_data(head, xs, ys)?;
    let refs: Vec<&EmbeddingMatrix> = xs.iter().collect();
    let (out, _) = head.forward_batch(&refs, mode, None);
    Ok(mse(&out, ys))
}

fn mse(out: &[f64], ys: &[f64]) -> f64 {
    out.iter()
        .zip(ys)
        .map(|(o, y)| (o - y).powi(2))
        .sum::<f64>()
        / ys.len() as f64
}

/// Analytic parameter gradients of the batch MSE; dropout off, batch norm in
/// train mode.
pub fn loss_gradients(
    head: &Head,
    xs: &[EmbeddingMatrix],
    ys: &[f64],
) -> Result<(f64, Vec<Vec<f64>>), NeuralError> {
    check_data(head, xs, ys)?;
    let refs: Vec<&EmbeddingMatrix> = xs.iter().collect();
    let (out, cache) = head.forward_batch(&refs, Mode::Train, None);
    let n = ys.len() as f64;
    let dout: Vec<f64> = out.iter().zip(ys).map(|(o, y)| 2.0 * (o - y) / n).collect();
    Ok((mse(&out, ys), head.backward_batch(&cache, &dout)))
}

/// Largest relative disagreement between analytic gradients and central
/// differences (step 1e-5) over all parameters, each scored as
/// `|ga - gfd| / max(1e-8, |ga| + |gfd|)`.
pub fn gradient_check(head: &Head, xs: &[EmbeddingMatrix], ys: &[f64]) -> Result<f64, NeuralError> {
    const H: f64 = 1e-5;
    let (_, analytic) = loss_gradients(head, xs, ys)?;
    let mut probe = head.clone();
    let mut worst: f64 = 0.0;
    for (pi, grad) in analytic.iter().enumerate() {
        for (k, &ga) in grad.iter().enumerate() {
            let orig = probe.params()[pi][k];
            probe.params_mut()[pi][k] = orig + H;
            let up = batch_loss(&probe, xs, ys, Mode::Train)?;
            probe.params_mut()[pi][k] = orig - H;
            let down = batch_loss(&probe, xs, ys, Mode::Train)?;
            probe.params_mut()[pi][k] = orig;
            let fd = (up - down) / (2.0 * H);
            worst = worst.max((ga - fd).abs() / (ga.abs() + fd.abs()).max(1e-8));
        }
    }
    Ok(worst)
}

/// Minibatch training on MSE. Samples are reshuffled every epoch from a
/// generator seeded by `config.seed`, which also draws the dropout masks.
pub fn train_head(
    mut head: Head,
    xs: &[EmbeddingMatrix],
    ys: &[f64],
    config: &TrainConfig,
) -> Result<TrainOutcome, NeuralError> {
    config.validate()?;
    check_data(&head, xs, ys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let shapes: Vec<usize> = head.params().iter().map(|p| p.len()).collect();
    let mut m: Vec<Vec<f64>> = shapes.iter().map(|&n| vec![0.0; n]).collect();
    let mut v: Vec<Vec<f64>> = shapes.iter().map(|&n| vec![0.0; n]).collect();
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut steps = 0usize;
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&EmbeddingMatrix> = chunk.iter().map(|&i| &xs[i]).collect();
            let targets: Vec<f64> = chunk.iter().map(|&i| ys[i]).collect();
            let (out, cache) = head.forward_batch(&batch, Mode::Train, Some(&mut rng));
            let n = targets.len() as f64;
            let loss = mse(&out, &targets);
            if !loss.is_finite() {
                return Err(NeuralError::Diverged { epoch });
            }
            let dout: Vec<f64> = out
                .iter()
                .zip(&targets)
                .map(|(o, y)| 2.0 * (o - y) / n)
                .collect();
            let grads = head.backward_batch(&cache, &dout);
            head.update_running(&cache);
            steps += 1;
            let t = steps as i32;
            for (((p, g), mi), vi) in head
                .params_mut()
                .into_iter()
                .zip(&grads)
                .zip(&mut m)
                .zip(&mut v)
            {
                match config.optimizer {
                    Optimizer::Adam => {
                        let c1 = 1.0 - f64::powi(b1, t);
                        let c2 = 1.0 - f64::powi(b2, t);
                        for k in 0..p.len() {
                            mi[k] = b1 * mi[k] + (1.0 - b1) * g[k];
                            vi[k] = b2 * vi[k] + (1.0 - b2) * g[k] * g[k];
                            p[k] -=
                                config.learning_rate * (mi[k] / c1) / ((vi[k] / c2).sqrt() + eps);
                        }
                    }
                    Optimizer::Momentum => {
                        for k in 0..p.len() {
                            mi[k] = 0.9 * mi[k] + g[k];
                            p[k] -= config.learning_rate * mi[k];
                        }
                    }
                }
            }
        }
        let loss = batch_loss(&head, xs, ys, Mode::Eval)?;
        if !loss.is_finite() {
            return Err(NeuralError::Diverged { epoch });
        }
        curve.push(loss);
    }
    Ok(TrainOutcome {
        head,
        loss_curve: curve,
        steps,
    })
}
