//! Epsilon-insensitive support vector regression.
//!
//! The dual over 2l variables (alpha then alpha*) is solved by SMO with
//! second-order working-set selection.

use serde::{Deserialize, Serialize};

use super::{check_xy, ClassicalError};

/// Stop when the maximal KKT violation falls below this.
pub const SVR_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Rbf { gamma: f64 },
    Linear,
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub kernel: Kernel,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            epsilon: 1.0,
            kernel: Kernel::Rbf { gamma: 0.1 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub params: SvrParams,
    pub support_vectors: Vec<Vec<f64>>,
    /// alpha_i - alpha_i* for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    /// Maximal KKT violation when the solver stopped.
    pub final_violation: f64,
    pub iterations: usize,
}

impl SvrModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * self.params.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn n_features(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }
}

pub fn fit_svr(x: &[Vec<f64>], z: &[f64], params: &SvrParams) -> Result<SvrModel, ClassicalError> {
    check_xy(x, z)?;
    let l = x.len();
    if l < 2 {
        return Err(ClassicalError::TooFewRows { needed: 2, got: l });
    }
    let c = params.c;
    if !(c > 0.0 && c.is_finite()) || !(params.epsilon >= 0.0 && params.epsilon.is_finite()) {
        return Err(ClassicalError::InvalidHyperparams(format!(
            "need C > 0 and epsilon >= 0, got C = {c}, epsilon = {}",
            params.epsilon
        )));
    }
    if let Kernel::Rbf { gamma } = params.kernel {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(ClassicalError::InvalidHyperparams(format!(
                "gamma must be > 0, got {gamma}"
            )));
        }
    }

    let kmat: Vec<Vec<f64>> = x
        .iter()
        .map(|a| x.iter().map(|b| params.kernel.eval(a, b)).collect())
        .collect();
    let n = 2 * l;
    let sign = |t: usize| if t < l { 1.0 } else { -1.0 };
    let q = |i: usize, j: usize| sign(i) * sign(j) * kmat[i % l][j % l];
    let qd: Vec<f64> = (0..n).map(|t| kmat[t % l][t % l]).collect();

    let mut alpha = vec![0.0; n];
    let mut grad: Vec<f64> = (0..n)
        .map(|t| {
            if t < l {
                params.epsilon - z[t]
            } else {
                params.epsilon + z[t - l]
            }
        })
        .collect();

    let max_iter = 10 * l * 1000;
    let mut iter = 0;
    let mut violation = f64::INFINITY;
    let mut converged = false;

    while iter < max_iter {
        // i: maximal -y G over the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut ii = None;
        for t in 0..n {
            let yg = -sign(t) * grad[t];
            let up = if t < l { alpha[t] < c } else { alpha[t] > 0.0 };
            if up && yg > gmax {
                gmax = yg;
                ii = Some(t);
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut jj = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = ii {
            for t in 0..n {
                let low = if t < l { alpha[t] > 0.0 } else { alpha[t] < c };
                if !low {
                    continue;
                }
                let yg = sign(t) * grad[t];
                gmax2 = gmax2.max(yg);
                let b = gmax + yg;
                if b > 0.0 {
                    let mut a = qd[i] + qd[t] - 2.0 * sign(i) * sign(t) * q(i, t);
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < best_obj {
                        best_obj = obj;
                        jj = Some(t);
                    }
                }
            }
        }
        violation = gmax + gmax2;
        let (Some(i), Some(j)) = (ii, jj) else {
            converged = true;
            break;
        };
        if violation < SVR_TOLERANCE {
            converged = true;
            break;
        }
        iter += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = q(i, j);
        if sign(i) != sign(j) {
            let quad = (qd[i] + qd[j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (da_i, da_j) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(i, t) * da_i + q(j, t) * da_j;
        }
    }

    // bias from free variables, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = sign(t) * grad[t];
        let positive = t < l;
        if alpha[t] >= c {
            if positive {
                lb = lb.max(yg);
            } else {
                ub = ub.min(yg);
            }
        } else if alpha[t] <= 0.0 {
            if positive {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        0.5 * (ub + lb)
    };

    let mut support_vectors = Vec::new();
    let mut coef = Vec::new();
    for k in 0..l {
        let d = alpha[k] - alpha[k + l];
        if d != 0.0 {
            support_vectors.push(x[k].clone());
            coef.push(d);
        }
    }
    if support_vectors.is_empty() {
        // keep the input width for prediction-time checks
        support_vectors.push(x[0].clone());
        coef.push(0.0);
    }
    Ok(SvrModel {
        params: *params,
        support_vectors,
        coef,
        bias: -rho,
        converged,
        final_violation: if violation.is_finite() {
            violation
        } else {
            0.0
        },
        iterations: iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_data_fits_inside_the_tube() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64).collect();
        let p = SvrParams {
            c: 100.0,
            epsilon: 0.1,
            kernel: Kernel::Linear,
        };
        let m = fit_svr(&x, &y, &p).unwrap();
        assert!(m.converged);
        for (r, t) in x.iter().zip(&y) {
            assert!(
                (m.predict(r) - t).abs() <= 0.1 + 1e-3,
                "{} vs {t}",
                m.predict(r)
            );
        }
    }

    #[test]
    fn constant_target_is_absorbed_by_bias() {
        let x: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()])
            .collect();
        let y = vec![42.0; 12];
        for kernel in [Kernel::Linear, Kernel::Rbf { gamma: 0.5 }] {
            let m = fit_svr(
                &x,
                &y,
                &SvrParams {
                    c: 10.0,
                    epsilon: 0.5,
                    kernel,
                },
            )
            .unwrap();
            for q in [[0.0, 0.0], [3.0, -2.0], [0.5, 0.5]] {
                assert!((m.predict(&q) - 42.0).abs() <= 0.5 + 1e-3);
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = [0.0, 1.0];
        assert!(fit_svr(
            &x,
            &y,
            &SvrParams {
                c: 0.0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(fit_svr(
            &x,
            &y,
            &SvrParams {
                epsilon: -1.0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(fit_svr(
            &x,
            &y,
            &SvrParams {
                kernel: Kernel::Rbf { gamma: 0.0 },
                ..Default::default()
            }
        )
        .is_err());
        assert!(fit_svr(&x[..1], &y[..1], &SvrParams::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn dual_stays_feasible(
            data in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -20.0f64..20.0), 2..30),
            c in 0.1f64..50.0,
            eps in 0.0f64..2.0,
            gamma in 0.05f64..2.0,
        ) {
            let x: Vec<Vec<f64>> = data.iter().map(|d| vec![d.0, d.1]).collect();
            let y: Vec<f64> = data.iter().map(|d| d.2).collect();
            let m = fit_svr(&x, &y, &SvrParams { c, epsilon: eps, kernel: Kernel::Rbf { gamma } }).unwrap();
            prop_assert!(m.coef.iter().all(|&a| a >= -c && a <= c));
            prop_assert!(m.coef.iter().sum::<f64>().abs() < 1e-6);
            prop_assert!(m.converged);
        }
    }
}
