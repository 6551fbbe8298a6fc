use serde::{Deserialize, Serialize};

use super::{check_xy, ClassicalError};

/// k-nearest-neighbour regressor. Inputs are expected to be standardized by
/// the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    k: usize,
}

pub fn fit_knn(x: &[Vec<f64>], y: &[f64], k: usize) -> Result<KnnModel, ClassicalError> {
    check_xy(x, y)?;
    if k == 0 || k > x.len() {
        return Err(ClassicalError::InvalidHyperparams(format!(
            "k = {k} outside 1..={}",
            x.len()
        )));
    }
    Ok(KnnModel {
        x: x.to_vec(),
        y: y.to_vec(),
        k,
    })
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_features(&self) -> usize {
        self.x[0].len()
    }

    /// Indices of the k nearest rows, ordered by (distance, index).
    pub fn neighbors(&self, q: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| {
                (
                    r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
                    i,
                )
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_unstable_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, q: &[f64]) -> f64 {
        self.neighbors(q).iter().map(|&i| self.y[i]).sum::<f64>() / self.k as f64
    }
}
