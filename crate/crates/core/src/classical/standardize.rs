use serde::{Deserialize, Serialize};

use super::{check_xy, ClassicalError};

/// Per-column z-scoring with population standard deviation.
///
/// Constant columns get std 1 so they map to all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self, ClassicalError> {
        if x.len() < 2 {
            return Err(ClassicalError::TooFewRows {
                needed: 2,
                got: x.len(),
            });
        }
        let p = check_xy(x, &vec![0.0; x.len()])?;
        let n = x.len() as f64;
        let mut means = vec![0.0; p];
        let mut stds = vec![1.0; p];
        for j in 0..p {
            let first = x[0][j];
            if x.iter().all(|r| r[j] == first) {
                means[j] = first;
                continue;
            }
            let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            means[j] = m;
            if var > 0.0 {
                stds[j] = var.sqrt();
            }
        }
        Ok(Self { means, stds })
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.apply_row(r)).collect()
    }
}
