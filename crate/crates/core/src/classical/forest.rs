//! Bagged regression trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, RegressionTree, TreeParams};
use super::{check_xy, ClassicalError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            tree: TreeParams::default(),
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<RegressionTree>,
    pub params: ForestParams,
    pub seed: u64,
}

impl ForestModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn n_features(&self) -> usize {
        self.trees.first().map_or(0, RegressionTree::n_features)
    }

    /// Impurity importances summed over trees, normalized to sum to 1.
    /// All zeros when no tree ever split.
    pub fn feature_importances(&self) -> Result<Vec<f64>, ClassicalError> {
        if self.trees.is_empty() {
            return Err(ClassicalError::UntrainedModel);
        }
        let mut total = vec![0.0; self.n_features()];
        for t in &self.trees {
            for (acc, v) in total.iter_mut().zip(t.raw_importance()) {
                *acc += v;
            }
        }
        let sum: f64 = total.iter().sum();
        if sum > 0.0 {
            total.iter_mut().for_each(|v| *v /= sum);
        }
        Ok(total)
    }
}

/// Per-tree generator: the seed selects the key, the tree index the stream,
/// so no tree's draws depend on scheduling.
fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

pub fn fit_random_forest(
    x: &[Vec<f64>],
    y: &[f64],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel, ClassicalError> {
    check_xy(x, y)?;
    if params.n_trees == 0 {
        return Err(ClassicalError::InvalidHyperparams(
            "n_trees must be >= 1".into(),
        ));
    }
    let n = x.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(seed, t);
            let mut rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(x, y, &mut rows, &params.tree, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ForestModel {
        trees,
        params: *params,
        seed,
    })
}
