//! Classical regressors over the seven-feature vectors: random forest, KNN and
//! epsilon-SVR, plus standardization and grid-search tuning.

mod forest;
mod grid;
mod knn;
mod standardize;
mod svr;
mod tree;

pub use forest::{fit_random_forest, ForestModel, ForestParams};
pub use grid::{
    default_grid, enumerate_grid, grid_search, parse_grid, CvRow, GridSearchResult, GridSearchSpec,
    ParamGrid, ParamPoint, ParamValue,
};
pub use knn::{fit_knn, KnnModel};
pub use standardize::Standardizer;
pub use svr::{fit_svr, Kernel, SvrModel, SvrParams, SVR_TOLERANCE};
pub use tree::{fit_regression_tree, MaxFeatures, Node, RegressionTree, TreeParams};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassicalError {
    #[error("empty training data")]
    EmptyData,
    #[error("too few rows: need {needed}, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("model is untrained")]
    UntrainedModel,
}

/// Checks that `x` is a non-empty rectangular finite matrix matched by `y`.
/// Returns the column count.
pub(crate) fn check_xy(x: &[Vec<f64>], y: &[f64]) -> Result<usize, ClassicalError> {
    if x.is_empty() {
        return Err(ClassicalError::EmptyData);
    }
    if x.len() != y.len() {
        return Err(ClassicalError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let p = x[0].len();
    for row in x {
        if row.len() != p {
            return Err(ClassicalError::DimensionMismatch {
                expected: p,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(ClassicalError::NonFinite);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ClassicalError::NonFinite);
    }
    Ok(p)
}

/// Which classical learner to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassicalFamily {
    Rf,
    Knn,
    Svr,
}

impl ClassicalFamily {
    pub fn name(self) -> &'static str {
        match self {
            ClassicalFamily::Rf => "rf",
            ClassicalFamily::Knn => "knn",
            ClassicalFamily::Svr => "svr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rf" => Some(ClassicalFamily::Rf),
            "knn" => Some(ClassicalFamily::Knn),
            "svr" => Some(ClassicalFamily::Svr),
            _ => None,
        }
    }

    /// SVR and KNN see z-scored features; the forest sees raw ones.
    pub fn standardizes(self) -> bool {
        !matches!(self, ClassicalFamily::Rf)
    }
}

/// Hyperparameters for one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HyperParams {
    Rf(ForestParams),
    Knn { k: usize },
    Svr(SvrParams),
}

impl HyperParams {
    pub fn family(&self) -> ClassicalFamily {
        match self {
            HyperParams::Rf(_) => ClassicalFamily::Rf,
            HyperParams::Knn { .. } => ClassicalFamily::Knn,
            HyperParams::Svr(_) => ClassicalFamily::Svr,
        }
    }

    pub fn default_for(family: ClassicalFamily) -> Self {
        match family {
            ClassicalFamily::Rf => HyperParams::Rf(ForestParams::default()),
            ClassicalFamily::Knn => HyperParams::Knn { k: 5 },
            ClassicalFamily::Svr => HyperParams::Svr(SvrParams::default()),
        }
    }

    /// Builds parameters from a grid point; unnamed parameters keep defaults.
    pub fn from_point(family: ClassicalFamily, point: &ParamPoint) -> Result<Self, ClassicalError> {
        let mut hp = Self::default_for(family);
        for (name, value) in point {
            let bad = || ClassicalError::InvalidHyperparams(format!("{name} = {value}"));
            match (&mut hp, name.as_str()) {
                (HyperParams::Rf(p), "n_trees") => p.n_trees = value.as_usize().ok_or_else(bad)?,
                (HyperParams::Rf(p), "max_depth") => {
                    p.tree.max_depth = match value {
                        ParamValue::Text(t) if t == "none" => None,
                        v => Some(v.as_usize().ok_or_else(bad)?),
                    }
                }
                (HyperParams::Rf(p), "min_leaf") => {
                    p.tree.min_leaf = value.as_usize().ok_or_else(bad)?
                }
                (HyperParams::Rf(p), "features_per_split") => {
                    p.tree.max_features = match value {
                        ParamValue::Text(t) => MaxFeatures::parse(t).ok_or_else(bad)?,
                        v => MaxFeatures::Count(v.as_usize().ok_or_else(bad)?),
                    }
                }
                (HyperParams::Rf(p), "bootstrap") => {
                    p.bootstrap = match value {
                        ParamValue::Text(t) if t == "true" => true,
                        ParamValue::Text(t) if t == "false" => false,
                        _ => return Err(bad()),
                    }
                }
                (HyperParams::Knn { k }, "k") => *k = value.as_usize().ok_or_else(bad)?,
                (HyperParams::Svr(p), "C") => p.c = value.as_f64().ok_or_else(bad)?,
                (HyperParams::Svr(p), "epsilon") => p.epsilon = value.as_f64().ok_or_else(bad)?,
                (HyperParams::Svr(p), "gamma") => {
                    p.kernel = Kernel::Rbf {
                        gamma: value.as_f64().ok_or_else(bad)?,
                    }
                }
                (HyperParams::Svr(p), "kernel") => match value {
                    ParamValue::Text(t) if t == "linear" => p.kernel = Kernel::Linear,
                    ParamValue::Text(t) if t == "rbf" => {
                        if !matches!(p.kernel, Kernel::Rbf { .. }) {
                            p.kernel = Kernel::Rbf { gamma: 0.1 };
                        }
                    }
                    _ => return Err(bad()),
                },
                _ => {
                    return Err(ClassicalError::InvalidHyperparams(format!(
                        "unknown parameter {name} for {}",
                        family.name()
                    )))
                }
            }
        }
        Ok(hp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Regressor {
    Forest(ForestModel),
    Knn(KnnModel),
    Svr(SvrModel),
}

/// A fitted regressor with its (optional) input standardizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalModel {
    pub params: HyperParams,
    pub standardizer: Option<Standardizer>,
    pub regressor: Regressor,
}

impl ClassicalModel {
    pub fn n_features(&self) -> usize {
        match &self.regressor {
            Regressor::Forest(m) => m.n_features(),
            Regressor::Knn(m) => m.n_features(),
            Regressor::Svr(m) => m.n_features(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, ClassicalError> {
        if x.len() != self.n_features() {
            return Err(ClassicalError::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ClassicalError::NonFinite);
        }
        let z;
        let x = match &self.standardizer {
            Some(s) => {
                z = s.apply_row(x);
                &z[..]
            }
            None => x,
        };
        Ok(match &self.regressor {
            Regressor::Forest(m) => m.predict(x),
            Regressor::Knn(m) => m.predict(x),
            Regressor::Svr(m) => m.predict(x),
        })
    }

    pub fn predict_many(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, ClassicalError> {
        x.iter().map(|r| self.predict(r)).collect()
    }
}

/// Fits one model. The standardizer, when the family uses one, is fit on `x`
/// only.
pub fn fit_classical(
    params: &HyperParams,
    x: &[Vec<f64>],
    y: &[f64],
    seed: u64,
) -> Result<ClassicalModel, ClassicalError> {
    check_xy(x, y)?;
    let standardizer = if params.family().standardizes() {
        Some(Standardizer::fit(x)?)
    } else {
        None
    };
    let xs = match &standardizer {
        Some(s) => s.apply(x),
        None => x.to_vec(),
    };
    let regressor = match params {
        HyperParams::Rf(p) => Regressor::Forest(fit_random_forest(&xs, y, p, seed)?),
        HyperParams::Knn { k } => Regressor::Knn(fit_knn(&xs, y, *k)?),
        HyperParams::Svr(p) => Regressor::Svr(fit_svr(&xs, y, p)?),
    };
    Ok(ClassicalModel {
        params: params.clone(),
        standardizer,
        regressor,
    })
}

/// Mean increase in RMSE when one column of `x` is shuffled, per feature,
/// averaged over `repeats` seeded permutations.
pub fn permutation_importance<F>(
    predict: F,
    x: &[Vec<f64>],
    y: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<Vec<f64>, ClassicalError>
where
    F: Fn(&[f64]) -> Result<f64, ClassicalError>,
{
    let p = check_xy(x, y)?;
    let score = |rows: &[Vec<f64>]| -> Result<f64, ClassicalError> {
        let mut sse = 0.0;
        for (r, t) in rows.iter().zip(y) {
            let e = predict(r)? - t;
            sse += e * e;
        }
        Ok((sse / y.len() as f64).sqrt())
    };
    let base = score(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; p];
    let mut rows = x.to_vec();
    for (f, slot) in out.iter_mut().enumerate() {
        let mut column: Vec<f64> = x.iter().map(|r| r[f]).collect();
        let mut total = 0.0;
        for _ in 0..repeats.max(1) {
            column.shuffle(&mut rng);
            for (r, v) in rows.iter_mut().zip(&column) {
                r[f] = *v;
            }
            total += score(&rows)? - base;
        }
        for (r, orig) in rows.iter_mut().zip(x) {
            r[f] = orig[f];
        }
        *slot = total / repeats.max(1) as f64;
    }
    Ok(out)
}
