//! Score-stratified train/test splitting and cross-validation folds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvalError;

/// Partitions row indices into `n_bins` quantile bins of `scores`.
///
/// Rows are ordered by (score, index) and cut into contiguous groups of
/// near-equal size; bin `b` holds ranks `b*n/n_bins .. (b+1)*n/n_bins`.
pub fn quantile_bins(scores: &[f64], n_bins: usize) -> Result<Vec<Vec<usize>>, EvalError> {
    let n = scores.len();
    if n_bins < 1 || n < n_bins {
        return Err(EvalError::TooFewSamples {
            needed: n_bins.max(1),
            got: n,
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(EvalError::Invalid("non-finite score".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    Ok((0..n_bins)
        .map(|b| order[b * n / n_bins..(b + 1) * n / n_bins].to_vec())
        .collect())
}

/// Train and test row indices, each in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split: each quantile bin sends round(size * test_fraction) of
/// its rows, chosen by a seeded shuffle, to the test side.
pub fn balanced_split_indices(
    scores: &[f64],
    test_fraction: f64,
    n_bins: usize,
    seed: u64,
) -> Result<SplitIndices, EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::Invalid(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    if n_bins < 2 || scores.len() < n_bins {
        return Err(EvalError::TooFewSamples {
            needed: n_bins.max(2),
            got: scores.len(),
        });
    }
    let bins = quantile_bins(scores, n_bins)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut bin in bins {
        bin.shuffle(&mut rng);
        let n_test = (bin.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&bin[..n_test]);
        train.extend_from_slice(&bin[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Split of identifiers, see [`balanced_split_indices`].
pub fn balanced_split(
    ids: &[String],
    scores: &[f64],
    test_fraction: f64,
    n_bins: usize,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>), EvalError> {
    if ids.len() != scores.len() {
        return Err(EvalError::LengthMismatch(ids.len(), scores.len()));
    }
    let s = balanced_split_indices(scores, test_fraction, n_bins, seed)?;
    Ok((
        s.train.iter().map(|&i| ids[i].clone()).collect(),
        s.test.iter().map(|&i| ids[i].clone()).collect(),
    ))
}

/// Assigns every row to one of `k` folds, stratified on `scores`.
///
/// Uses the same quantile binning as the train/test split (up to 5 bins,
/// fewer for small inputs); each shuffled bin is dealt round-robin, continuing
/// where the previous bin stopped so fold sizes differ by at most one.
pub fn stratified_folds(scores: &[f64], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 || scores.len() < k {
        return Err(EvalError::TooFewSamples {
            needed: k.max(2),
            got: scores.len(),
        });
    }
    let n_bins = (scores.len() / k).clamp(1, 5);
    let bins = quantile_bins(scores, n_bins)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for mut bin in bins {
        bin.shuffle(&mut rng);
        for idx in bin {
            folds[next].push(idx);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}
