//! CART regression tree with variance-reduction splits.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_xy, ClassicalError};

/// Relative tolerance under which two split scores count as tied.
const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::Count(k) => k.clamp(1, n_features),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all" => Some(MaxFeatures::All),
            "sqrt" => Some(MaxFeatures::Sqrt),
            n => n.parse().ok().map(MaxFeatures::Count),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
    /// Unnormalized variance reduction credited to each feature.
    importance: Vec<f64>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn raw_importance(&self) -> &[f64] {
        &self.importance
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

/// Fits a single tree on all rows.
pub fn fit_regression_tree(
    x: &[Vec<f64>],
    y: &[f64],
    params: &TreeParams,
    seed: u64,
) -> Result<RegressionTree, ClassicalError> {
    check_xy(x, y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<usize> = (0..x.len()).collect();
    grow(x, y, &mut rows, params, &mut rng)
}

/// Grows a tree over `rows` (indices into `x`, repeats allowed).
pub(crate) fn grow(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &mut [usize],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Result<RegressionTree, ClassicalError> {
    if rows.is_empty() {
        return Err(ClassicalError::EmptyData);
    }
    if params.min_leaf == 0 {
        return Err(ClassicalError::InvalidHyperparams(
            "min_leaf must be >= 1".into(),
        ));
    }
    let n_features = x[0].len();
    let mut b = Builder {
        x,
        y,
        params,
        n_features,
        k: params.max_features.resolve(n_features),
        nodes: Vec::new(),
        importance: vec![0.0; n_features],
        scratch: Vec::with_capacity(rows.len()),
    };
    b.build(rows, 0, rng);
    Ok(RegressionTree {
        nodes: b.nodes,
        n_features,
        importance: b.importance,
    })
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a TreeParams,
    n_features: usize,
    k: usize,
    nodes: Vec<Node>,
    importance: Vec<f64>,
    scratch: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Sum of the children's squared deviations from their means.
    pub score: f64,
}

impl Builder<'_> {
    fn build(&mut self, rows: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let n = rows.len() as f64;
        let mean = rows.iter().map(|&r| self.y[r]).sum::<f64>() / n;
        self.nodes.push(Node::Leaf { value: mean });

        let first = self.y[rows[0]];
        let pure = rows.iter().all(|&r| self.y[r] == first);
        let depth_hit = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_hit || rows.len() < 2 * self.params.min_leaf {
            return id;
        }

        let features: Vec<usize> = if self.k >= self.n_features {
            (0..self.n_features).collect()
        } else {
            let mut f = index::sample(rng, self.n_features, self.k).into_vec();
            f.sort_unstable();
            f
        };
        let parent_sse: f64 = rows.iter().map(|&r| (self.y[r] - mean).powi(2)).sum();
        let Some(split) = best_split(
            self.x,
            self.y,
            rows,
            &features,
            self.params.min_leaf,
            mean,
            parent_sse,
            &mut self.scratch,
        ) else {
            return id;
        };
        self.importance[split.feature] += (parent_sse - split.score).max(0.0);

        let mid = partition(rows, |&r| self.x[r][split.feature] <= split.threshold);
        let (l, r) = rows.split_at_mut(mid);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

fn partition<T, F: Fn(&T) -> bool>(v: &mut [T], pred: F) -> usize {
    let mut i = 0;
    for j in 0..v.len() {
        if pred(&v[j]) {
            v.swap(i, j);
            i += 1;
        }
    }
    i
}

/// Scans all midpoint thresholds of `features` (ascending) and keeps the
/// lowest score; a later candidate must beat the incumbent by more than the
/// tie tolerance.
#[allow(clippy::too_many_arguments)]
pub(crate) fn best_split(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
    mean: f64,
    parent_sse: f64,
    scratch: &mut Vec<(f64, f64)>,
) -> Option<SplitChoice> {
    let n = rows.len();
    let tol = TIE_TOLERANCE * parent_sse;
    let mut best: Option<SplitChoice> = None;
    for &f in features {
        scratch.clear();
        scratch.extend(rows.iter().map(|&r| (x[r][f], y[r] - mean)));
        scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (tot_s, tot_q) = scratch
            .iter()
            .fold((0.0, 0.0), |(s, q), &(_, v)| (s + v, q + v * v));
        let (mut s, mut q) = (0.0, 0.0);
        for k in 1..n {
            let v = scratch[k - 1].1;
            s += v;
            q += v * v;
            let (lo, hi) = (scratch[k - 1].0, scratch[k].0);
            if lo == hi || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let nl = k as f64;
            let nr = (n - k) as f64;
            let sse_l = (q - s * s / nl).max(0.0);
            let sse_r = ((tot_q - q) - (tot_s - s).powi(2) / nr).max(0.0);
            let score = sse_l + sse_r;
            if best.is_none_or(|b| score < b.score - tol) {
                let mut threshold = 0.5 * (lo + hi);
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(SplitChoice {
                    feature: f,
                    threshold,
                    score,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_point_step() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let y = [0.0, 0.0, 10.0, 10.0];
        let params = TreeParams {
            max_depth: Some(1),
            ..Default::default()
        };
        let t = fit_regression_tree(&x, &y, &params, 0).unwrap();
        assert_eq!(
            t.nodes()[0],
            Node::Split {
                feature: 0,
                threshold: 1.5,
                left: 1,
                right: 2
            }
        );
        assert_eq!(t.predict(&[0.2]), 0.0);
        assert_eq!(t.predict(&[2.7]), 10.0);
        assert_eq!(t.raw_importance(), &[100.0]);
    }

    #[test]
    fn constant_target_is_one_leaf() {
        let x = vec![vec![1.0, 2.0], vec![3.0, 1.0], vec![0.0, 5.0]];
        let t = fit_regression_tree(&x, &[7.0; 3], &TreeParams::default(), 0).unwrap();
        assert_eq!(t.nodes(), &[Node::Leaf { value: 7.0 }]);
        assert_eq!(t.predict(&[100.0, -4.0]), 7.0);
    }

    #[test]
    fn min_leaf_and_depth_are_respected() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..50).map(|i| ((i * 17) % 13) as f64).collect();
        let t = fit_regression_tree(
            &x,
            &y,
            &TreeParams {
                max_depth: Some(3),
                min_leaf: 5,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        assert!(t.depth() <= 3);
        // every leaf region holds at least 5 training points
        let mut counts = std::collections::HashMap::new();
        for r in &x {
            let mut i = 0;
            while let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = t.nodes()[i]
            {
                i = if r[feature] <= threshold { left } else { right };
            }
            *counts.entry(i).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 5));
    }

    #[test]
    fn tie_goes_to_lowest_feature() {
        // both columns induce the same partition
        let x = vec![
            vec![0.0, 10.0],
            vec![1.0, 11.0],
            vec![2.0, 12.0],
            vec![3.0, 13.0],
        ];
        let y = [0.0, 0.0, 5.0, 5.0];
        let t = fit_regression_tree(
            &x,
            &y,
            &TreeParams {
                max_depth: Some(1),
                ..Default::default()
            },
            0,
        )
        .unwrap();
        assert!(matches!(t.nodes()[0], Node::Split { feature: 0, .. }));
    }

    proptest! {
        #[test]
        fn predictions_stay_in_target_range(
            data in prop::collection::vec((prop::collection::vec(-5.0f64..5.0, 3), -50.0f64..50.0), 1..40),
            probe in prop::collection::vec(-10.0f64..10.0, 3),
            depth in prop::option::of(0usize..6),
            min_leaf in 1usize..4,
        ) {
            let (x, y): (Vec<Vec<f64>>, Vec<f64>) = data.into_iter().unzip();
            let params = TreeParams { max_depth: depth, min_leaf, max_features: MaxFeatures::All };
            let t = fit_regression_tree(&x, &y, &params, 1).unwrap();
            let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let p = t.predict(&probe);
            prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
            for node in t.nodes() {
                if let Node::Split { left, right, .. } = *node {
                    prop_assert!(left < t.nodes().len() && right < t.nodes().len());
                }
            }
        }
    }
}
