//! CART regression trees and bagged random forests.
//!
//! Splits are greedy and axis-aligned, minimizing the summed squared error
//! over all output columns; leaves predict column means. The forest bags
//! bootstrap rows per tree and subsamples features per split, averaging
//! tree outputs.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::ModelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        prediction: Array1<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict_row(&self, row: ndarray::ArrayView1<'_, f64>) -> &Array1<f64> {
        match self {
            Node::Leaf { prediction } => prediction,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.predict_row(row)
                } else {
                    right.predict_row(row)
                }
            }
        }
    }

    fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecisionTreeModel {
    root: Node,
    n_features: usize,
    n_outputs: usize,
    params: ModelParams,
}

impl DecisionTreeModel {
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        let mut out = Array2::zeros((x.nrows(), self.n_outputs));
        for (i, row) in x.rows().into_iter().enumerate() {
            out.row_mut(i).assign(self.root.predict_row(row));
        }
        Ok(out)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }
}

/// Sum over output columns of the squared deviation from the column mean,
/// for the given row subset.
fn subset_sse(y: &Array2<f64>, rows: &[usize]) -> f64 {
    let h = y.ncols();
    let n = rows.len() as f64;
    let mut sse = 0.0;
    for c in 0..h {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for &r in rows {
            let v = y[[r, c]];
            sum += v;
            sumsq += v * v;
        }
        sse += sumsq - sum * sum / n;
    }
    sse.max(0.0)
}

fn mean_prediction(y: &Array2<f64>, rows: &[usize]) -> Array1<f64> {
    let mut mean = Array1::zeros(y.ncols());
    for &r in rows {
        mean += &y.row(r);
    }
    mean / rows.len() as f64
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    cost: f64,
}

/// Exhaustive search over candidate thresholds (midpoints between distinct
/// consecutive sorted values) of the allowed features. Deterministic
/// tie-breaking: strictly better cost wins, features scanned in order.
fn best_split(
    x: &Array2<f64>,
    y: &Array2<f64>,
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<BestSplit> {
    let h = y.ncols();
    let n = rows.len();
    let mut best: Option<BestSplit> = None;

    for &feature in features {
        let mut order: Vec<usize> = rows.to_vec();
        order.sort_by(|&a, &b| {
            x[[a, feature]]
                .partial_cmp(&x[[b, feature]])
                .expect("finite features")
                .then(a.cmp(&b))
        });

        // Running sums from the left; totals give the right side.
        let mut total_sum = vec![0.0; h];
        let mut total_sq = vec![0.0; h];
        for &r in &order {
            for c in 0..h {
                let v = y[[r, c]];
                total_sum[c] += v;
                total_sq[c] += v * v;
            }
        }
        let mut left_sum = vec![0.0; h];
        let mut left_sq = vec![0.0; h];
        for i in 0..n - 1 {
            let r = order[i];
            for c in 0..h {
                let v = y[[r, c]];
                left_sum[c] += v;
                left_sq[c] += v * v;
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let a = x[[order[i], feature]];
            let b = x[[order[i + 1], feature]];
            if a == b {
                continue; // no threshold separates equal values
            }
            let mut cost = 0.0;
            for c in 0..h {
                let right_sum = total_sum[c] - left_sum[c];
                let right_sq = total_sq[c] - left_sq[c];
                let sse_l = left_sq[c] - left_sum[c] * left_sum[c] / n_left as f64;
                let sse_r = right_sq - right_sum * right_sum / n_right as f64;
                cost += sse_l.max(0.0) + sse_r.max(0.0);
            }
            if best.as_ref().is_none_or(|s| cost < s.cost) {
                best = Some(BestSplit {
                    feature,
                    threshold: 0.5 * (a + b),
                    cost,
                });
            }
        }
    }
    best
}

fn grow(
    x: &Array2<f64>,
    y: &Array2<f64>,
    rows: &[usize],
    depth_left: Option<usize>,
    min_leaf: usize,
    mtry: usize,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> Node {
    let sse = subset_sse(y, rows);
    let leaf = || Node::Leaf {
        prediction: mean_prediction(y, rows),
    };
    if rows.len() < 2 * min_leaf || rows.len() < 2 || sse <= 0.0 || depth_left == Some(0) {
        return leaf();
    }

    let d = x.ncols();
    let features: Vec<usize> = match rng {
        Some(r) => {
            let mut idx: Vec<usize> = (0..d).collect();
            // Partial Fisher-Yates: the first `mtry` entries are a uniform
            // sample without replacement.
            for i in 0..mtry.min(d) {
                let j = r.random_range(i..d);
                idx.swap(i, j);
            }
            let mut chosen = idx[..mtry.min(d)].to_vec();
            chosen.sort_unstable();
            chosen
        }
        None => (0..d).collect(),
    };

    let split = match best_split(x, y, rows, &features, min_leaf) {
        Some(s) if s.cost < sse - 1e-12 => s,
        _ => return leaf(),
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&r| x[[r, split.feature]] <= split.threshold);
    let next_depth = depth_left.map(|d| d - 1);
    Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(x, y, &left_rows, next_depth, min_leaf, mtry, rng)),
        right: Box::new(grow(x, y, &right_rows, next_depth, min_leaf, mtry, rng)),
    }
}

fn validate_xy(x: &Array2<f64>, y: &Array2<f64>, min_leaf: usize) -> Result<()> {
    if y.nrows() != x.nrows() {
        return Err(Error::Shape(format!(
            "X has {} rows but Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::Shape("empty design matrix".into()));
    }
    if min_leaf == 0 {
        return Err(Error::Config("min_leaf must be >= 1".into()));
    }
    Ok(())
}

/// Fits a CART regression tree. `max_depth = None` grows until leaves are
/// pure or smaller than `2·min_leaf`.
pub fn fit_tree(
    x: &Array2<f64>,
    y: &Array2<f64>,
    max_depth: Option<usize>,
    min_leaf: usize,
) -> Result<DecisionTreeModel> {
    validate_xy(x, y, min_leaf)?;
    if max_depth == Some(0) {
        return Err(Error::Config("max_depth must be >= 1".into()));
    }
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let root = grow(x, y, &rows, max_depth, min_leaf, x.ncols(), &mut None);
    Ok(DecisionTreeModel {
        root,
        n_features: x.ncols(),
        n_outputs: y.ncols(),
        params: ModelParams::DecisionTree {
            max_depth,
            min_leaf,
        },
    })
}

#[derive(Debug, Clone)]
pub struct RandomForestModel {
    trees: Vec<Node>,
    n_features: usize,
    n_outputs: usize,
    params: ModelParams,
}

impl RandomForestModel {
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let per_tree = self.predict_per_tree(x)?;
        let mut out = per_tree[0].clone();
        for t in &per_tree[1..] {
            out += t;
        }
        out /= per_tree.len() as f64;
        Ok(out)
    }

    /// Individual tree predictions, e.g. for spread diagnostics.
    pub fn predict_per_tree(&self, x: &Array2<f64>) -> Result<Vec<Array2<f64>>> {
        if x.ncols() != self.n_features {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        Ok(self
            .trees
            .iter()
            .map(|tree| {
                let mut out = Array2::zeros((x.nrows(), self.n_outputs));
                for (i, row) in x.rows().into_iter().enumerate() {
                    out.row_mut(i).assign(tree.predict_row(row));
                }
                out
            })
            .collect())
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

/// Fits a bagged forest: each tree trains on a bootstrap row sample and
/// considers `ceil(feature_frac · d)` random features per split. Fully
/// deterministic for a given seed.
pub fn fit_forest(
    x: &Array2<f64>,
    y: &Array2<f64>,
    n_trees: usize,
    max_depth: Option<usize>,
    min_leaf: usize,
    feature_frac: f64,
    seed: u64,
) -> Result<RandomForestModel> {
    validate_xy(x, y, min_leaf)?;
    if n_trees == 0 {
        return Err(Error::Config("n_trees must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&feature_frac) || feature_frac <= 0.0 {
        return Err(Error::Config(format!(
            "feature_frac must be in (0, 1], got {feature_frac}"
        )));
    }
    let n = x.nrows();
    let d = x.ncols();
    let mtry = ((feature_frac * d as f64).ceil() as usize).clamp(1, d);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trees: Vec<Node> = (0..n_trees)
        .map(|_| {
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            grow(x, y, &rows, max_depth, min_leaf, mtry, &mut Some(&mut rng))
        })
        .collect();

    Ok(RandomForestModel {
        trees,
        n_features: d,
        n_outputs: y.ncols(),
        params: ModelParams::RandomForest {
            n_trees,
            max_depth,
            min_leaf,
            feature_frac,
            seed,
        },
    })
}
