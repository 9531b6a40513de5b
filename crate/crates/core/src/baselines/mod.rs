//! Classical regression baselines and chronological model selection.
//!
//! Families: OLS, ridge, lasso, elastic net, k-nearest-neighbors, CART
//! regression trees, and bagged random forests. Every family standardizes
//! features internally where the fit is scale-sensitive, so the
//! standardize/fit/predict pipeline is invariant to affine rescaling of
//! raw features. Model selection runs expanding-window chronological
//! cross-validation scored by pooled NRMSE.

mod knn;
mod lasso;
mod linear;
mod tree;

pub use knn::KnnModel;
pub use lasso::ElasticNetModel;
pub use linear::LinearModel;
pub use tree::{DecisionTreeModel, RandomForestModel};

use chrono::NaiveDate;
use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::ingest::{FeatureFrame, N_INPUTS};
use crate::readout::nrmse_multistep;

/// Supervised design built from a feature frame: for anchor `t`, the input
/// row stacks the `h` feature rows `t−h+1 ..= t` (oldest first) and the
/// target row holds the `h` closes `t+1 ..= t+h`. Anchors whose windows
/// leave the frame are dropped.
#[derive(Debug, Clone)]
pub struct SupervisedSet {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    /// Anchor dates, one per row.
    pub anchors: Vec<NaiveDate>,
    /// Frame row index of each anchor.
    pub anchor_rows: Vec<usize>,
    pub horizon: usize,
}

impl SupervisedSet {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// Copies the given rows into a new set (order preserved).
    pub fn subset(&self, rows: &[usize]) -> SupervisedSet {
        let x = self.x.select(Axis(0), rows);
        let y = self.y.select(Axis(0), rows);
        SupervisedSet {
            x,
            y,
            anchors: rows.iter().map(|&r| self.anchors[r]).collect(),
            anchor_rows: rows.iter().map(|&r| self.anchor_rows[r]).collect(),
            horizon: self.horizon,
        }
    }
}

/// Builds the supervised set for one horizon. Input width is `8·horizon`.
pub fn build_supervised(frame: &FeatureFrame, horizon: usize) -> Result<SupervisedSet> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be >= 1".into()));
    }
    let t = frame.len();
    if t < horizon * 2 {
        return Err(Error::Length {
            what: format!("frame rows for horizon {horizon}"),
            required: horizon * 2,
            available: t,
        });
    }
    let first = horizon - 1;
    let last = t - 1 - horizon; // inclusive
    if last < first {
        return Err(Error::Length {
            what: format!("anchors for horizon {horizon}"),
            required: 1,
            available: 0,
        });
    }
    let n_anchors = last - first + 1;
    let width = N_INPUTS * horizon;
    let mut x = Array2::zeros((n_anchors, width));
    let mut y = Array2::zeros((n_anchors, horizon));
    let mut anchors = Vec::with_capacity(n_anchors);
    let mut anchor_rows = Vec::with_capacity(n_anchors);
    for (row, anchor) in (first..=last).enumerate() {
        for step in 0..horizon {
            let src = anchor + 1 - horizon + step;
            x.slice_mut(ndarray::s![row, step * N_INPUTS..(step + 1) * N_INPUTS])
                .assign(&frame.inputs.row(src));
        }
        for step in 0..horizon {
            y[[row, step]] = frame.target[anchor + 1 + step];
        }
        anchors.push(frame.dates[anchor]);
        anchor_rows.push(anchor);
    }
    Ok(SupervisedSet {
        x,
        y,
        anchors,
        anchor_rows,
        horizon,
    })
}

/// Per-column standardization fitted on training rows. Constant columns
/// keep unit scale so they map to zero rather than dividing by zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    means: Array1<f64>,
    stds: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Standardizer {
        let n = x.nrows().max(1) as f64;
        let means = x.sum_axis(Axis(0)) / n;
        let mut stds = Array1::zeros(x.ncols());
        for (j, col) in x.columns().into_iter().enumerate() {
            let var = col.iter().map(|v| (v - means[j]) * (v - means[j])).sum::<f64>() / n;
            let s = var.sqrt();
            stds[j] = if s > 0.0 { s } else { 1.0 };
        }
        Standardizer { means, stds }
    }

    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x - &self.means;
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| v / self.stds[j]);
        }
        out
    }
}

/// Model family, ordered from simplest to most complex. The order breaks
/// ties in model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelFamily {
    Ols,
    Ridge,
    Lasso,
    ElasticNet,
    Knn,
    DecisionTree,
    RandomForest,
}

impl ModelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Ols => "ols",
            ModelFamily::Ridge => "ridge",
            ModelFamily::Lasso => "lasso",
            ModelFamily::ElasticNet => "elasticnet",
            ModelFamily::Knn => "knn",
            ModelFamily::DecisionTree => "decision_tree",
            ModelFamily::RandomForest => "random_forest",
        }
    }

    fn rank(&self) -> usize {
        *self as usize
    }
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One hyperparameter point of a family's grid.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Ols,
    Ridge {
        lambda: f64,
    },
    Lasso {
        lambda1: f64,
    },
    ElasticNet {
        lambda1: f64,
        lambda2: f64,
    },
    Knn {
        k: usize,
    },
    DecisionTree {
        max_depth: Option<usize>,
        min_leaf: usize,
    },
    RandomForest {
        n_trees: usize,
        max_depth: Option<usize>,
        min_leaf: usize,
        feature_frac: f64,
        seed: u64,
    },
}

impl ModelParams {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelParams::Ols => ModelFamily::Ols,
            ModelParams::Ridge { .. } => ModelFamily::Ridge,
            ModelParams::Lasso { .. } => ModelFamily::Lasso,
            ModelParams::ElasticNet { .. } => ModelFamily::ElasticNet,
            ModelParams::Knn { .. } => ModelFamily::Knn,
            ModelParams::DecisionTree { .. } => ModelFamily::DecisionTree,
            ModelParams::RandomForest { .. } => ModelFamily::RandomForest,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ModelParams::Ols => "ols".into(),
            ModelParams::Ridge { lambda } => format!("ridge(lambda={lambda})"),
            ModelParams::Lasso { lambda1 } => format!("lasso(lambda1={lambda1})"),
            ModelParams::ElasticNet { lambda1, lambda2 } => {
                format!("elasticnet(lambda1={lambda1},lambda2={lambda2})")
            }
            ModelParams::Knn { k } => format!("knn(k={k})"),
            ModelParams::DecisionTree {
                max_depth,
                min_leaf,
            } => format!("decision_tree(depth={max_depth:?},min_leaf={min_leaf})"),
            ModelParams::RandomForest {
                n_trees,
                max_depth,
                min_leaf,
                feature_frac,
                ..
            } => format!(
                "random_forest(trees={n_trees},depth={max_depth:?},min_leaf={min_leaf},frac={feature_frac})"
            ),
        }
    }
}

/// A family plus its hyperparameter grid.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub grid: Vec<ModelParams>,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, grid: Vec<ModelParams>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Config(format!("empty grid for family {family}")));
        }
        if grid.iter().any(|p| p.family() != family) {
            return Err(Error::Config(format!(
                "grid entry family mismatch for {family}"
            )));
        }
        Ok(ModelSpec { family, grid })
    }
}

/// The documented default grids for all seven families.
pub fn default_specs(forest_seed: u64) -> Vec<ModelSpec> {
    let lambda_grid = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];
    let en_grid = [1e-3, 1e-2, 1e-1];
    vec![
        ModelSpec::new(ModelFamily::Ols, vec![ModelParams::Ols]).unwrap(),
        ModelSpec::new(
            ModelFamily::Ridge,
            lambda_grid
                .iter()
                .map(|&lambda| ModelParams::Ridge { lambda })
                .collect(),
        )
        .unwrap(),
        ModelSpec::new(
            ModelFamily::Lasso,
            lambda_grid
                .iter()
                .map(|&lambda1| ModelParams::Lasso { lambda1 })
                .collect(),
        )
        .unwrap(),
        ModelSpec::new(
            ModelFamily::ElasticNet,
            en_grid
                .iter()
                .flat_map(|&lambda1| {
                    en_grid
                        .iter()
                        .map(move |&lambda2| ModelParams::ElasticNet { lambda1, lambda2 })
                })
                .collect(),
        )
        .unwrap(),
        ModelSpec::new(
            ModelFamily::Knn,
            [1usize, 2, 5, 10, 20]
                .iter()
                .map(|&k| ModelParams::Knn { k })
                .collect(),
        )
        .unwrap(),
        ModelSpec::new(
            ModelFamily::DecisionTree,
            [Some(2), Some(4), Some(8), None]
                .iter()
                .map(|&max_depth| ModelParams::DecisionTree {
                    max_depth,
                    min_leaf: 1,
                })
                .collect(),
        )
        .unwrap(),
        ModelSpec::new(
            ModelFamily::RandomForest,
            [1usize, 5]
                .iter()
                .map(|&min_leaf| ModelParams::RandomForest {
                    n_trees: 30,
                    max_depth: None,
                    min_leaf,
                    feature_frac: 1.0 / 3.0,
                    seed: forest_seed,
                })
                .collect(),
        )
        .unwrap(),
    ]
}

/// A fitted baseline of any family.
#[derive(Debug, Clone)]
pub enum FittedModel {
    Linear(LinearModel),
    ElasticNet(ElasticNetModel),
    Knn(KnnModel),
    DecisionTree(DecisionTreeModel),
    RandomForest(RandomForestModel),
}

impl FittedModel {
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            FittedModel::Linear(m) => m.predict(x),
            FittedModel::ElasticNet(m) => m.predict(x),
            FittedModel::Knn(m) => m.predict(x),
            FittedModel::DecisionTree(m) => m.predict(x),
            FittedModel::RandomForest(m) => m.predict(x),
        }
    }

    pub fn params(&self) -> &ModelParams {
        match self {
            FittedModel::Linear(m) => m.params(),
            FittedModel::ElasticNet(m) => m.params(),
            FittedModel::Knn(m) => m.params(),
            FittedModel::DecisionTree(m) => m.params(),
            FittedModel::RandomForest(m) => m.params(),
        }
    }
}

/// Fits one hyperparameter point on the given design.
pub fn fit(params: &ModelParams, x: &Array2<f64>, y: &Array2<f64>) -> Result<FittedModel> {
    match params {
        ModelParams::Ols => Ok(FittedModel::Linear(linear::fit_ols(x, y)?)),
        ModelParams::Ridge { lambda } => {
            Ok(FittedModel::Linear(linear::fit_ridge(x, y, *lambda)?))
        }
        ModelParams::Lasso { lambda1 } => {
            Ok(FittedModel::ElasticNet(lasso::fit_lasso(x, y, *lambda1)?))
        }
        ModelParams::ElasticNet { lambda1, lambda2 } => Ok(FittedModel::ElasticNet(
            lasso::fit_elastic_net(x, y, *lambda1, *lambda2)?,
        )),
        ModelParams::Knn { k } => Ok(FittedModel::Knn(knn::fit_knn(x, y, *k)?)),
        ModelParams::DecisionTree {
            max_depth,
            min_leaf,
        } => Ok(FittedModel::DecisionTree(tree::fit_tree(
            x, y, *max_depth, *min_leaf,
        )?)),
        ModelParams::RandomForest {
            n_trees,
            max_depth,
            min_leaf,
            feature_frac,
            seed,
        } => Ok(FittedModel::RandomForest(tree::fit_forest(
            x,
            y,
            *n_trees,
            *max_depth,
            *min_leaf,
            *feature_frac,
            *seed,
        )?)),
    }
}

/// Expanding-window chronological folds over `n` rows: fold `i` trains on
/// everything before its validation block. Returns (train_end, val_end)
/// row bounds per fold.
pub fn expanding_folds(n: usize, folds: usize) -> Result<Vec<(usize, usize)>> {
    if folds < 2 {
        return Err(Error::Config(format!("folds must be >= 2, got {folds}")));
    }
    let blocks = folds + 1;
    if n < blocks * 2 {
        return Err(Error::Length {
            what: format!("rows for {folds}-fold expanding CV"),
            required: blocks * 2,
            available: n,
        });
    }
    let edge = |i: usize| (i * n) / blocks;
    Ok((1..=folds).map(|i| (edge(i), edge(i + 1))).collect())
}

/// The winner of cross-validated grid search.
#[derive(Debug, Clone)]
pub struct SelectedModel {
    pub model: FittedModel,
    pub family: ModelFamily,
    pub params: ModelParams,
    pub cv_nrmse: f64,
}

/// Grid-searches every spec with expanding-window CV, scores by mean
/// validation NRMSE across folds, and refits the global winner on the full
/// training set. Ties go to the simpler family (declaration order inside a
/// family). Cells that fail to fit are skipped with a warning.
pub fn select_best_model(
    specs: &[ModelSpec],
    train: &SupervisedSet,
    folds: usize,
) -> Result<SelectedModel> {
    if specs.is_empty() {
        return Err(Error::Config("no model specs to select from".into()));
    }
    let bounds = expanding_folds(train.len(), folds)?;

    let mut best: Option<(f64, usize, ModelParams)> = None; // (score, family rank, params)
    for spec in specs {
        for params in &spec.grid {
            let mut total = 0.0;
            let mut ok = true;
            for &(train_end, val_end) in &bounds {
                let fit_x = train.x.slice(ndarray::s![..train_end, ..]).to_owned();
                let fit_y = train.y.slice(ndarray::s![..train_end, ..]).to_owned();
                let val_x = train.x.slice(ndarray::s![train_end..val_end, ..]).to_owned();
                let val_y = train.y.slice(ndarray::s![train_end..val_end, ..]).to_owned();
                let score = fit(params, &fit_x, &fit_y)
                    .and_then(|m| m.predict(&val_x))
                    .and_then(|p| nrmse_multistep(&val_y, &p));
                match score {
                    Ok(s) if s.is_finite() => total += s,
                    Ok(s) => {
                        log::warn!("non-finite CV score {s} for {}", params.describe());
                        ok = false;
                        break;
                    }
                    Err(e) => {
                        log::warn!("CV cell failed for {}: {e}", params.describe());
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let score = total / bounds.len() as f64;
            let rank = params.family().rank();
            let better = match &best {
                None => true,
                Some((s, r, _)) => score < *s || (score == *s && rank < *r),
            };
            if better {
                best = Some((score, rank, params.clone()));
            }
        }
    }

    let (cv_nrmse, _, params) = best.ok_or_else(|| {
        Error::Config("every model grid cell failed cross-validation".into())
    })?;
    let model = fit(&params, &train.x, &train.y)?;
    Ok(SelectedModel {
        family: params.family(),
        params,
        model,
        cv_nrmse,
    })
}
