//! Linear output layer and evaluation metrics.
//!
//! The readout is ridge regression with an unpenalized bias, solved through
//! a symmetric eigendecomposition of the Gram matrix on its smaller side
//! (the push-through identity gives the same solution from either side).
//! Centering the design matrix and targets makes the separately handled
//! bias exactly the unpenalized intercept.

use chrono::NaiveDate;
use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

/// Trained readout: `w_out` is (features+1)×h with the bias as the last
/// row, one column per horizon step.
#[derive(Debug, Clone)]
pub struct ReadoutWeights {
    pub w_out: Array2<f64>,
    pub ridge_lambda: f64,
}

impl ReadoutWeights {
    pub fn horizon(&self) -> usize {
        self.w_out.ncols()
    }

    /// Number of input features, excluding the bias row.
    pub fn n_features(&self) -> usize {
        self.w_out.nrows() - 1
    }

    /// The penalized block of the weights (everything but the bias row).
    pub fn coefficients(&self) -> ndarray::ArrayView2<'_, f64> {
        self.w_out.slice(ndarray::s![..self.w_out.nrows() - 1, ..])
    }

    pub fn bias(&self) -> ndarray::ArrayView1<'_, f64> {
        self.w_out.row(self.w_out.nrows() - 1)
    }
}

/// Predictions of one model on the test anchors, in price units.
#[derive(Debug, Clone)]
pub struct PredictionResult {
    /// Anchor date of each row.
    pub anchor_dates: Vec<NaiveDate>,
    /// Dates of the predicted closes, row-aligned to the anchors.
    pub target_dates: Vec<Vec<NaiveDate>>,
    pub y_true: Array2<f64>,
    pub y_pred: Array2<f64>,
}

impl PredictionResult {
    pub fn new(
        anchor_dates: Vec<NaiveDate>,
        target_dates: Vec<Vec<NaiveDate>>,
        y_true: Array2<f64>,
        y_pred: Array2<f64>,
    ) -> Result<Self> {
        let t = anchor_dates.len();
        let h = y_true.ncols();
        if y_true.dim() != y_pred.dim()
            || y_true.nrows() != t
            || target_dates.len() != t
            || target_dates.iter().any(|d| d.len() != h)
        {
            return Err(Error::Shape(
                "prediction result shapes do not agree".into(),
            ));
        }
        Ok(PredictionResult {
            anchor_dates,
            target_dates,
            y_true,
            y_pred,
        })
    }

    pub fn horizon(&self) -> usize {
        self.y_true.ncols()
    }

    pub fn len(&self) -> usize {
        self.anchor_dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchor_dates.is_empty()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Config(format!(
            "ridge lambda must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(())
}

/// Solves `argmin ||XW − Y||² + λ||W||²` without an intercept.
///
/// With λ = 0 the matrix must have full column rank; an underdetermined or
/// rank-deficient system is rejected rather than silently pseudo-inverted.
pub fn ridge_solve(x: &Array2<f64>, y: &Array2<f64>, lambda: f64) -> Result<Array2<f64>> {
    check_lambda(lambda)?;
    let (m, n) = x.dim();
    if y.nrows() != m {
        return Err(Error::Shape(format!(
            "X has {m} rows but Y has {}",
            y.nrows()
        )));
    }
    if m == 0 || n == 0 {
        return Err(Error::Shape("empty design matrix".into()));
    }

    if m >= n {
        // Primal side: (XᵀX + λI) W = XᵀY via eigendecomposition of XᵀX.
        let gram = x.t().dot(x);
        let rhs = x.t().dot(y);
        let (vecs, vals) = symmetric_eigen(&gram);
        if lambda == 0.0 {
            let d_max = vals.iter().cloned().fold(0.0_f64, f64::max);
            if vals.iter().any(|&d| d <= d_max * 1e-12) {
                return Err(Error::Singular(
                    "design matrix is rank-deficient with lambda = 0".into(),
                ));
            }
        }
        let mut coeffs = vecs.t().dot(&rhs);
        for (mut row, &d) in coeffs.axis_iter_mut(Axis(0)).zip(vals.iter()) {
            row.mapv_inplace(|v| v / (d.max(0.0) + lambda));
        }
        Ok(vecs.dot(&coeffs))
    } else {
        // Dual side: W = Xᵀ (XXᵀ + λI)⁻¹ Y. With more features than rows
        // the unregularized problem has no unique solution.
        if lambda == 0.0 {
            return Err(Error::Singular(format!(
                "underdetermined system ({m} rows, {n} features) with lambda = 0"
            )));
        }
        let gram = x.dot(&x.t());
        let (vecs, vals) = symmetric_eigen(&gram);
        let mut coeffs = vecs.t().dot(y);
        for (mut row, &d) in coeffs.axis_iter_mut(Axis(0)).zip(vals.iter()) {
            row.mapv_inplace(|v| v / (d.max(0.0) + lambda));
        }
        Ok(x.t().dot(&vecs.dot(&coeffs)))
    }
}

/// Symmetric eigendecomposition returning (eigenvectors, eigenvalues) as
/// ndarray values, eigenvectors in columns.
fn symmetric_eigen(a: &Array2<f64>) -> (Array2<f64>, Vec<f64>) {
    let n = a.nrows();
    let dm = nalgebra::DMatrix::from_row_iterator(n, n, a.iter().cloned());
    let eig = dm.symmetric_eigen();
    let vecs = Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, j)]);
    let vals = eig.eigenvalues.iter().cloned().collect();
    (vecs, vals)
}

/// Centered ridge system factored once; solves are cheap per lambda, so a
/// lambda grid costs one eigendecomposition instead of one per point.
pub struct RidgeSolver {
    x_mean: ndarray::Array1<f64>,
    y_mean: ndarray::Array1<f64>,
    /// Centered design, kept for the dual-side back-multiplication.
    xc: Option<Array2<f64>>,
    vecs: Array2<f64>,
    vals: Vec<f64>,
    /// Primal: vecsᵀ·(XcᵀYc); dual: vecsᵀ·Yc.
    proj: Array2<f64>,
    primal: bool,
    n_features: usize,
}

impl RidgeSolver {
    /// Centers the system and eigendecomposes the Gram matrix on its
    /// smaller side.
    pub fn fit(x: &Array2<f64>, y: &Array2<f64>) -> Result<Self> {
        let (m, n) = x.dim();
        if y.nrows() != m {
            return Err(Error::Shape(format!(
                "X has {m} rows but Y has {}",
                y.nrows()
            )));
        }
        if m < 2 {
            return Err(Error::Length {
                what: "training rows".into(),
                required: 2,
                available: m,
            });
        }
        let x_mean = x.mean_axis(Axis(0)).expect("m >= 2");
        let y_mean = y.mean_axis(Axis(0)).expect("m >= 2");
        let xc = x - &x_mean;
        let yc = y - &y_mean;

        if m >= n {
            let gram = xc.t().dot(&xc);
            let (vecs, vals) = symmetric_eigen(&gram);
            let proj = vecs.t().dot(&xc.t().dot(&yc));
            Ok(RidgeSolver {
                x_mean,
                y_mean,
                xc: None,
                vecs,
                vals,
                proj,
                primal: true,
                n_features: n,
            })
        } else {
            let gram = xc.dot(&xc.t());
            let (vecs, vals) = symmetric_eigen(&gram);
            let proj = vecs.t().dot(&yc);
            Ok(RidgeSolver {
                x_mean,
                y_mean,
                xc: Some(xc),
                vecs,
                vals,
                proj,
                primal: false,
                n_features: n,
            })
        }
    }

    /// Solves for one lambda; the unpenalized bias comes from the means.
    pub fn solve(&self, lambda: f64) -> Result<ReadoutWeights> {
        check_lambda(lambda)?;
        if lambda == 0.0 {
            let d_max = self.vals.iter().cloned().fold(0.0_f64, f64::max);
            let deficient =
                !self.primal || self.vals.iter().any(|&d| d <= d_max * 1e-12);
            if deficient {
                return Err(Error::Singular(
                    "design matrix is rank-deficient with lambda = 0".into(),
                ));
            }
        }
        let mut scaled = self.proj.clone();
        for (mut row, &d) in scaled.axis_iter_mut(Axis(0)).zip(self.vals.iter()) {
            row.mapv_inplace(|v| v / (d.max(0.0) + lambda));
        }
        let coeffs = if self.primal {
            self.vecs.dot(&scaled)
        } else {
            let xc = self.xc.as_ref().expect("dual side keeps Xc");
            xc.t().dot(&self.vecs.dot(&scaled))
        };
        let bias = &self.y_mean - &self.x_mean.dot(&coeffs);

        let n = self.n_features;
        let h = self.proj.ncols();
        let mut w_out = Array2::zeros((n + 1, h));
        w_out.slice_mut(ndarray::s![..n, ..]).assign(&coeffs);
        w_out.row_mut(n).assign(&bias);
        Ok(ReadoutWeights {
            w_out,
            ridge_lambda: lambda,
        })
    }
}

/// Trains the ridge readout with an appended, unpenalized bias:
/// `W = argmin ||[X 1]W − Y||² + λ||W_non-bias||²`.
pub fn train_ridge(x: &Array2<f64>, y: &Array2<f64>, lambda: f64) -> Result<ReadoutWeights> {
    RidgeSolver::fit(x, y)?.solve(lambda)
}

/// Applies the readout: `[X 1] · w_out`.
pub fn predict(w: &ReadoutWeights, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != w.n_features() {
        return Err(Error::Shape(format!(
            "readout expects {} features, got {}",
            w.n_features(),
            x.ncols()
        )));
    }
    let mut out = x.dot(&w.coefficients());
    out += &w.bias();
    Ok(out)
}

/// Result of a validation-tail lambda search.
#[derive(Debug, Clone)]
pub struct RidgeCv {
    pub weights: ReadoutWeights,
    pub lambda: f64,
    pub val_nrmse: f64,
}

/// Selects the ridge lambda on a chronological validation tail of the
/// training rows, then refits on all of them. The grid is scanned in
/// order; ties keep the earliest entry.
pub fn train_ridge_cv(
    x: &Array2<f64>,
    y: &Array2<f64>,
    lambdas: &[f64],
    val_fraction: f64,
) -> Result<RidgeCv> {
    if lambdas.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    if !(0.0..1.0).contains(&val_fraction) || val_fraction <= 0.0 {
        return Err(Error::Config(format!(
            "validation fraction must be in (0, 1), got {val_fraction}"
        )));
    }
    let m = x.nrows();
    let n_val = ((m as f64 * val_fraction).round() as usize).clamp(1, m.saturating_sub(2));
    let fit_rows = m - n_val;
    if fit_rows < 2 {
        return Err(Error::Length {
            what: "fit rows for lambda selection".into(),
            required: 2,
            available: fit_rows,
        });
    }

    let x_fit = x.slice(ndarray::s![..fit_rows, ..]).to_owned();
    let y_fit = y.slice(ndarray::s![..fit_rows, ..]).to_owned();
    let x_val = x.slice(ndarray::s![fit_rows.., ..]).to_owned();
    let y_val = y.slice(ndarray::s![fit_rows.., ..]).to_owned();

    let solver = RidgeSolver::fit(&x_fit, &y_fit)?;
    let mut best: Option<(f64, f64)> = None; // (nrmse, lambda)
    for &lambda in lambdas {
        let w = solver.solve(lambda)?;
        let pred = predict(&w, &x_val)?;
        let score = nrmse_multistep(&y_val, &pred)?;
        if best.is_none_or(|(s, _)| score < s) {
            best = Some((score, lambda));
        }
    }
    let (val_nrmse, lambda) = best.expect("non-empty grid");
    let weights = train_ridge(x, y, lambda)?;
    Ok(RidgeCv {
        weights,
        lambda,
        val_nrmse,
    })
}

/// Normalized root mean square error:
/// `sqrt(Σ(y − ŷ)²) / sqrt(Σ(y − ȳ)²)` with ȳ the mean of the true series.
/// 0 is a perfect fit; 1 matches the constant-mean predictor.
pub fn nrmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::Shape(format!(
            "series lengths differ: {} vs {}",
            y.len(),
            y_hat.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::Length {
            what: "nrmse series".into(),
            required: 2,
            available: y.len(),
        });
    }
    if y.iter().chain(y_hat).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in nrmse input".into()));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&yi, &pi) in y.iter().zip(y_hat) {
        num += (yi - pi) * (yi - pi);
        den += (yi - mean) * (yi - mean);
    }
    if den == 0.0 {
        return Err(Error::Domain(
            "nrmse denominator undefined: true series is constant".into(),
        ));
    }
    Ok(num.sqrt() / den.sqrt())
}

/// Pooled NRMSE over a T×h prediction matrix: the matrices are flattened
/// and scored with a single numerator/denominator. Reduces to [`nrmse`]
/// for h = 1.
pub fn nrmse_multistep(y: &Array2<f64>, y_hat: &Array2<f64>) -> Result<f64> {
    if y.dim() != y_hat.dim() {
        return Err(Error::Shape(format!(
            "matrix shapes differ: {:?} vs {:?}",
            y.dim(),
            y_hat.dim()
        )));
    }
    let yv: Vec<f64> = y.iter().cloned().collect();
    let pv: Vec<f64> = y_hat.iter().cloned().collect();
    nrmse(&yv, &pv)
}

/// Per-step NRMSE columns of a multi-step prediction, for diagnostics.
pub fn nrmse_per_step(y: &Array2<f64>, y_hat: &Array2<f64>) -> Result<Vec<f64>> {
    if y.dim() != y_hat.dim() {
        return Err(Error::Shape(format!(
            "matrix shapes differ: {:?} vs {:?}",
            y.dim(),
            y_hat.dim()
        )));
    }
    (0..y.ncols())
        .map(|c| nrmse(&y.column(c).to_vec(), &y_hat.column(c).to_vec()))
        .collect()
}

/// Error reduction of the reservoir against the best baseline:
/// `1 − NRMSE_rc / NRMSE_ml`. Positive iff the reservoir is strictly
/// better; approaches 1 as the reservoir error vanishes.
pub fn error_reduction(nrmse_rc: f64, nrmse_ml: f64) -> Result<f64> {
    if !nrmse_ml.is_finite() || nrmse_ml <= 0.0 {
        return Err(Error::Domain(format!(
            "error reduction needs a positive baseline NRMSE, got {nrmse_ml}"
        )));
    }
    if !nrmse_rc.is_finite() || nrmse_rc < 0.0 {
        return Err(Error::Domain(format!(
            "invalid reservoir NRMSE {nrmse_rc}"
        )));
    }
    Ok(1.0 - nrmse_rc / nrmse_ml)
}
