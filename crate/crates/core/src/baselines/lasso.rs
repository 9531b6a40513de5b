//! Lasso and elastic net via cyclic coordinate descent with
//! soft-thresholding.
//!
//! Objective per output column, on standardized features and centered
//! targets:
//!
//! `(1/2n)·||y − Xw||² + λ1·||w||₁ + (λ2/2)·||w||²`
//!
//! Convergence when the largest coefficient change in a sweep drops below
//! 1e−8, capped at 10000 sweeps; hitting the cap logs a warning with the
//! final delta and still returns the result.

use ndarray::{Array1, Array2, Axis};

use super::{ModelParams, Standardizer};
use crate::error::{Error, Result};

pub const CD_TOLERANCE: f64 = 1e-8;
pub const CD_MAX_SWEEPS: usize = 10_000;

/// Fitted lasso / elastic net. Coefficients are stored on the
/// standardized-feature scale; predictions transform queries the same way.
#[derive(Debug, Clone)]
pub struct ElasticNetModel {
    standardizer: Standardizer,
    /// d×h coefficient matrix on the standardized scale.
    coefs: Array2<f64>,
    /// Per-output intercept (the training target mean).
    intercepts: Array1<f64>,
    params: ModelParams,
    converged: bool,
    final_delta: f64,
}

impl ElasticNetModel {
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.coefs.nrows() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.coefs.nrows(),
                x.ncols()
            )));
        }
        let xs = self.standardizer.transform(x);
        let mut out = xs.dot(&self.coefs);
        out += &self.intercepts;
        Ok(out)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn final_delta(&self) -> f64 {
        self.final_delta
    }

    /// Coefficients on the standardized-feature scale, one column per
    /// output.
    pub fn coefficients(&self) -> &Array2<f64> {
        &self.coefs
    }
}

pub fn fit_lasso(x: &Array2<f64>, y: &Array2<f64>, lambda1: f64) -> Result<ElasticNetModel> {
    let mut m = fit_with(x, y, lambda1, 0.0, CD_MAX_SWEEPS)?;
    m.params = ModelParams::Lasso { lambda1 };
    Ok(m)
}

pub fn fit_elastic_net(
    x: &Array2<f64>,
    y: &Array2<f64>,
    lambda1: f64,
    lambda2: f64,
) -> Result<ElasticNetModel> {
    fit_with(x, y, lambda1, lambda2, CD_MAX_SWEEPS)
}

/// Fit entry point with an explicit sweep cap (tests exercise the
/// non-convergence path by lowering it).
pub fn fit_with(
    x: &Array2<f64>,
    y: &Array2<f64>,
    lambda1: f64,
    lambda2: f64,
    max_sweeps: usize,
) -> Result<ElasticNetModel> {
    if lambda1 < 0.0 || lambda2 < 0.0 || !lambda1.is_finite() || !lambda2.is_finite() {
        return Err(Error::Config(format!(
            "penalties must be finite and >= 0, got lambda1 {lambda1}, lambda2 {lambda2}"
        )));
    }
    let (m, _d) = x.dim();
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

    let standardizer = Standardizer::fit(x);
    let xs = standardizer.transform(x);
    let y_mean = y.mean_axis(Axis(0)).expect("m >= 2");
    let yc = y - &y_mean;

    let h = y.ncols();
    let d = x.ncols();
    let mut coefs = Array2::zeros((d, h));
    let mut converged = true;
    let mut final_delta = 0.0_f64;
    for out_col in 0..h {
        let target = yc.column(out_col).to_owned();
        let (w, ok, delta) = coordinate_descent(&xs, &target, lambda1, lambda2, max_sweeps);
        if !ok {
            converged = false;
            final_delta = final_delta.max(delta);
        }
        coefs.column_mut(out_col).assign(&w);
    }
    if !converged {
        log::warn!(
            "coordinate descent hit {max_sweeps} sweeps without converging (final delta {final_delta:.3e})"
        );
    }

    Ok(ElasticNetModel {
        standardizer,
        coefs,
        intercepts: y_mean,
        params: ModelParams::ElasticNet { lambda1, lambda2 },
        converged,
        final_delta,
    })
}

/// Cyclic coordinate descent for one output column. Returns the
/// coefficients, whether the tolerance was reached, and the last sweep's
/// maximum coefficient change.
fn coordinate_descent(
    xs: &Array2<f64>,
    yc: &Array1<f64>,
    lambda1: f64,
    lambda2: f64,
    max_sweeps: usize,
) -> (Array1<f64>, bool, f64) {
    let (m, d) = xs.dim();
    let n = m as f64;
    // Per-column mean square; 1.0 for standardized non-constant columns,
    // 0.0 flags a constant column whose coefficient stays zero.
    let col_norms: Vec<f64> = (0..d)
        .map(|j| xs.column(j).iter().map(|v| v * v).sum::<f64>() / n)
        .collect();

    let mut w = Array1::zeros(d);
    let mut residual = yc.clone();
    let mut delta = f64::INFINITY;
    for _sweep in 0..max_sweeps {
        delta = 0.0;
        for j in 0..d {
            if col_norms[j] == 0.0 {
                continue;
            }
            let old = w[j];
            let col = xs.column(j);
            // rho = (1/n)·x_jᵀ(residual + x_j·w_j)
            let rho = col.dot(&residual) / n + col_norms[j] * old;
            let new = soft_threshold(rho, lambda1) / (col_norms[j] + lambda2);
            if new != old {
                let diff = new - old;
                residual.zip_mut_with(&col, |r, &x| *r -= diff * x);
                w[j] = new;
                delta = delta.max(diff.abs());
            }
        }
        if delta < CD_TOLERANCE {
            return (w, true, delta);
        }
    }
    (w, false, delta)
}

fn soft_threshold(x: f64, threshold: f64) -> f64 {
    x.signum() * (x.abs() - threshold).max(0.0)
}
