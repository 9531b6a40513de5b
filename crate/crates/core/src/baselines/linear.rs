//! OLS and ridge baselines on standardized features, backed by the shared
//! readout solver.

use ndarray::Array2;

use super::{ModelParams, Standardizer};
use crate::error::Result;
use crate::readout::{predict as ridge_predict, train_ridge, ReadoutWeights};

/// Linear baseline: features standardized, then ridge with an unpenalized
/// intercept. OLS is the lambda = 0 case.
#[derive(Debug, Clone)]
pub struct LinearModel {
    standardizer: Standardizer,
    weights: ReadoutWeights,
    params: ModelParams,
}

impl LinearModel {
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        ridge_predict(&self.weights, &self.standardizer.transform(x))
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Coefficients on the standardized scale, bias last row.
    pub fn weights(&self) -> &ReadoutWeights {
        &self.weights
    }
}

pub fn fit_ols(x: &Array2<f64>, y: &Array2<f64>) -> Result<LinearModel> {
    let mut m = fit_ridge(x, y, 0.0)?;
    m.params = ModelParams::Ols;
    Ok(m)
}

pub fn fit_ridge(x: &Array2<f64>, y: &Array2<f64>, lambda: f64) -> Result<LinearModel> {
    let standardizer = Standardizer::fit(x);
    let xs = standardizer.transform(x);
    let weights = train_ridge(&xs, y, lambda)?;
    Ok(LinearModel {
        standardizer,
        weights,
        params: ModelParams::Ridge { lambda },
    })
}
