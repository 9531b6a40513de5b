//! k-nearest-neighbors regression with Euclidean distance on standardized
//! features. Distance ties break toward the lower training-row index.

use ndarray::{Array1, Array2};

use super::{ModelParams, Standardizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct KnnModel {
    standardizer: Standardizer,
    x_train: Array2<f64>,
    y_train: Array2<f64>,
    k: usize,
    params: ModelParams,
}

impl KnnModel {
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.x_train.ncols() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.x_train.ncols(),
                x.ncols()
            )));
        }
        let xs = self.standardizer.transform(x);
        let h = self.y_train.ncols();
        let mut out = Array2::zeros((x.nrows(), h));
        for (row, query) in xs.rows().into_iter().enumerate() {
            let mut dists: Vec<(f64, usize)> = self
                .x_train
                .rows()
                .into_iter()
                .enumerate()
                .map(|(i, train_row)| {
                    let d = query
                        .iter()
                        .zip(train_row.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                    (d, i)
                })
                .collect();
            dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));

            let mut mean = Array1::zeros(h);
            for &(_, idx) in dists.iter().take(self.k) {
                mean += &self.y_train.row(idx);
            }
            mean /= self.k as f64;
            out.row_mut(row).assign(&mean);
        }
        Ok(out)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

pub fn fit_knn(x: &Array2<f64>, y: &Array2<f64>, k: usize) -> Result<KnnModel> {
    let rows = x.nrows();
    if y.nrows() != rows {
        return Err(Error::Shape(format!(
            "X has {rows} rows but Y has {}",
            y.nrows()
        )));
    }
    if k == 0 || k > rows {
        return Err(Error::Config(format!(
            "k must be in 1..={rows}, got {k}"
        )));
    }
    let standardizer = Standardizer::fit(x);
    let x_train = standardizer.transform(x);
    Ok(KnnModel {
        standardizer,
        x_train,
        y_train: y.clone(),
        k,
        params: ModelParams::Knn { k },
    })
}
