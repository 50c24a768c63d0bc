use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::softmax_rows;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NaiveBayesParams {
    /// Fraction of the largest feature variance added to every variance.
    pub var_smoothing: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        Self { var_smoothing: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct NaiveBayesModel {
    log_prior: Vec<f64>,
    mean: Vec<Vec<f64>>,
    var: Vec<Vec<f64>>,
}

fn column_var(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    values.map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

pub(crate) fn fit(x: &DMatrix<f64>, y: &[usize], m: usize, params: &NaiveBayesParams) -> NaiveBayesModel {
    let n = x.nrows();
    let d = x.ncols();
    let max_var = (0..d)
        .map(|j| column_var(x.column(j).iter().cloned()))
        .fold(0.0, f64::max);
    let eps = params.var_smoothing * if max_var > 0.0 { max_var } else { 1.0 };
    let mut log_prior = Vec::with_capacity(m);
    let mut mean = Vec::with_capacity(m);
    let mut var = Vec::with_capacity(m);
    for c in 0..m {
        let rows: Vec<usize> = (0..n).filter(|&i| y[i] == c).collect();
        log_prior.push((rows.len() as f64 / n as f64).ln());
        let mut mu = Vec::with_capacity(d);
        let mut s2 = Vec::with_capacity(d);
        for j in 0..d {
            let col = rows.iter().map(|&i| x[(i, j)]);
            mu.push(col.clone().sum::<f64>() / rows.len() as f64);
            s2.push(column_var(col) + eps);
        }
        mean.push(mu);
        var.push(s2);
    }
    NaiveBayesModel {
        log_prior,
        mean,
        var,
    }
}

impl NaiveBayesModel {
    pub(crate) fn predict_proba(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.log_prior.len();
        let mut out = DMatrix::from_fn(x.nrows(), m, |i, c| {
            let mut ll = self.log_prior[c];
            for (j, v) in x.row(i).iter().enumerate() {
                let s2 = self.var[c][j];
                ll -= 0.5 * ((2.0 * std::f64::consts::PI * s2).ln() + (v - self.mean[c][j]).powi(2) / s2);
            }
            ll
        });
        softmax_rows(&mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn posterior_matches_hand_computation() {
        let x = DMatrix::from_row_slice(4, 1, &[0.0, 2.0, 10.0, 12.0]);
        let model = fit(&x, &[0, 0, 1, 1], 2, &NaiveBayesParams { var_smoothing: 1e-9 });
        let p = model.predict_proba(&DMatrix::from_row_slice(1, 1, &[6.0]));
        // equal variances and priors, point equidistant from both means
        assert!((p[(0, 0)] - 0.5).abs() < 1e-9);
        let p = model.predict_proba(&DMatrix::from_row_slice(1, 1, &[3.0]));
        let l0 = -(3.0f64 - 1.0).powi(2) / 2.0;
        let l1 = -(3.0f64 - 11.0).powi(2) / 2.0;
        let expect = 1.0 / (1.0 + (l1 - l0).exp());
        assert!((p[(0, 0)] - expect).abs() < 1e-9);
    }
}
