//! One-vs-rest linear SVM trained by hinge-loss SGD.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Standardizer;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    /// Inverse regularization strength; lambda = 1 / (c n).
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 30,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct SvmModel {
    scaler: Standardizer,
    /// One (weights, bias) per class.
    planes: Vec<(Vec<f64>, f64)>,
}

fn fit_binary(x: &DMatrix<f64>, positive: &[bool], params: &SvmParams, class: usize) -> (Vec<f64>, f64) {
    let n = x.nrows();
    let d = x.ncols();
    let lambda = 1.0 / (params.c * n as f64);
    // typical squared row norm of standardized data is d
    let eta0 = 1.0 / d as f64;
    let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().cloned().collect()).collect();
    // w is stored as scale * v to make the shrink step O(1)
    let mut v = vec![0.0; d];
    let mut scale = 1.0;
    let mut bias = 0.0;
    let mut t = 0usize;
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..params.epochs {
        let mut rng = seed::stream(
            params.seed,
            &[b"svm", &(class as u64).to_le_bytes(), &(epoch as u64).to_le_bytes()],
        );
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = eta0 / (1.0 + lambda * eta0 * t as f64);
            t += 1;
            let y = if positive[i] { 1.0 } else { -1.0 };
            let margin = y * (scale * dot(&v, &rows[i]) + bias);
            scale *= 1.0 - eta * lambda;
            if margin < 1.0 {
                let step = eta * y / scale;
                for (vj, xj) in v.iter_mut().zip(&rows[i]) {
                    *vj += step * xj;
                }
                bias += eta * y;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|vj| *vj *= scale);
                scale = 1.0;
            }
        }
    }
    (v.into_iter().map(|vj| vj * scale).collect(), bias)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn fit(x: &DMatrix<f64>, y: &[usize], m: usize, params: &SvmParams) -> SvmModel {
    let scaler = Standardizer::fit(x);
    let xs = scaler.apply(x);
    let planes = (0..m)
        .into_par_iter()
        .map(|c| {
            let positive: Vec<bool> = y.iter().map(|&l| l == c).collect();
            fit_binary(&xs, &positive, params, c)
        })
        .collect();
    SvmModel { scaler, planes }
}

impl SvmModel {
    pub(crate) fn decision(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let xs = self.scaler.apply(x);
        DMatrix::from_fn(xs.nrows(), self.planes.len(), |i, c| {
            let (w, b) = &self.planes[c];
            xs.row(i).iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_blobs() {
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..30 {
            let t = (i as f64 * 0.37).sin();
            data.extend_from_slice(&[2.0 + t, 1.0 - t]);
            y.push(0);
            data.extend_from_slice(&[-2.0 + t, -1.0 + t]);
            y.push(1);
        }
        let x = DMatrix::from_row_slice(60, 2, &data);
        let model = fit(&x, &y, 2, &SvmParams::default());
        let s = model.decision(&x);
        for (i, &label) in y.iter().enumerate() {
            let pred = if s[(i, 0)] >= s[(i, 1)] { 0 } else { 1 };
            assert_eq!(pred, label);
        }
    }
}
