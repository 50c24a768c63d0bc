use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// Stores the raw training rows; distances are Euclidean on unscaled
/// features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct KnnModel {
    k: usize,
    points: DMatrix<f64>,
    labels: Vec<usize>,
}

pub(crate) fn fit(x: &DMatrix<f64>, y: &[usize], _m: usize, params: &KnnParams) -> KnnModel {
    if params.k > x.nrows() {
        log::warn!("k = {} exceeds {} training rows; using all rows", params.k, x.nrows());
    }
    KnnModel {
        k: params.k.min(x.nrows()),
        points: x.clone(),
        labels: y.to_vec(),
    }
}

impl KnnModel {
    /// Vote shares among the k nearest rows. Distance ties go to the smaller
    /// class, then the earlier row; vote ties resolve to the smallest class
    /// through the argmax rule.
    pub(crate) fn predict_proba(&self, x: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), m);
        for i in 0..x.nrows() {
            let mut dist: Vec<(f64, usize, usize)> = (0..self.points.nrows())
                .map(|j| {
                    let d2: f64 = (0..x.ncols())
                        .map(|c| (x[(i, c)] - self.points[(j, c)]).powi(2))
                        .sum();
                    (d2, self.labels[j], j)
                })
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            for &(_, c, _) in &dist[..self.k] {
                out[(i, c)] += 1.0 / self.k as f64;
            }
        }
        out
    }
}
