use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{self, Gini, Tree, TreeConfig};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Defaults to ceil(sqrt(d)).
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            features_per_split: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct ForestModel {
    trees: Vec<Tree>,
}

pub(crate) fn fit(x: &DMatrix<f64>, y: &[usize], m: usize, params: &ForestParams) -> ForestModel {
    let n = x.nrows();
    let d = x.ncols();
    let orders = tree::presort(x);
    let config = TreeConfig {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        features_per_split: Some(
            params
                .features_per_split
                .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
                .min(d),
        ),
    };
    let crit = Gini { labels: y, n_classes: m };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::stream(params.seed, &[b"forest", &(t as u64).to_le_bytes()]);
            let mut weights = vec![0.0; n];
            for _ in 0..n {
                weights[rng.random_range(0..n)] += 1.0;
            }
            let leaf = |rows: &[usize]| {
                let mut dist = vec![0.0; m];
                let mut total = 0.0;
                for &r in rows {
                    dist[y[r]] += weights[r];
                    total += weights[r];
                }
                dist.iter_mut().for_each(|v| *v /= total);
                dist
            };
            tree::build(x, &orders, &weights, &crit, &config, &mut rng, leaf)
        })
        .collect();
    ForestModel { trees }
}

impl ForestModel {
    pub(crate) fn predict_proba(&self, x: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), m);
        let scale = 1.0 / self.trees.len() as f64;
        for i in 0..x.nrows() {
            for t in &self.trees {
                for (c, v) in t.predict_row(x, i).iter().enumerate() {
                    out[(i, c)] += v * scale;
                }
            }
        }
        out
    }
}
