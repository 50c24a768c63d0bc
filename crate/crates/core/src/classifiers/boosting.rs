//! Multiclass gradient boosting with regression trees on softmax residuals.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{self, Mse, Tree, TreeConfig};
use super::{cross_entropy, softmax_rows};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostingParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Row fraction drawn without replacement per round.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 1,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl BoostingParams {
    pub fn xgboost_like() -> Self {
        Self {
            learning_rate: 0.3,
            max_depth: 6,
            ..Self::default()
        }
    }

    pub fn lightgbm_like() -> Self {
        Self {
            max_depth: 5,
            min_leaf: 20,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct BoostingModel {
    init: Vec<f64>,
    learning_rate: f64,
    /// One tree per class per round.
    rounds: Vec<Vec<Tree>>,
    pub(crate) loss_history: Vec<f64>,
}

pub(crate) fn fit(x: &DMatrix<f64>, y: &[usize], m: usize, params: &BoostingParams) -> BoostingModel {
    let n = x.nrows();
    let orders = tree::presort(x);
    let mut counts = vec![0.0; m];
    y.iter().for_each(|&c| counts[c] += 1.0);
    let init: Vec<f64> = counts.iter().map(|c| (c / n as f64).ln()).collect();
    let mut f = DMatrix::from_fn(n, m, |_, c| init[c]);
    let config = TreeConfig {
        max_depth: Some(params.max_depth),
        min_leaf: params.min_leaf,
        features_per_split: None,
    };
    let kf = m as f64;
    let mut rounds = Vec::with_capacity(params.n_rounds);
    let mut loss_history = Vec::with_capacity(params.n_rounds + 1);
    for round in 0..params.n_rounds {
        let mut p = f.clone();
        softmax_rows(&mut p);
        loss_history.push(cross_entropy(&p, y));
        let weights: Vec<f64> = if params.subsample < 1.0 {
            let k = ((params.subsample * n as f64).round() as usize).clamp(1, n);
            let mut rng = seed::stream(params.seed, &[b"boost-subsample", &(round as u64).to_le_bytes()]);
            let mut w = vec![0.0; n];
            sample(&mut rng, n, k).into_iter().for_each(|i| w[i] = 1.0);
            w
        } else {
            vec![1.0; n]
        };
        let trees: Vec<Tree> = (0..m)
            .into_par_iter()
            .map(|c| {
                let residual: Vec<f64> = (0..n)
                    .map(|i| if y[i] == c { 1.0 } else { 0.0 } - p[(i, c)])
                    .collect();
                let crit = Mse { targets: &residual };
                let leaf = |rows: &[usize]| {
                    let (mut num, mut den) = (0.0, 0.0);
                    for &r in rows {
                        let g = residual[r];
                        num += weights[r] * g;
                        den += weights[r] * g.abs() * (1.0 - g.abs());
                    }
                    let gamma = if den > 1e-150 { (kf - 1.0) / kf * num / den } else { 0.0 };
                    vec![gamma]
                };
                // no random choices inside the tree
                let mut rng = seed::stream(params.seed, &[b"boost-tree"]);
                tree::build(x, &orders, &weights, &crit, &config, &mut rng, leaf)
            })
            .collect();
        for i in 0..n {
            for (c, t) in trees.iter().enumerate() {
                f[(i, c)] += params.learning_rate * t.predict_row(x, i)[0];
            }
        }
        rounds.push(trees);
    }
    let mut p = f;
    softmax_rows(&mut p);
    loss_history.push(cross_entropy(&p, y));
    BoostingModel {
        init,
        learning_rate: params.learning_rate,
        rounds,
        loss_history,
    }
}

impl BoostingModel {
    pub(crate) fn predict_proba(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.init.len();
        let mut f = DMatrix::from_fn(x.nrows(), m, |_, c| self.init[c]);
        for i in 0..x.nrows() {
            for trees in &self.rounds {
                for (c, t) in trees.iter().enumerate() {
                    f[(i, c)] += self.learning_rate * t.predict_row(x, i)[0];
                }
            }
        }
        softmax_rows(&mut f);
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_loss_decreases() {
        let x = DMatrix::from_fn(60, 2, |i, j| ((i * (j + 3)) % 17) as f64);
        let y: Vec<usize> = (0..60).map(|i| if (i * 3) % 17 < 8 { 0 } else { 1 + i % 2 }).collect();
        let model = fit(&x, &y, 3, &BoostingParams { n_rounds: 30, ..Default::default() });
        let h = &model.loss_history;
        assert!(h.last().unwrap() < &(h[0] * 0.8));
    }
}
