//! One-hidden-layer ReLU network trained with Adam on minibatches.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{argmax, cross_entropy, softmax_rows, Standardizer};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop after this many epochs without validation improvement; `None`
    /// runs every epoch and keeps the best one.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 256,
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 32,
            patience: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Weights {
    w1: DMatrix<f64>,
    b1: DVector<f64>,
    w2: DMatrix<f64>,
    b2: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct MlpModel {
    scaler: Standardizer,
    weights: Weights,
    pub(crate) loss_history: Vec<f64>,
}

impl Weights {
    fn init(d: usize, h: usize, m: usize, seed: u64) -> Self {
        let mut g = seed::Gaussian::new(seed::stream(seed, &[b"mlp-init"]));
        let mut w1 = DMatrix::zeros(d, h);
        g.fill(w1.as_mut_slice(), (2.0 / d as f64).sqrt());
        let mut w2 = DMatrix::zeros(h, m);
        g.fill(w2.as_mut_slice(), (1.0 / h as f64).sqrt());
        Self {
            w1,
            b1: DVector::zeros(h),
            w2,
            b2: DVector::zeros(m),
        }
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut v = self.w1.as_slice().to_vec();
        v.extend(self.b1.iter());
        v.extend(self.w2.as_slice());
        v.extend(self.b2.iter());
        v
    }

    fn from_flat(d: usize, h: usize, m: usize, t: &[f64]) -> Self {
        let (a, rest) = t.split_at(d * h);
        let (b, rest) = rest.split_at(h);
        let (c, e) = rest.split_at(h * m);
        Self {
            w1: DMatrix::from_column_slice(d, h, a),
            b1: DVector::from_column_slice(b),
            w2: DMatrix::from_column_slice(h, m, c),
            b2: DVector::from_column_slice(e),
        }
    }

    /// Hidden activations and output probabilities.
    fn forward(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut hid = x * &self.w1;
        for mut row in hid.row_iter_mut() {
            for (v, b) in row.iter_mut().zip(self.b1.iter()) {
                *v = (*v + b).max(0.0);
            }
        }
        let mut out = &hid * &self.w2;
        for mut row in out.row_iter_mut() {
            for (v, b) in row.iter_mut().zip(self.b2.iter()) {
                *v += b;
            }
        }
        softmax_rows(&mut out);
        (hid, out)
    }

    /// Mean cross-entropy and its gradient.
    fn loss_and_grad(&self, x: &DMatrix<f64>, y: &[usize]) -> (f64, Weights) {
        let n = x.nrows() as f64;
        let (hid, mut p) = self.forward(x);
        let loss = cross_entropy(&p, y);
        for (i, &c) in y.iter().enumerate() {
            p[(i, c)] -= 1.0;
        }
        p /= n;
        let w2 = hid.transpose() * &p;
        let b2 = p.row_sum().transpose();
        let mut dh = &p * self.w2.transpose();
        dh.zip_apply(&hid, |g, a| {
            if a <= 0.0 {
                *g = 0.0
            }
        });
        let w1 = x.transpose() * &dh;
        let b1 = dh.row_sum().transpose();
        (loss, Weights { w1, b1, w2, b2 })
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            theta[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |r, c| x[(idx[r], c)])
}

/// `validation` labels are compact; `None` marks a class unseen in training.
pub(crate) fn fit(
    x: &DMatrix<f64>,
    y: &[usize],
    m: usize,
    params: &MlpParams,
    validation: Option<(&DMatrix<f64>, &[Option<usize>])>,
) -> MlpModel {
    let scaler = Standardizer::fit(x);
    let xs = scaler.apply(x);
    let (n, d, h) = (xs.nrows(), xs.ncols(), params.hidden);
    let val = validation.map(|(vx, vy)| (scaler.apply(vx), vy));
    let mut weights = Weights::init(d, h, m, params.seed);
    let mut theta = weights.to_flat();
    let mut adam = Adam {
        m: vec![0.0; theta.len()],
        v: vec![0.0; theta.len()],
        t: 0,
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_history = Vec::new();
    let mut best: Option<(f64, Weights)> = None;
    let mut stale = 0;
    for epoch in 0..params.epochs {
        let mut rng = seed::stream(params.seed, &[b"mlp-epoch", &(epoch as u64).to_le_bytes()]);
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size) {
            let bx = rows(&xs, batch);
            let by: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let (_, grad) = weights.loss_and_grad(&bx, &by);
            adam.step(&mut theta, &grad.to_flat(), params.learning_rate);
            weights = Weights::from_flat(d, h, m, &theta);
        }
        let (_, p) = weights.forward(&xs);
        loss_history.push(cross_entropy(&p, y));
        if let Some((vx, vy)) = &val {
            let (_, p) = weights.forward(vx);
            let correct = p
                .row_iter()
                .zip(vy.iter())
                .filter(|(row, truth)| {
                    let row: Vec<f64> = row.iter().cloned().collect();
                    **truth == Some(argmax(&row))
                })
                .count();
            let acc = correct as f64 / vy.len().max(1) as f64;
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, weights.clone()));
                stale = 0;
            } else {
                stale += 1;
                if params.patience.is_some_and(|p| stale >= p) {
                    break;
                }
            }
        }
    }
    if let Some((_, w)) = best {
        weights = w;
    }
    MlpModel {
        scaler,
        weights,
        loss_history,
    }
}

impl MlpModel {
    pub(crate) fn predict_proba(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.weights.forward(&self.scaler.apply(x)).1
    }
}

pub(crate) fn random_params(d: usize, h: usize, m: usize, seed: u64) -> Vec<f64> {
    let mut w = Weights::init(d, h, m, seed);
    let mut g = seed::Gaussian::new(seed::stream(seed, &[b"gradcheck-mlp"]));
    g.fill(w.b1.as_mut_slice(), 0.5);
    g.fill(w.b2.as_mut_slice(), 0.5);
    w.to_flat()
}

/// Objective over raw features; parameters flattened as `W1, b1, W2, b2`,
/// matrices column-major.
pub(crate) fn objective_flat(x: &DMatrix<f64>, y: &[usize], h: usize, m: usize, theta: &[f64]) -> (f64, Vec<f64>) {
    let w = Weights::from_flat(x.ncols(), h, m, theta);
    let (loss, g) = w.loss_and_grad(x, y);
    (loss, g.to_flat())
}
