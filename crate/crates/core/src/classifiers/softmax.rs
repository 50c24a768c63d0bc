//! Multinomial logistic regression, full-batch gradient descent on
//! standardized features.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{cross_entropy, softmax_rows, Standardizer};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftmaxParams {
    pub l2: f64,
    /// Upper bound on the step; the effective step is also capped by the
    /// inverse smoothness constant of the objective.
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Stop when the loss improves by less than this.
    pub tol: f64,
}

impl Default for SoftmaxParams {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            learning_rate: 0.1,
            max_iters: 500,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct SoftmaxModel {
    scaler: Standardizer,
    /// d x m
    weights: DMatrix<f64>,
    bias: Vec<f64>,
    pub(crate) loss_history: Vec<f64>,
}

struct Eval {
    loss: f64,
    grad_w: DMatrix<f64>,
    grad_b: DVector<f64>,
}

fn evaluate(x: &DMatrix<f64>, y: &[usize], w: &DMatrix<f64>, b: &DVector<f64>, l2: f64) -> Eval {
    let n = x.nrows() as f64;
    let mut p = x * w;
    for mut row in p.row_iter_mut() {
        row += b.transpose();
    }
    softmax_rows(&mut p);
    let loss = cross_entropy(&p, y) + 0.5 * l2 * w.norm_squared();
    for (i, &c) in y.iter().enumerate() {
        p[(i, c)] -= 1.0;
    }
    let mut grad_w = x.transpose() * &p / n;
    grad_w += w * l2;
    let grad_b = p.row_sum().transpose() / n;
    Eval { loss, grad_w, grad_b }
}

/// Largest eigenvalue of `[X 1]' [X 1] / n` by power iteration.
fn gram_spectral_norm(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows() as f64;
    let d = x.ncols();
    let mut v = DVector::from_element(d + 1, 1.0 / ((d + 1) as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..200 {
        let xv = x * v.rows(0, d) + DVector::from_element(x.nrows(), v[d]);
        let mut next = DVector::zeros(d + 1);
        next.rows_mut(0, d).copy_from(&(x.transpose() * &xv));
        next[d] = xv.sum();
        next /= n;
        let norm = next.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let converged = (norm - lambda).abs() <= 1e-10 * norm;
        lambda = norm;
        v = next / norm;
        if converged {
            break;
        }
    }
    lambda
}

pub(crate) fn fit(x: &DMatrix<f64>, y: &[usize], m: usize, params: &SoftmaxParams) -> SoftmaxModel {
    let scaler = Standardizer::fit(x);
    let xs = scaler.apply(x);
    let d = xs.ncols();
    // softmax cross-entropy Hessian is bounded by 1/2 the feature Gram matrix
    let lipschitz = 0.5 * gram_spectral_norm(&xs) * 1.05 + params.l2;
    let step = params.learning_rate.min(1.0 / lipschitz);
    let mut w = DMatrix::zeros(d, m);
    let mut b = DVector::zeros(m);
    let mut eval = evaluate(&xs, y, &w, &b, params.l2);
    let mut loss_history = vec![eval.loss];
    for _ in 0..params.max_iters {
        w -= &eval.grad_w * step;
        b -= &eval.grad_b * step;
        let next = evaluate(&xs, y, &w, &b, params.l2);
        let improvement = eval.loss - next.loss;
        loss_history.push(next.loss);
        eval = next;
        if improvement.abs() < params.tol {
            break;
        }
    }
    SoftmaxModel {
        scaler,
        weights: w,
        bias: b.iter().cloned().collect(),
        loss_history,
    }
}

impl SoftmaxModel {
    pub(crate) fn predict_proba(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let xs = self.scaler.apply(x);
        let mut p = xs * &self.weights;
        for mut row in p.row_iter_mut() {
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        softmax_rows(&mut p);
        p
    }
}

pub(crate) fn random_params(d: usize, m: usize, seed: u64) -> Vec<f64> {
    let mut g = seed::Gaussian::new(seed::stream(seed, &[b"gradcheck-softmax"]));
    let mut theta = vec![0.0; d * m + m];
    g.fill(&mut theta, 0.5);
    theta
}

/// Objective and gradient over raw features with parameters flattened as
/// column-major `W` (d x m) followed by `b`.
pub(crate) fn objective_flat(x: &DMatrix<f64>, y: &[usize], m: usize, theta: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let d = x.ncols();
    let w = DMatrix::from_column_slice(d, m, &theta[..d * m]);
    let b = DVector::from_column_slice(&theta[d * m..]);
    let e = evaluate(x, y, &w, &b, l2);
    let mut g: Vec<f64> = e.grad_w.as_slice().to_vec();
    g.extend(e.grad_b.iter());
    (e.loss, g)
}
