//! Exact t-SNE.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_points, squared_distances, Method, ProjectionMeta, ProjectionResult};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            seed: 0,
        }
    }
}

const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const ENTROPY_TOL: f64 = 1e-5;
const MAX_BISECTION: usize = 50;
const P_FLOOR: f64 = 1e-12;

/// Conditional affinities row `i` at precision `beta`; returns entropy
/// (natural log).
fn row_affinities(d: &DMatrix<f64>, i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let n = d.nrows();
    let dmin = (0..n)
        .filter(|&j| j != i)
        .map(|j| d[(i, j)])
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for j in 0..n {
        if j == i {
            out[j] = 0.0;
            continue;
        }
        let shifted = d[(i, j)] - dmin;
        let p = (-shifted * beta).exp();
        out[j] = p;
        sum += p;
        weighted += shifted * p;
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
    sum.ln() + beta * weighted / sum
}

/// Bisection on the precision of row `i` until its entropy matches
/// `target` within the tolerance.
fn solve_row(d: &DMatrix<f64>, i: usize, target: f64) -> Vec<f64> {
    let n = d.nrows();
    let mut row = vec![0.0; n];
    let mean_d = (0..n).filter(|&j| j != i).map(|j| d[(i, j)]).sum::<f64>() / (n - 1) as f64;
    let mut beta = if mean_d > 0.0 { 1.0 / mean_d } else { 1.0 };
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for _ in 0..MAX_BISECTION {
        let diff = row_affinities(d, i, beta, &mut row) - target;
        if diff.abs() < ENTROPY_TOL {
            return row;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_infinite() { beta * 2.0 } else { (beta + hi) / 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    row_affinities(d, i, beta, &mut row);
    row
}

/// Symmetrized joint affinities for the input rows. Off-diagonal entries
/// are floored and the matrix renormalized to sum 1; the diagonal is 0.
pub fn joint_affinities(x: &DMatrix<f64>, perplexity: f64) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if n < 4 {
        return Err(Error::InvalidArgument(format!("t-SNE needs at least 4 points, got {n}")));
    }
    if !(perplexity > 0.0) || perplexity >= (n - 1) as f64 / 3.0 {
        return Err(Error::InvalidArgument(format!(
            "perplexity {perplexity} infeasible for {n} points (must be in (0, {}))",
            (n - 1) as f64 / 3.0
        )));
    }
    let d = squared_distances(x);
    let target = perplexity.ln();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        let row = solve_row(&d, i, target);
        for j in 0..n {
            p[(i, j)] = row[j];
        }
    }
    let mut joint = (&p + p.transpose()) / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            joint[(i, j)] = if i == j { 0.0 } else { joint[(i, j)].max(P_FLOOR) };
        }
    }
    let total = joint.sum();
    Ok(joint / total)
}

/// Student-t kernel weights and their off-diagonal sum.
fn kernel(y: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let mut w = squared_distances(y);
    let mut z = 0.0;
    let n = y.nrows();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                w[(i, j)] = 0.0;
            } else {
                w[(i, j)] = 1.0 / (1.0 + w[(i, j)]);
                z += w[(i, j)];
            }
        }
    }
    (w, z)
}

/// KL(P || Q) for embedding `y` (n x 2).
pub fn kl_objective(p: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let (w, z) = kernel(y);
    let n = y.nrows();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[(i, j)];
            if i != j && pij > 0.0 {
                kl += pij * (pij / (w[(i, j)] / z)).ln();
            }
        }
    }
    kl
}

/// Gradient of `kl_objective` scaled by `exaggeration` on P.
fn gradient(p: &DMatrix<f64>, y: &DMatrix<f64>, exaggeration: f64) -> DMatrix<f64> {
    let (w, z) = kernel(y);
    let (n, k) = y.shape();
    let mut g = DMatrix::zeros(n, k);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let coef = 4.0 * (exaggeration * p[(i, j)] - w[(i, j)] / z) * w[(i, j)];
            for c in 0..k {
                g[(i, c)] += coef * (y[(i, c)] - y[(j, c)]);
            }
        }
    }
    g
}

pub fn kl_gradient(p: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    gradient(p, y, 1.0)
}

/// Gradient descent from a seeded N(0, 1e-4^2) start with momentum, gains
/// and early exaggeration. Returns the embedding and the unexaggerated
/// objective at the start and end.
pub fn tsne_embed(p: &DMatrix<f64>, params: &TsneParams) -> (DMatrix<f64>, f64, f64) {
    let n = p.nrows();
    let mut g = seed::Gaussian::new(seed::stream(params.seed, &[b"tsne-init"]));
    let mut y = DMatrix::zeros(n, 2);
    g.fill(y.as_mut_slice(), 1e-4);
    let initial = kl_objective(p, &y);
    let mut update = DMatrix::<f64>::zeros(n, 2);
    let mut gains = DMatrix::<f64>::from_element(n, 2, 1.0);
    for it in 0..params.iterations {
        let (exaggeration, momentum) = if it < EXAGGERATION_ITERS {
            (EXAGGERATION, 0.5)
        } else {
            (1.0, 0.8)
        };
        let grad = gradient(p, &y, exaggeration);
        for idx in 0..n * 2 {
            let (gr, up) = (grad[idx], update[idx]);
            gains[idx] = if (gr > 0.0) != (up > 0.0) {
                gains[idx] + 0.2
            } else {
                (gains[idx] * 0.8).max(0.01)
            };
            update[idx] = momentum * up - params.learning_rate * gains[idx] * gr;
            y[idx] += update[idx];
        }
        let mean = y.row_mean();
        for mut row in y.row_iter_mut() {
            row -= &mean;
        }
    }
    let last = kl_objective(p, &y);
    (y, initial, last)
}

pub fn tsne_project(ids: &[String], x: &DMatrix<f64>, params: &TsneParams) -> Result<ProjectionResult> {
    check_points(ids, x)?;
    if !(params.learning_rate > 0.0) {
        return Err(Error::InvalidArgument("learning_rate must be positive".into()));
    }
    let p = joint_affinities(x, params.perplexity)?;
    let (y, initial, last) = tsne_embed(&p, params);
    Ok(ProjectionResult {
        method: Method::Tsne,
        ids: ids.to_vec(),
        coordinates: y,
        meta: ProjectionMeta::Tsne {
            perplexity: params.perplexity,
            iterations: params.iterations,
            initial_objective: initial,
            final_objective: last,
        },
        seed: Some(params.seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(n: usize, d: usize, s: u64, scale: f64) -> DMatrix<f64> {
        let mut g = seed::Gaussian::new(seed::stream(s, &[b"t"]));
        let mut m = DMatrix::zeros(n, d);
        g.fill(m.as_mut_slice(), scale);
        m
    }

    #[test]
    fn affinities_normalized_and_perplexity_matched() {
        let x = random(30, 5, 1, 1.0);
        let p = joint_affinities(&x, 5.0).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-12);
        assert!((0..30).all(|i| p[(i, i)] == 0.0));
        assert!((&p - p.transpose()).amax() < 1e-18);
        let d = squared_distances(&x);
        for i in [0, 7, 29] {
            let row = solve_row(&d, i, 5f64.ln());
            let h: f64 = row.iter().filter(|&&v| v > 0.0).map(|v| -v * v.ln()).sum();
            assert!((h.exp() - 5.0).abs() < 1e-3, "{}", h.exp());
        }
    }

    #[test]
    fn infeasible_perplexity() {
        let x = random(10, 3, 2, 1.0);
        assert!(joint_affinities(&x, 3.0).is_err());
        assert!(joint_affinities(&x, 2.9).is_ok());
        assert!(joint_affinities(&random(3, 3, 2, 1.0), 0.5).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = random(20, 4, 3, 1.0);
        let p = joint_affinities(&x, 5.0).unwrap();
        let mut y = random(20, 2, 4, 1.0);
        let g = kl_gradient(&p, &y);
        let h = 1e-5;
        for idx in 0..40 {
            let orig = y[idx];
            y[idx] = orig + h;
            let plus = kl_objective(&p, &y);
            y[idx] = orig - h;
            let minus = kl_objective(&p, &y);
            y[idx] = orig;
            let fd = (plus - minus) / (2.0 * h);
            assert!((fd - g[idx]).abs() / g[idx].abs().max(fd.abs()).max(1e-8) < 1e-4);
        }
    }

    #[test]
    fn duplicate_points_are_handled() {
        let mut x = random(12, 3, 5, 1.0);
        let r0 = x.row(0).into_owned();
        x.row_mut(1).copy_from(&r0);
        let ids: Vec<String> = (0..12).map(|i| i.to_string()).collect();
        let params = TsneParams { perplexity: 3.0, iterations: 300, ..Default::default() };
        let r = tsne_project(&ids, &x, &params).unwrap();
        assert!(r.coordinates.iter().all(|v| v.is_finite()));
    }
}
