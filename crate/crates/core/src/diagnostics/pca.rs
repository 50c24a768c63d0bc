use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{check_points, fix_signs, Method, ProjectionMeta, ProjectionResult};
use crate::error::{Error, Result};

/// A fitted principal-component basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// d x k, orthonormal columns in descending eigenvalue order.
    pub components: DMatrix<f64>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

/// Eigenpairs sorted by descending eigenvalue (stable on ties).
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub(crate) fn top_eigen(m: DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let (mut values, vectors) = sorted_eigen(m);
    values.truncate(k);
    (values, vectors.columns(0, k).into_owned())
}

impl Pca {
    pub fn fit(x: &DMatrix<f64>, out_dim: usize) -> Result<Self> {
        let (n, d) = x.shape();
        if n < 2 {
            return Err(Error::InvalidArgument("PCA needs at least 2 points".into()));
        }
        if out_dim == 0 || out_dim > n.min(d) {
            return Err(Error::InvalidArgument(format!(
                "out_dim {out_dim} must be in 1..={}",
                n.min(d)
            )));
        }
        let mean: Vec<f64> = x.column_iter().map(|c| c.sum() / n as f64).collect();
        let mut xc = x.clone();
        for (j, mut col) in xc.column_iter_mut().enumerate() {
            col.add_scalar_mut(-mean[j]);
        }
        let denom = (n - 1) as f64;
        let total = xc.norm_squared() / denom;
        let (values, mut components) = if d <= n {
            top_eigen(xc.transpose() * &xc / denom, out_dim)
        } else {
            // n x n Gram route; v = X'u / sqrt(denom * lambda)
            let (values, u) = top_eigen(&xc * xc.transpose() / denom, out_dim);
            let mut v = xc.transpose() * u;
            for mut col in v.column_iter_mut() {
                let norm = col.norm();
                if norm > 0.0 {
                    col /= norm;
                }
            }
            (values, v)
        };
        fix_signs(&mut components);
        let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
        let ratio = values
            .iter()
            .map(|v| if total > 0.0 { v / total } else { 0.0 })
            .collect();
        Ok(Self {
            mean,
            components,
            explained_variance: values,
            explained_variance_ratio: ratio,
        })
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.ncols(),
            });
        }
        let mut xc = x.clone();
        for (j, mut col) in xc.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.mean[j]);
        }
        Ok(xc * &self.components)
    }
}

pub fn pca_project(ids: &[String], x: &DMatrix<f64>, out_dim: usize) -> Result<ProjectionResult> {
    check_points(ids, x)?;
    let pca = Pca::fit(x, out_dim)?;
    Ok(ProjectionResult {
        method: Method::Pca,
        ids: ids.to_vec(),
        coordinates: pca.transform(x)?,
        meta: ProjectionMeta::Pca {
            explained_variance_ratio: pca.explained_variance_ratio,
        },
        seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn collinear_points_have_unit_ratio() {
        let x = DMatrix::from_fn(5, 3, |i, j| (i + 1) as f64 * (j + 1) as f64);
        let p = Pca::fit(&x, 1).unwrap();
        assert!((p.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_rank_projection_preserves_distances() {
        let mut g = seed::Gaussian::new(seed::stream(5, &[]));
        let mut raw = vec![0.0; 30 * 4];
        g.fill(&mut raw, 1.0);
        let x = DMatrix::from_row_slice(30, 4, &raw);
        let y = pca_project(&ids(30), &x, 4).unwrap().coordinates;
        for i in 0..30 {
            for j in 0..30 {
                let a = (x.row(i) - x.row(j)).norm();
                let b = (y.row(i) - y.row(j)).norm();
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gram_route_matches_covariance_route() {
        let mut g = seed::Gaussian::new(seed::stream(6, &[]));
        let mut raw = vec![0.0; 6 * 10];
        g.fill(&mut raw, 1.0);
        let wide = DMatrix::from_row_slice(6, 10, &raw);
        let p = Pca::fit(&wide, 3).unwrap();
        // compare against the d x d covariance eigenproblem
        let mean = wide.row_mean();
        let mut xc = wide.clone();
        for mut row in xc.row_iter_mut() {
            row -= &mean;
        }
        let (values, mut vectors) = top_eigen(xc.transpose() * &xc / 5.0, 3);
        fix_signs(&mut vectors);
        for c in 0..3 {
            assert!((values[c] - p.explained_variance[c]).abs() < 1e-9);
            assert!((vectors.column(c) - p.components.column(c)).norm() < 1e-8);
        }
    }

    #[test]
    fn sign_convention_and_errors() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, -1.0, 0.1, -2.0, 0.0]);
        let p = Pca::fit(&x, 1).unwrap();
        let col = p.components.column(0);
        let big = if col[0].abs() >= col[1].abs() { col[0] } else { col[1] };
        assert!(big > 0.0);
        assert!(Pca::fit(&x, 3).is_err());
        assert!(Pca::fit(&DMatrix::zeros(1, 2), 1).is_err());
    }
}
