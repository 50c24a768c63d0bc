use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::pca::top_eigen;
use super::{check_points, fix_signs, squared_distances, Method, ProjectionMeta, ProjectionResult};
use crate::error::{Error, Result};

/// Symmetric k-nearest-neighbour adjacency lists (union of directed kNN
/// edges), weighted by Euclidean distance.
fn knn_graph(d2: &DMatrix<f64>, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = d2.nrows();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| d2[(i, a)].total_cmp(&d2[(i, b)]).then(a.cmp(&b)));
        for &j in &others[..k] {
            let w = d2[(i, j)].sqrt();
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
    }
    for list in &mut adj {
        list.sort_by(|a, b| a.0.cmp(&b.0));
        list.dedup_by_key(|e| e.0);
    }
    adj
}

fn components(adj: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut sizes = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut size = 0;
        while let Some(u) = queue.pop_front() {
            size += 1;
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        sizes.push(size);
    }
    sizes
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([Entry(0.0, source)]);
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
    dist
}

/// Classical MDS of a distance matrix.
fn classical_mds(g: &DMatrix<f64>, out_dim: usize) -> DMatrix<f64> {
    let n = g.nrows();
    let sq = g.map(|v| v * v);
    let row_means: Vec<f64> = sq.row_iter().map(|r| r.sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    let (values, vectors) = top_eigen(b, out_dim);
    let mut y = vectors;
    for (c, mut col) in y.column_iter_mut().enumerate() {
        col *= values[c].max(0.0).sqrt();
    }
    fix_signs(&mut y);
    y
}

pub fn isomap_project(ids: &[String], x: &DMatrix<f64>, k_neighbors: usize, out_dim: usize) -> Result<ProjectionResult> {
    check_points(ids, x)?;
    let n = x.nrows();
    if k_neighbors == 0 || k_neighbors >= n {
        return Err(Error::InvalidArgument(format!(
            "k_neighbors must be in 1..{n}, got {k_neighbors}"
        )));
    }
    if out_dim == 0 || out_dim > n {
        return Err(Error::InvalidArgument(format!("out_dim {out_dim} must be in 1..={n}")));
    }
    let adj = knn_graph(&squared_distances(x), k_neighbors);
    let sizes = components(&adj);
    if sizes.len() > 1 {
        return Err(Error::DisconnectedGraph { sizes });
    }
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| dijkstra(&adj, s)).collect();
    let g = DMatrix::from_fn(n, n, |i, j| 0.5 * (rows[i][j] + rows[j][i]));
    Ok(ProjectionResult {
        method: Method::Isomap,
        ids: ids.to_vec(),
        coordinates: classical_mds(&g, out_dim),
        meta: ProjectionMeta::Isomap { k_neighbors },
        seed: None,
    })
}

/// Like [`isomap_project`], raising k one step at a time until the
/// neighbourhood graph is connected.
pub fn isomap_project_auto(ids: &[String], x: &DMatrix<f64>, k_start: usize, out_dim: usize) -> Result<ProjectionResult> {
    let mut k = k_start.max(1);
    loop {
        match isomap_project(ids, x, k, out_dim) {
            Err(Error::DisconnectedGraph { sizes }) if k + 1 < x.nrows() => {
                log::info!("isomap graph disconnected at k = {k} ({} components); raising k", sizes.len());
                k += 1;
            }
            other => return other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn two_far_clusters_are_disconnected() {
        let mut x = DMatrix::zeros(8, 2);
        for i in 0..4 {
            x[(i, 0)] = i as f64;
            x[(i + 4, 0)] = 1e6 + i as f64;
        }
        match isomap_project(&ids(8), &x, 3, 2) {
            Err(Error::DisconnectedGraph { sizes }) => assert_eq!(sizes, vec![4, 4]),
            other => panic!("{other:?}"),
        }
        let r = isomap_project_auto(&ids(8), &x, 3, 2).unwrap();
        assert_eq!(r.meta, ProjectionMeta::Isomap { k_neighbors: 4 });
    }

    #[test]
    fn k_bounds() {
        let x = DMatrix::zeros(3, 2);
        assert!(isomap_project(&ids(3), &x, 3, 2).is_err());
        assert!(isomap_project(&ids(3), &x, 0, 2).is_err());
    }

    #[test]
    fn dijkstra_on_a_path() {
        let adj = vec![vec![(1, 1.0)], vec![(0, 1.0), (2, 2.5)], vec![(1, 2.5)]];
        assert_eq!(dijkstra(&adj, 0), vec![0.0, 1.0, 3.5]);
    }
}
