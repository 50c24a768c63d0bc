//! Level-wise CART construction over presorted feature orders.
//!
//! Each level sweeps every feature's sorted row order once, evaluating all
//! open nodes simultaneously. Splits use midpoint thresholds with `x <= t`
//! going left; ties in gain go to the lowest feature index.

use nalgebra::DMatrix;
use rand::Rng;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Additive split-quality statistic. The gain of a split is
/// `score(left) + score(right) - score(parent)`.
pub(crate) trait Criterion: Sync {
    fn width(&self) -> usize;
    fn add(&self, acc: &mut [f64], row: usize, weight: f64);
    fn score(&self, acc: &[f64]) -> f64;
    fn weight(&self, acc: &[f64]) -> f64;
}

/// Gini impurity over compact class labels.
pub(crate) struct Gini<'a> {
    pub labels: &'a [usize],
    pub n_classes: usize,
}

impl Criterion for Gini<'_> {
    fn width(&self) -> usize {
        self.n_classes
    }
    fn add(&self, acc: &mut [f64], row: usize, weight: f64) {
        acc[self.labels[row]] += weight;
    }
    fn score(&self, acc: &[f64]) -> f64 {
        let w: f64 = acc.iter().sum();
        if w > 0.0 {
            acc.iter().map(|c| c * c).sum::<f64>() / w
        } else {
            0.0
        }
    }
    fn weight(&self, acc: &[f64]) -> f64 {
        acc.iter().sum()
    }
}

/// Squared error against real targets.
pub(crate) struct Mse<'a> {
    pub targets: &'a [f64],
}

impl Criterion for Mse<'_> {
    fn width(&self) -> usize {
        2
    }
    fn add(&self, acc: &mut [f64], row: usize, weight: f64) {
        acc[0] += weight;
        acc[1] += weight * self.targets[row];
    }
    fn score(&self, acc: &[f64]) -> f64 {
        if acc[0] > 0.0 {
            acc[1] * acc[1] / acc[0]
        } else {
            0.0
        }
    }
    fn weight(&self, acc: &[f64]) -> f64 {
        acc[0]
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features sampled per node; `None` considers all.
    pub features_per_split: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub(crate) fn leaf_for(&self, row: impl Fn(usize) -> f64) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row(*feature) <= *threshold { *left } else { *right },
                Node::Leaf(v) => return v,
            }
        }
    }

    pub(crate) fn predict_row(&self, x: &DMatrix<f64>, i: usize) -> &[f64] {
        self.leaf_for(|j| x[(i, j)])
    }

    #[cfg(test)]
    pub(crate) fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

/// Row indices of each column sorted by value (stable, so equal values keep
/// row order).
pub(crate) fn presort(x: &DMatrix<f64>) -> Vec<Vec<u32>> {
    (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let mut order: Vec<u32> = (0..x.nrows() as u32).collect();
            order.sort_by(|&a, &b| x[(a as usize, j)].total_cmp(&x[(b as usize, j)]));
            order
        })
        .collect()
}

const NONE: u32 = u32::MAX;

struct Open {
    node: usize,
    depth: usize,
    total: Vec<f64>,
    /// Candidate features, sorted; `None` means all.
    features: Option<Vec<usize>>,
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t >= hi { lo } else { t }
}

/// Grow a tree. Rows with zero weight are ignored. `leaf_value` maps the
/// rows (and their weights) reaching a leaf to its stored value.
pub(crate) fn build<C: Criterion, R: Rng>(
    x: &DMatrix<f64>,
    orders: &[Vec<u32>],
    weights: &[f64],
    crit: &C,
    config: &TreeConfig,
    rng: &mut R,
    leaf_value: impl Fn(&[usize]) -> Vec<f64>,
) -> Tree {
    let n = x.nrows();
    let d = x.ncols();
    let width = crit.width();
    let mut nodes: Vec<Node> = vec![Node::Leaf(Vec::new())];
    let mut node_of = vec![NONE; n];
    let mut root_total = vec![0.0; width];
    for i in 0..n {
        if weights[i] > 0.0 {
            node_of[i] = 0;
            crit.add(&mut root_total, i, weights[i]);
        }
    }
    let sample_features = |rng: &mut R| -> Option<Vec<usize>> {
        match config.features_per_split {
            Some(k) if k < d => {
                let mut f = sample(rng, d, k).into_vec();
                f.sort_unstable();
                Some(f)
            }
            _ => None,
        }
    };
    let mut open = vec![Open {
        node: 0,
        depth: 0,
        total: root_total,
        features: sample_features(rng),
    }];
    let mut leaves: Vec<usize> = Vec::new();
    let min_leaf = config.min_leaf.max(1) as f64;

    while !open.is_empty() {
        // slot index of each open node that may split
        let mut slot_of_node = vec![NONE; nodes.len()];
        let mut splittable = Vec::new();
        for (s, o) in open.iter().enumerate() {
            let depth_ok = config.max_depth.is_none_or(|m| o.depth < m);
            if depth_ok && crit.weight(&o.total) >= 2.0 * min_leaf {
                slot_of_node[o.node] = splittable.len() as u32;
                splittable.push(s);
            }
        }
        let n_slots = splittable.len();
        let mut masks = vec![true; 0];
        let masked = open.iter().any(|o| o.features.is_some());
        if masked {
            masks = vec![false; n_slots * d];
            for (slot, &s) in splittable.iter().enumerate() {
                match &open[s].features {
                    Some(f) => f.iter().for_each(|&j| masks[slot * d + j] = true),
                    None => masks[slot * d..(slot + 1) * d].iter_mut().for_each(|m| *m = true),
                }
            }
        }

        let per_feature: Vec<Vec<Option<Best>>> = if n_slots == 0 {
            Vec::new()
        } else {
            (0..d)
                .into_par_iter()
                .map(|j| {
                    let mut best: Vec<Option<Best>> = vec![None; n_slots];
                    if masked && !(0..n_slots).any(|s| masks[s * d + j]) {
                        return best;
                    }
                    let mut left = vec![0.0; n_slots * width];
                    let mut last = vec![f64::NAN; n_slots];
                    let mut right = vec![0.0; width];
                    for &row in &orders[j] {
                        let row = row as usize;
                        let node = node_of[row];
                        if node == NONE {
                            continue;
                        }
                        let slot = slot_of_node[node as usize];
                        if slot == NONE {
                            continue;
                        }
                        let slot = slot as usize;
                        if masked && !masks[slot * d + j] {
                            continue;
                        }
                        let v = x[(row, j)];
                        let acc = &mut left[slot * width..(slot + 1) * width];
                        if v > last[slot] {
                            let parent = &open[splittable[slot]].total;
                            let wl = crit.weight(acc);
                            let wr = crit.weight(parent) - wl;
                            if wl >= min_leaf && wr >= min_leaf {
                                for k in 0..width {
                                    right[k] = parent[k] - acc[k];
                                }
                                let gain = crit.score(acc) + crit.score(&right) - crit.score(parent);
                                if best[slot].is_none_or(|b| gain > b.gain) {
                                    best[slot] = Some(Best {
                                        gain,
                                        feature: j,
                                        threshold: midpoint(last[slot], v),
                                    });
                                }
                            }
                        }
                        crit.add(acc, row, weights[row]);
                        last[slot] = v;
                    }
                    best
                })
                .collect()
        };

        let mut chosen: Vec<Option<Best>> = vec![None; open.len()];
        for (slot, &s) in splittable.iter().enumerate() {
            let floor = 1e-12 * crit.weight(&open[s].total).max(1.0);
            let mut pick: Option<Best> = None;
            for candidates in &per_feature {
                if let Some(b) = candidates[slot] {
                    if b.gain > floor && pick.is_none_or(|p| b.gain > p.gain) {
                        pick = Some(b);
                    }
                }
            }
            chosen[s] = pick;
        }

        // children, in open-node order
        let mut child_of = vec![(NONE, NONE); nodes.len()];
        let mut next_open = Vec::new();
        for (s, o) in open.iter().enumerate() {
            match chosen[s] {
                Some(b) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf(Vec::new()));
                    nodes.push(Node::Leaf(Vec::new()));
                    nodes[o.node] = Node::Split {
                        feature: b.feature,
                        threshold: b.threshold,
                        left,
                        right: left + 1,
                    };
                    child_of[o.node] = (left as u32, (left + 1) as u32);
                }
                None => leaves.push(o.node),
            }
        }
        child_of.resize(nodes.len(), (NONE, NONE));
        let mut totals = vec![vec![0.0; width]; nodes.len()];
        for row in 0..n {
            let node = node_of[row];
            if node == NONE {
                continue;
            }
            let (l, r) = child_of[node as usize];
            if l == NONE {
                continue;
            }
            let Node::Split { feature, threshold, .. } = nodes[node as usize] else {
                unreachable!()
            };
            let child = if x[(row, feature)] <= threshold { l } else { r };
            node_of[row] = child;
            crit.add(&mut totals[child as usize], row, weights[row]);
        }
        for o in &open {
            let (l, r) = child_of[o.node];
            if l == NONE {
                continue;
            }
            for (child, depth) in [(l, o.depth + 1), (r, o.depth + 1)] {
                next_open.push(Open {
                    node: child as usize,
                    depth,
                    total: std::mem::take(&mut totals[child as usize]),
                    features: sample_features(rng),
                });
            }
        }
        open = next_open;
    }

    let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for row in 0..n {
        if node_of[row] != NONE {
            rows_of[node_of[row] as usize].push(row);
        }
    }
    for leaf in leaves {
        nodes[leaf] = Node::Leaf(leaf_value(&rows_of[leaf]));
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn class_leaf(labels: &[usize], k: usize) -> impl Fn(&[usize]) -> Vec<f64> + '_ {
        move |rows: &[usize]| {
            let mut v = vec![0.0; k];
            rows.iter().for_each(|&r| v[labels[r]] += 1.0);
            v
        }
    }

    #[test]
    fn splits_at_midpoint_between_classes() {
        let x = DMatrix::from_row_slice(4, 1, &[1.0, 2.0, 4.0, 6.0]);
        let y = [0, 0, 1, 1];
        let orders = presort(&x);
        let crit = Gini { labels: &y, n_classes: 2 };
        let cfg = TreeConfig { max_depth: None, min_leaf: 1, features_per_split: None };
        let tree = build(&x, &orders, &[1.0; 4], &crit, &cfg, &mut seed::stream(0, &[]), class_leaf(&y, 2));
        assert_eq!(tree.n_leaves(), 2);
        let Node::Split { threshold, .. } = tree.nodes[0] else { panic!() };
        assert_eq!(threshold, 3.0);
    }

    #[test]
    fn pure_fully_grown_tree_fits_training_data() {
        let mut g = seed::Gaussian::new(seed::stream(1, &[]));
        let mut raw = vec![0.0; 100 * 3];
        g.fill(&mut raw, 1.0);
        let x = DMatrix::from_row_slice(100, 3, &raw);
        let y: Vec<usize> = (0..100).map(|i| (i * 7) % 3).collect();
        let orders = presort(&x);
        let crit = Gini { labels: &y, n_classes: 3 };
        let cfg = TreeConfig { max_depth: None, min_leaf: 1, features_per_split: None };
        let tree = build(&x, &orders, &[1.0; 100], &crit, &cfg, &mut seed::stream(0, &[]), class_leaf(&y, 3));
        for i in 0..100 {
            let leaf = tree.predict_row(&x, i);
            assert_eq!(super::super::argmax(leaf), y[i]);
        }
    }

    #[test]
    fn depth_limit_and_min_leaf_respected() {
        let x = DMatrix::from_row_slice(8, 1, &[1., 2., 3., 4., 5., 6., 7., 8.]);
        let y = [0, 1, 0, 1, 0, 1, 0, 1];
        let orders = presort(&x);
        let crit = Gini { labels: &y, n_classes: 2 };
        let cfg = TreeConfig { max_depth: Some(1), min_leaf: 1, features_per_split: None };
        let tree = build(&x, &orders, &[1.0; 8], &crit, &cfg, &mut seed::stream(0, &[]), class_leaf(&y, 2));
        assert!(tree.n_leaves() <= 2);
        let cfg = TreeConfig { max_depth: None, min_leaf: 4, features_per_split: None };
        let tree = build(&x, &orders, &[1.0; 8], &crit, &cfg, &mut seed::stream(0, &[]), class_leaf(&y, 2));
        for node in &tree.nodes {
            if let Node::Leaf(v) = node {
                assert!(v.iter().sum::<f64>() >= 4.0);
            }
        }
    }

    #[test]
    fn mse_tree_recovers_step_function() {
        let x = DMatrix::from_fn(20, 1, |i, _| i as f64);
        let t: Vec<f64> = (0..20).map(|i| if i < 12 { -1.0 } else { 2.0 }).collect();
        let orders = presort(&x);
        let crit = Mse { targets: &t };
        let cfg = TreeConfig { max_depth: Some(1), min_leaf: 1, features_per_split: None };
        let tree = build(&x, &orders, &[1.0; 20], &crit, &cfg, &mut seed::stream(0, &[]), |rows: &[usize]| {
            vec![rows.iter().map(|&r| t[r]).sum::<f64>() / rows.len() as f64]
        });
        let Node::Split { threshold, .. } = tree.nodes[0] else { panic!() };
        assert_eq!(threshold, 11.5);
        assert_eq!(tree.predict_row(&x, 3), &[-1.0]);
    }
}
