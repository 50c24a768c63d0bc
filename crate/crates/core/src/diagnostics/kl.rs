use std::collections::HashSet;

use nalgebra::DMatrix;

use super::density::BOUNDS_PADDING;
use super::{density_estimate, kl_divergence, resolve, Bank, Bounds, GridSpec, GroupSelector, Pca};
use crate::error::Result;
use crate::table::{fmt3, fmt_full, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct KlRow {
    pub from: GroupSelector,
    pub to: GroupSelector,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlTable {
    pub rows: Vec<KlRow>,
    /// Geometry shared by every density in the table.
    pub grid: GridSpec,
}

impl KlTable {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["From", "To", "KL divergence"]);
        for r in &self.rows {
            t.push([r.from.lower(), r.to.lower(), fmt3(r.value)]);
        }
        t
    }

    pub fn to_markdown(&self) -> String {
        self.to_table().to_markdown()
    }

    pub fn to_csv(&self) -> String {
        let mut t = Table::new(["from", "to", "kl_divergence"]);
        for r in &self.rows {
            t.push([r.from.lower(), r.to.lower(), fmt_full(r.value)]);
        }
        t.to_csv()
    }

    /// Target with the smallest divergence among those passing `keep`.
    pub fn argmin(&self, keep: impl Fn(&GroupSelector) -> bool) -> Option<&KlRow> {
        self.rows
            .iter()
            .filter(|r| keep(&r.to))
            .min_by(|a, b| a.value.total_cmp(&b.value))
    }
}

/// KL(from || to) for each distinct target, with every group projected onto
/// one 2-d PCA basis fitted on the deduplicated union of all involved items
/// and every density sharing one grid.
pub fn kl_table(from: &GroupSelector, targets: &[GroupSelector], banks: &[Bank<'_>], spec: &GridSpec) -> Result<KlTable> {
    let mut seen_targets = HashSet::new();
    let targets: Vec<&GroupSelector> = targets.iter().filter(|t| seen_targets.insert(*t)).collect();
    let source = resolve(banks, from)?;
    let groups = targets
        .iter()
        .map(|t| resolve(banks, t))
        .collect::<Result<Vec<_>>>()?;

    let mut seen = HashSet::new();
    let mut union: Vec<Vec<f64>> = Vec::new();
    for g in std::iter::once(&source).chain(&groups) {
        for (i, id) in g.ids.iter().enumerate() {
            if seen.insert((g.selector.corpus.clone(), id.clone())) {
                union.push(g.vectors.row(i).iter().cloned().collect());
            }
        }
    }
    let d = source.vectors.ncols();
    let union = DMatrix::from_fn(union.len(), d, |r, c| union[r][c]);
    let pca = Pca::fit(&union, 2)?;

    let source_pts = pca.transform(&source.vectors)?;
    let target_pts = groups
        .iter()
        .map(|g| pca.transform(&g.vectors))
        .collect::<Result<Vec<_>>>()?;
    let mut grid = spec.clone();
    if grid.bounds.is_none() {
        let all = std::iter::once(&source_pts)
            .chain(&target_pts)
            .flat_map(|m| m.row_iter().map(|r| (r[0], r[1])).collect::<Vec<_>>());
        grid.bounds = Some(Bounds::padded_extent(all, BOUNDS_PADDING)?);
    }
    let p = density_estimate(&source_pts, &grid)?;
    let mut rows = Vec::with_capacity(targets.len());
    for (t, pts) in targets.iter().zip(&target_pts) {
        let q = density_estimate(pts, &grid)?;
        rows.push(KlRow {
            from: from.clone(),
            to: (*t).clone(),
            value: kl_divergence(&p, &q)?,
        });
    }
    Ok(KlTable { rows, grid })
}
