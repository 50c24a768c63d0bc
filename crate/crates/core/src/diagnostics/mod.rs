//! Embedding-space diagnostics for label groups that a classifier confuses:
//! mean cross-pair cosine similarity, divergence between smoothed 2-d
//! densities, and PCA / t-SNE / ISOMAP projections.

mod cosine;
mod density;
mod isomap;
mod kl;
mod pca;
mod svg;
pub mod tsne;

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Level};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::table::{fmt_full, Table};

pub use cosine::{alignment_pairs, avg_pairwise_cosine, cosine_table, SimilarityRow, SimilarityTable};
pub use density::{density_estimate, kl_divergence, Bounds, DensityGrid, GridSpec};
pub use isomap::{isomap_project, isomap_project_auto};
pub use kl::{kl_table, KlRow, KlTable};
pub use pca::{pca_project, Pca};
pub use svg::{scatter_svg, DEFAULT_PALETTE};
pub use tsne::{tsne_project, TsneParams};

/// One label group of one corpus, e.g. skill index 3 of "Test A".
/// `index` is zero-based; display numbering starts at 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupSelector {
    pub corpus: String,
    pub level: Level,
    pub index: usize,
}

impl GroupSelector {
    pub fn new(corpus: impl Into<String>, level: Level, index: usize) -> Self {
        Self {
            corpus: corpus.into(),
            level,
            index,
        }
    }

    pub fn skill(corpus: impl Into<String>, index: usize) -> Self {
        Self::new(corpus, Level::Skill, index)
    }

    /// "Test B skill 4" style, lowercase level word.
    pub fn lower(&self) -> String {
        format!("{} {} {}", self.corpus, self.level.as_str(), self.index + 1)
    }
}

impl fmt::Display for GroupSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.corpus, self.level.title(), self.index + 1)
    }
}

/// A corpus together with the embeddings of its items.
#[derive(Debug, Clone, Copy)]
pub struct Bank<'a> {
    pub corpus: &'a Corpus,
    pub embeddings: &'a EmbeddingSet,
}

/// Resolved member ids and their vectors (one row each).
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub selector: GroupSelector,
    pub ids: Vec<String>,
    pub vectors: DMatrix<f64>,
}

pub fn resolve(banks: &[Bank<'_>], selector: &GroupSelector) -> Result<Group> {
    let bank = banks
        .iter()
        .find(|b| b.corpus.name == selector.corpus)
        .ok_or_else(|| Error::InvalidArgument(format!("no corpus named `{}`", selector.corpus)))?;
    let n = bank.corpus.scheme().n_classes(selector.level);
    if selector.index >= n {
        return Err(Error::InvalidArgument(format!(
            "{selector}: index out of range for {n} classes"
        )));
    }
    let ids: Vec<String> = bank
        .corpus
        .items()
        .iter()
        .filter(|it| it.label(selector.level) == selector.index)
        .map(|it| it.id.clone())
        .collect();
    if ids.is_empty() {
        return Err(Error::Empty(format!("group {selector} has no items")));
    }
    let vectors = bank.embeddings.matrix_for(&ids)?;
    Ok(Group {
        selector: selector.clone(),
        ids,
        vectors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Tsne,
    Isomap,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Tsne => "tsne",
            Method::Isomap => "isomap",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(Method::Pca),
            "tsne" => Ok(Method::Tsne),
            "isomap" => Ok(Method::Isomap),
            _ => Err(Error::InvalidArgument(format!("unknown projection method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ProjectionMeta {
    Pca { explained_variance_ratio: Vec<f64> },
    Tsne {
        perplexity: f64,
        iterations: usize,
        initial_objective: f64,
        final_objective: f64,
    },
    Isomap { k_neighbors: usize },
}

/// Low-dimensional coordinates, one row per input id, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub method: Method,
    pub ids: Vec<String>,
    pub coordinates: DMatrix<f64>,
    pub meta: ProjectionMeta,
    pub seed: Option<u64>,
}

impl ProjectionResult {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        let y = if self.coordinates.ncols() > 1 {
            self.coordinates[(i, 1)]
        } else {
            0.0
        };
        (self.coordinates[(i, 0)], y)
    }

    /// Columns `id,x,y,label` for 2-d output, `id,c1..ck,label` otherwise.
    pub fn to_csv(&self, label_of: impl Fn(&str) -> Option<String>) -> String {
        let k = self.coordinates.ncols();
        let mut header = vec!["id".to_string()];
        if k == 2 {
            header.extend(["x".to_string(), "y".to_string()]);
        } else {
            header.extend((1..=k).map(|c| format!("c{c}")));
        }
        header.push("label".into());
        let mut table = Table::new(header);
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend((0..k).map(|c| fmt_full(self.coordinates[(i, c)])));
            row.push(label_of(id).unwrap_or_default());
            table.push(row);
        }
        table.to_csv()
    }
}

pub(crate) fn check_points(ids: &[String], x: &DMatrix<f64>) -> Result<()> {
    if ids.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: ids.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("coordinates must be finite".into()));
    }
    Ok(())
}

/// Flip each column so its largest-magnitude entry (first on ties) is
/// positive.
pub(crate) fn fix_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Squared Euclidean distance matrix between rows.
pub(crate) fn squared_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = 0.0;
            for c in 0..x.ncols() {
                let t = x[(i, c)] - x[(j, c)];
                s += t * t;
            }
            d[(i, j)] = s;
            d[(j, i)] = s;
        }
    }
    d
}
