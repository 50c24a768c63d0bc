//! Embedding sets: the on-disk format, validation, normalization and a
//! planted-structure generator for desk-scale experiments.
//!
//! File layout: a JSON header line `{"dim":..,"provider":..,"condition":..,"count":..}`
//! followed by one `<id>\t<v1> <v2> ... <vdim>` line per record, LF line
//! endings. Floats are written in shortest round-trip form, so a written set
//! reads back bit-identical.

use indexmap::IndexMap;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::InputCondition;
use crate::error::{Error, Result};
use crate::seed::{self, Gaussian};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingHeader {
    pub dim: usize,
    /// Free-form provenance (model id, pooling); stored, never interpreted.
    pub provider: String,
    pub condition: InputCondition,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    header: EmbeddingHeader,
    records: IndexMap<String, Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(
        provider: impl Into<String>,
        condition: InputCondition,
        dim: usize,
        records: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmbeddingHeader("dim must be at least 1".into()));
        }
        let mut map = IndexMap::with_capacity(records.len());
        for (i, (id, v)) in records.into_iter().enumerate() {
            let line = i + 2;
            check_vector(line, &id, &v, dim)?;
            if map.contains_key(&id) {
                return Err(Error::DuplicateId { line, id });
            }
            map.insert(id, v);
        }
        Ok(Self {
            header: EmbeddingHeader {
                dim,
                provider: provider.into(),
                condition,
                count: map.len(),
            },
            records: map,
        })
    }

    pub fn header(&self) -> &EmbeddingHeader {
        &self.header
    }

    pub fn dim(&self) -> usize {
        self.header.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.records.get(id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.records.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Row matrix of the vectors for `ids`, in the given order.
    pub fn matrix_for<S: AsRef<str>>(&self, ids: &[S]) -> Result<DMatrix<f64>> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(ids.len(), dim);
        for (r, id) in ids.iter().enumerate() {
            let v = self
                .get(id.as_ref())
                .ok_or_else(|| Error::MissingEmbedding(id.as_ref().to_string()))?;
            for (c, x) in v.iter().enumerate() {
                m[(r, c)] = *x;
            }
        }
        Ok(m)
    }
}

fn check_vector(line: usize, id: &str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::EmbeddingRow {
            line,
            id: id.to_string(),
            reason: format!("expected {dim} values, found {}", v.len()),
        });
    }
    if let Some(pos) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::EmbeddingRow {
            line,
            id: id.to_string(),
            reason: format!("component {pos} is not finite"),
        });
    }
    Ok(())
}

pub fn read_embeddings(source: &str) -> Result<EmbeddingSet> {
    let mut lines = source.lines().enumerate();
    let header_line = lines
        .next()
        .map(|(_, l)| l)
        .ok_or_else(|| Error::EmbeddingHeader("missing header line".into()))?;
    let header: EmbeddingHeader = serde_json::from_str(header_line)
        .map_err(|e| Error::EmbeddingHeader(e.to_string()))?;
    if header.dim == 0 {
        return Err(Error::EmbeddingHeader("dim must be at least 1".into()));
    }

    let mut records = IndexMap::with_capacity(header.count);
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let (id, values) = raw.split_once('\t').ok_or_else(|| Error::EmbeddingRow {
            line,
            id: String::new(),
            reason: "expected `<id>\\t<values>`".into(),
        })?;
        let v = values
            .split_ascii_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::EmbeddingRow {
                    line,
                    id: id.to_string(),
                    reason: format!("`{tok}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        check_vector(line, id, &v, header.dim)?;
        if records.insert(id.to_string(), v).is_some() {
            return Err(Error::DuplicateId {
                line,
                id: id.to_string(),
            });
        }
    }
    if records.len() != header.count {
        return Err(Error::EmbeddingHeader(format!(
            "header count {} but {} records",
            header.count,
            records.len()
        )));
    }
    Ok(EmbeddingSet { header, records })
}

pub fn write_embeddings(set: &EmbeddingSet) -> String {
    let mut out = serde_json::to_string(&set.header).expect("header serializes");
    out.push('\n');
    for (id, v) in &set.records {
        out.push_str(id);
        out.push('\t');
        for (i, x) in v.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{x:?}"));
        }
        out.push('\n');
    }
    out
}

/// Scale every vector to unit Euclidean norm.
pub fn l2_normalize(set: &EmbeddingSet) -> Result<EmbeddingSet> {
    let mut records = IndexMap::with_capacity(set.len());
    for (id, v) in &set.records {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector(id.clone()));
        }
        records.insert(id.clone(), v.iter().map(|x| x / norm).collect());
    }
    Ok(EmbeddingSet {
        header: set.header.clone(),
        records,
    })
}

/// Move class `moved`'s mean to distance `separation` from class
/// `anchor`'s mean. Class indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapPair {
    pub anchor: usize,
    pub moved: usize,
    pub separation: f64,
}

/// Parameters for planted class structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub n_classes: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub class_separation: f64,
    pub noise_sigma: f64,
    #[serde(default)]
    pub overlap_pairs: Vec<OverlapPair>,
    pub seed: u64,
}

fn default_dim() -> usize {
    64
}

impl PlantedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.dim == 0 {
            return Err(Error::InvalidArgument(
                "n_classes and dim must be positive".into(),
            ));
        }
        if !(self.class_separation >= 0.0) || !(self.noise_sigma > 0.0) {
            return Err(Error::InvalidArgument(
                "class_separation must be >= 0 and noise_sigma > 0".into(),
            ));
        }
        for p in &self.overlap_pairs {
            if p.anchor >= self.n_classes || p.moved >= self.n_classes || p.anchor == p.moved {
                return Err(Error::InvalidArgument(format!(
                    "overlap pair ({}, {}) does not name two distinct classes",
                    p.anchor, p.moved
                )));
            }
            if !(p.separation >= 0.0) {
                return Err(Error::InvalidArgument(
                    "overlap separation must be >= 0".into(),
                ));
            }
        }
        Ok(())
    }

    /// Class means: seeded points on the sphere of radius
    /// `class_separation / 2`, then overlap pairs applied in order.
    pub fn class_means(&self) -> Vec<Vec<f64>> {
        let radius = self.class_separation / 2.0;
        let mut means: Vec<Vec<f64>> = (0..self.n_classes)
            .map(|c| {
                let v = unit_direction(self.seed, b"class-mean", c as u64, self.dim);
                v.into_iter().map(|x| x * radius).collect()
            })
            .collect();
        for (i, pair) in self.overlap_pairs.iter().enumerate() {
            let anchor = means[pair.anchor].clone();
            let diff: Vec<f64> = means[pair.moved]
                .iter()
                .zip(&anchor)
                .map(|(m, a)| m - a)
                .collect();
            let norm = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dir = if norm > 0.0 {
                diff.into_iter().map(|x| x / norm).collect()
            } else {
                unit_direction(self.seed, b"overlap-direction", i as u64, self.dim)
            };
            means[pair.moved] = anchor
                .iter()
                .zip(dir)
                .map(|(a, d)| a + pair.separation * d)
                .collect();
        }
        means
    }
}

fn unit_direction(seed: u64, tag: &[u8], key: u64, dim: usize) -> Vec<f64> {
    let mut g = Gaussian::new(seed::stream(seed, &[tag, &key.to_le_bytes()]));
    loop {
        let mut v = vec![0.0; dim];
        g.fill(&mut v, 1.0);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub const SYNTHETIC_PROVIDER: &str = "synthetic/planted";

/// Class mean plus isotropic Gaussian noise per id. The noise stream is
/// keyed by `(seed, id)` so each vector is independent of the id order.
pub fn synthetic_embeddings<S: AsRef<str>>(
    ids: &[S],
    config: &PlantedConfig,
    class_of: impl Fn(&str) -> Option<usize>,
    condition: InputCondition,
) -> Result<EmbeddingSet> {
    config.validate()?;
    let means = config.class_means();
    let mut records = Vec::with_capacity(ids.len());
    for id in ids {
        let id = id.as_ref();
        let class = class_of(id)
            .ok_or_else(|| Error::InvalidArgument(format!("no class for id `{id}`")))?;
        if class >= config.n_classes {
            return Err(Error::InvalidArgument(format!(
                "class {class} of `{id}` exceeds n_classes {}",
                config.n_classes
            )));
        }
        let mut g = Gaussian::new(seed::stream(config.seed, &[b"item", id.as_bytes()]));
        let v: Vec<f64> = means[class]
            .iter()
            .map(|m| m + config.noise_sigma * g.sample())
            .collect();
        records.push((id.to_string(), v));
    }
    EmbeddingSet::new(SYNTHETIC_PROVIDER, condition, config.dim, records)
}
