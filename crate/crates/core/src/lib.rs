//! Assessment-item classification from text embeddings, plus diagnostics of
//! how two item banks align in embedding space.

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifiers;
pub mod cli;
pub mod corpus;
pub mod diagnostics;
pub mod embedding;
pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod metrics;
pub mod seed;
pub mod table;

pub use error::{Error, Result};
