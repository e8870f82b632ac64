//! Synthetic spatial-reasoning question answering.
//!
//! A [`sampler`] draws block-and-object scenes, the [`realizer`] turns a
//! random subset of their facts into a story using a data-driven grammar,
//! [`questions`] builds four question families over the story and
//! [`answers`] labels them with the three-valued closure from [`algebra`].
//! The [`parser`] reads stories and questions back with the same grammar,
//! which gives an independent path for checking every emitted answer.

pub mod algebra;
pub mod annotator;
pub mod answers;
pub mod error;
pub mod grammar;
pub mod mention;
pub mod model;
pub mod parser;
pub mod pipeline;
pub mod questions;
pub mod realizer;
pub mod rng;
pub mod sampler;
pub mod text;
pub mod variants;
pub mod vocab;

pub use algebra::{
    all_relations, closure, closure_with, relation_status, ClosureConfig, EntailedSet, ThreeValued,
};
pub use error::{Error, Result};
pub use grammar::Grammar;
pub use model::*;

/// Version string written into every record's provenance.
pub const GENERATOR_VERSION: &str = concat!("spatialqa/", env!("CARGO_PKG_VERSION"));
