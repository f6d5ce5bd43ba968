//! Construction, repair and evaluation of multi-source identity alignments
//! between wiki-farm knowledge graphs.
//!
//! The stages mirror the gold-standard pipeline: [`extract`] mines candidate
//! links from page dumps, [`refine`] cleans them, [`closure`] repairs identity
//! sets and adds transitive links, [`schema`] induces class and property
//! matches, and [`split`] produces train/test variants. [`multimatch`] is the
//! incremental multi-source matching baseline and [`eval`] scores alignments.

pub mod closure;
pub mod eval;
pub mod extract;
pub mod graph;
pub mod refine;
pub mod schema;
pub mod split;
pub mod synth;
pub mod model;
pub mod pipeline;
pub mod multimatch;

pub use model::{Alignment, Correspondence, EntityRef, Provenance, WikiId};
