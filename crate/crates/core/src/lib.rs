//! Soft disease-label extraction from chest X-ray reports and a
//! multi-relation anatomy graph network trained on those labels.
//!
//! The crate is organised as a pipeline:
//!
//! * [`report`] and [`labeler`] turn report text into [`labeler::SoftLabelVector`]s
//!   using the keyword, severity and uncertainty tables in [`rules`].
//! * [`corpus`] aggregates label statistics and produces train/val/test splits.
//! * [`anatomy`] and [`graph`] build per-study region graphs with spatial,
//!   semantic and implicit relations.
//! * [`network`] holds the edge-feature graph convolution, its hand-written
//!   backward pass, losses, optimizers, metrics and the trainer.
//! * [`explain`] computes gradient-times-feature attributions and SVG overlays.
//! * [`dataset`] and [`synth`] cover on-disk formats and the synthetic corpus.
//! * [`pipeline`] runs graph construction, the semantic bootstrap and training.

pub mod anatomy;
pub mod corpus;
pub mod dataset;
pub mod disease;
pub mod error;
pub mod explain;
pub mod graph;
pub mod labeler;
pub mod network;
pub mod pipeline;
pub mod report;
pub mod rules;
pub mod synth;

pub use disease::{Disease, Severity, NUM_DISEASES};
pub use error::{Error, Result};
