//! Semantic graph parsing as relation-sequence transduction.
//!
//! Graphs from three frameworks (AMR, DM, UCCA) are converted to
//! arborescences, linearized into relation sequences, and predicted by an
//! attention-based encoder and a pointer-generator decoder.

pub mod convert;
pub mod data;
pub mod eval;
pub mod graph;
pub mod inference;
pub mod io;
pub mod linearize;
pub mod model;
pub mod autodiff;
pub mod cli;
pub mod nn;
pub mod synthetic;
pub mod train;
