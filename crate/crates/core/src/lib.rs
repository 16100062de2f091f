//! Simulation library for nonlinear Hebbian learning of sparse features:
//! input generation, sphere geometry, landscape census, full and reduced
//! learning dynamics, and scaling experiments.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod landscape;
pub mod reduced;
pub mod sources;
pub mod stats;

pub use error::{Error, Result};
pub use sources::{make_source, DistributionKind, SourceSpec};
