//! Community detection on partially observed stochastic block model graphs
//! through small random sketches.
//!
//! A sketch of `N'` nodes is sampled (uniformly, inversely to degree, or by
//! spatial random sampling after pre-completion), decomposed into a low-rank
//! cluster matrix plus sparse corruption, and the resulting sketch clusters
//! are used to label every node of the full graph by normalized correlation.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision.

pub mod clustering;
pub mod decomposition;
pub mod eigen;
pub mod error;
pub mod graph;
pub mod harness;
pub mod pipeline;
pub mod rng;
pub mod sampling;
pub mod sbm;
pub mod scalar;
mod svt;
pub mod theory;

pub use error::{Error, Result};
pub use graph::{Entry, ObservedGraph, Partition, SketchIndex};
pub use scalar::Scalar;

pub type Decomposition64 = decomposition::Decomposition<f64>;
pub type Decomposition32 = decomposition::Decomposition<f32>;
pub type SearchOutcome64 = decomposition::SearchOutcome<f64>;
pub type SearchOutcome32 = decomposition::SearchOutcome<f32>;
pub type TheoryInputs64 = theory::TheoryInputs<f64>;
pub type TheoryInputs32 = theory::TheoryInputs<f32>;
pub type TheoryBounds64 = theory::TheoryBounds<f64>;
pub type TheoryBounds32 = theory::TheoryBounds<f32>;
pub type Matrix64 = nalgebra::DMatrix<f64>;
pub type Matrix32 = nalgebra::DMatrix<f32>;
