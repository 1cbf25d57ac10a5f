//! General deep networks as directed acyclic graphs over a small basis of
//! affine maps, piecewise-linear activations and Lipschitz transforms.
//!
//! * [`graph`] builds, validates and evaluates networks.
//! * [`basis`] holds the arc elements and their un-rectified forms.
//! * [`partition`] names input-space regions by activation patterns and
//!   checks that deeper nodes refine shallower ones.
//! * [`stability`] computes per-level weight-norm sums and the Lipschitz
//!   certificate they imply.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`). Analyses are sign
//! tests on pre-activations, so the aliases below fix `f64`.

pub mod basis;
pub mod error;
pub mod graph;
pub mod matrix;
pub mod partition;
pub mod scalar;
pub mod stability;

pub use basis::{Activation, BasisElement, CpwlSpec, PoolBlocks, TransformSpec};
pub use error::{Error, Result};
pub use graph::{ArcId, DagBuilder, NodeId, NodeRole, ValidationReport};
pub use scalar::Scalar;

pub type Dag = graph::Dag<f64>;
pub type Dag32 = graph::Dag<f32>;
pub type Matrix = matrix::Matrix<f64>;
pub type Affine = matrix::Affine<f64>;
