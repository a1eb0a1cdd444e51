//! Exact finite-scale constructions with one-edge HNN splittings of free groups.
//!
//! The crate is organised bottom-up: [`word`] and [`automorphism`] give exact
//! free-group algebra, [`stallings`] does subgroup graphs, [`splitting`]
//! computes translation lengths of curves via Britton reduction, [`twist`]
//! runs Dehn-twist experiments in a projective test metric, [`resolution`]
//! decomposes finite charts of a curve's tree into families, and [`pipeline`]
//! drives the staged construction and emits certificates.

pub mod automorphism;
pub mod error;
pub mod pipeline;
pub mod registry;
pub mod resolution;
pub mod splitting;
pub mod stallings;
pub mod twist;
pub mod whitehead;
pub mod word;

pub use automorphism::Automorphism;
pub use error::{Error, Result};
pub use splitting::{Curve, TwoEdgeRefinement};
pub use stallings::SubgroupGraph;
pub use word::{Basis, ConjClass, Gen, Word};
