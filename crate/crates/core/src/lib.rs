//! Dynamic topology optimization of linear elastic structures.
//!
//! Transient responses come from Newmark-β integration, either solved in full
//! or approximated by online combined-approximation reanalysis against a
//! cached baseline factorization. Snapshot matrices are compressed by proper
//! orthogonal decomposition into a handful of equivalent static loads, which
//! drive a Heaviside-SIMP compliance optimization updated by optimality
//! criteria.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod driver;
pub mod error;
pub mod fem;
pub mod newmark;
pub mod osdca;
pub mod pod;
pub mod simp;
pub mod sparse;

pub use driver::{preset, run, RunConfig, RunReport};
pub use error::{Error, Result};
pub use fem::{CaseSpec, DensityField, Material, Mesh, Model};
pub use newmark::{NewmarkParams, SnapshotMatrix};
pub use osdca::OsdcaConfig;
pub use pod::{EslSet, PodBasis};
pub use simp::{MaterialInterp, OptConfig};
pub use sparse::SparseSymMatrix;
