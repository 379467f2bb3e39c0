//! Numerical core: chart geometry, Carleman weights, a magnetic Schrödinger
//! forward solver, identity and estimate harnesses, and the boundary-source
//! reconstruction.

#![no_std]
// Float math comes from num-traits; when std is also in the dependency graph
// (test builds) the inherent methods win and the trait imports look unused.
#![allow(unused_imports)]

extern crate alloc;

pub mod admissible;
pub mod carleman;
pub mod cn;
pub mod diff;
pub mod duhamel;
pub mod error;
pub mod field;
pub mod forward;
pub mod generator;
pub mod grid;
pub mod inverse;
pub mod logsum;
pub mod metric;
pub mod operators;
pub mod quadrature;
pub mod samples;
pub mod sparse;
pub mod stability;
pub mod weights;

pub use error::{Error, Result};
pub use field::{CovectorField, PotentialPreset, Scalar, ScalarField, SpaceTimeField, C64};
pub use grid::{Boundary, ChartGrid};
pub use metric::{MetricData, MetricPreset};
