//! Shape calculus on tubular neighborhoods of signed distance functions.

pub mod convergence;
pub mod domain_pde;
pub mod error;
pub mod fields;
pub mod functionals;
pub mod geometry;
pub mod linalg;
pub mod reach;
pub mod surface_pde;
pub mod tube;
pub mod sampling;

pub use error::{Result, TubeError};
pub use geometry::{AmbientBox, SdfSample, Shape, ShapeKind, ShapeSpec};

/// Points and vectors; planar problems use `z = 0`.
pub type Point = nalgebra::Vector3<f64>;
pub type Mat = nalgebra::Matrix3<f64>;
