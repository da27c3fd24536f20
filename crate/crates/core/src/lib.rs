//! Numerical verification toolkit for sets of algebraic curvature tensors.
//!
//! * [`curvature`]: operators on Λ²Rⁿ, Ricci contraction, the `#` product,
//!   the reaction term `Φ(R) = R² + R#`, and the O(n)-action.
//! * [`bianchi`]: tuples of operators and the second Bianchi identity.
//! * [`geometry`]: sets given by smooth inequalities, normals, second
//!   fundamental forms, tangent cones, boundary sampling.
//! * [`convexity`]: Bianchi-convexity of spectral sets in dimension three,
//!   checked by an eigenvalue criterion and by direct maximization.
//! * [`ode`]: the reaction ODE and invariance checks.
//! * [`rd`]: a periodic-grid reaction–diffusion demonstrator.
//! * [`report`] and [`commands`]: configuration, dispatch and report output.

// `!(x > y)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod rng;

pub mod bianchi;
pub mod convexity;
pub mod curvature;
pub mod geometry;
pub mod ode;
pub mod rd;

pub mod commands;
pub mod report;

pub use curvature::{CurvatureOperator, EigenData, SymmetricForm2, WedgeBasis};
pub use error::{Error, Result};
pub use rng::SeedStream;
