//! Numerical realization of the holomorphic symplectic manifold `G × S_reg`
//! for `G = SL_n(C)`, with the moment map `Φ(g, x) = -Ad_{g⁻¹} x` and two
//! integrable systems built from invariant polynomials.

pub mod commands;
pub mod config;
pub mod error;
pub mod flows;
pub mod json;
pub mod lie;
pub mod linalg;
pub mod observable;
pub mod report;
pub mod slodowy;
pub mod symplectic;
pub mod suites;
pub mod systems;

pub use error::{Error, Result};
