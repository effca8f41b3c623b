//! Numerical tools for the Monge-Ampère equation `det D^2 u = f` outside a
//! bounded convex set: radial solutions and barriers, a monotone wide-stencil
//! finite-difference solver, and far-field expansion fitting.

pub mod asymptotics;
pub mod domain;
pub mod error;
pub mod fa;
pub mod far_field;
pub mod problem;
pub mod quadrature;
pub mod radial;
pub mod rhs;
pub mod solver;

pub use domain::InnerDomain;
pub use error::{Error, Result};
pub use far_field::QuadraticFarField;
pub use problem::{BoundaryData, ProblemSpec};
pub use rhs::{RadialFunction, RightHandSide};

/// Library version, recorded in run provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
