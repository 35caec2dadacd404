//! Lagrangian mesh motion on structured quadrilateral grids.
//!
//! Nodes are advanced with velocities reconstructed from a per-node weighted
//! least-squares fit to endpoint-corrected edge velocities. The correction
//! shifts each edge's linear velocity profile so that its integral matches a
//! Gauss-type quadrature of the exact field, which keeps cell areas
//! fourth-order accurate on rectilinear cells.
//!
//! Module map:
//! - [`mesh`]: grid storage, connectivity and geometric primitives
//! - [`edge_quadrature`]: area-conservative endpoint corrections along edges
//! - [`nodal_solver`]: 2x2 nodal systems and full velocity reconstruction
//! - [`fields`]: analytic velocity fields for the vortex test problems
//! - [`integrator`]: time-step control, Euler and RK4 node updates
//! - [`diagnostics`]: density error norms, orders, GCL residual, correction slopes
//! - [`study`]: run configuration and refinement studies

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod edge_quadrature;
mod error;
pub mod fields;
pub mod geom;
pub mod integrator;
pub mod mesh;
pub mod nodal_solver;
pub mod study;

pub use error::{Error, Result};
pub use geom::Vec2;
