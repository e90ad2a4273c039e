//! Simulation and verification harness for scalar conservation laws with a
//! spatially dependent flux driven by a continuous (rough) signal,
//!
//! ```text
//! du + div A(x, u) ∘ dW = 0,
//! ```
//!
//! built around the kinetic formulation and the characteristic flow of the
//! kinetic transport operator.
//!
//! The crate is organised bottom-up:
//!
//! * [`path`]: driving signals `W` and their piecewise-linear approximations.
//! * [`flux`]: flux presets `A(x,u)` with `a = A_u` and `b = div_x A`.
//! * [`characteristics`]: forward/backward characteristic flows with
//!   variational (sensitivity) matrices.
//! * [`kinetic`]: `χ`, mollifiers, convolution along characteristics, the
//!   `q̄_ε` family and the kinetic defect measure.
//! * [`solver`]: monotone Engquist–Osher finite-volume solver, segment by
//!   segment along the path.
//! * [`verify`]: experiments turning contraction, bounds and identities into
//!   measurable reports.
//! * [`cli`]: configuration, dispatch and artifact emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod cli;
pub mod error;
pub mod flux;
pub mod kinetic;
pub mod path;
pub mod quadrature;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
