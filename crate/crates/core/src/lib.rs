//! Quantum particle in a one-dimensional infinite well with moving walls.
//!
//! Two independent engines evolve the state: an exact one built on the
//! moving-wall basis and Jacobi theta functions ([`analytic`]), and a
//! unitary finite-difference propagator on the dilated fixed domain
//! ([`numeric`]). [`observables`] turns fields into densities, currents,
//! Bohmian velocities and weak momentum values.

// `!(a > b)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod interp;
pub mod model;
pub mod numeric;
pub mod observables;
pub mod quad;
pub mod scenario;
pub mod theta;

pub use error::{Error, Result};
