//! Regularized Stokes immersed-boundary contour dynamics.
//!
//! A closed elastic string in a 2D Stokes fluid moves with the fluid
//! velocity. Spreading the string force with a smooth kernel and
//! interpolating the velocity back with the same kernel gives the
//! regularized immersed boundary model. This crate computes both the exact
//! and the regularized string velocities, evolves them in time, and measures
//! how fast the regularized solution converges to the exact one.

pub mod auxfun;
pub mod contour;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod numerics;
pub mod stepper;

pub use error::{Error, Result};
