#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Quasi-3D finite-element eigenmode solver for axisymmetric cavities.
//!
//! A 3D field in a body of revolution is expanded in azimuthal Fourier modes;
//! each mode `n` becomes a 2D eigenproblem on the `(r, z)` cross section with
//! an azimuthal unknown in H1 and an in-plane unknown in H(curl). The
//! transformations TA, TB, TC(alpha, beta) and TD change these unknowns so
//! that the formulation stays well posed at the symmetry axis.

pub mod analytic;
pub mod assembly;
pub mod eigen;
pub mod error;
pub mod fespace;
pub mod formulation;
pub mod jet;
pub mod mesh;
pub mod quadrature;
pub mod studies;

pub use error::{Error, Result};
