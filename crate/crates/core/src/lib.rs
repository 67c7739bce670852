//! Numerical toolkit for the calculus of moving surfaces.
//!
//! Surfaces are sampled on structured chart grids and differentiated with
//! fourth-order finite differences. On top of the static geometry the crate
//! provides the time-dependent operators of moving surfaces, residuals of the
//! surface-dynamics equations with two reduced evolution problems, closed-form
//! solution checks, curvature-law solvers, Navier-Stokes residuals, and a
//! configuration-driven verification harness.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chart;
pub mod closed_form;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod filter;
pub mod geometry;
pub mod harness;
pub mod laws;
pub mod ns;
pub mod quadrature;
pub mod report;
pub mod shape;
pub mod stencil;
pub mod transport;

pub use error::{Error, Result};
