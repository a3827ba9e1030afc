//! Numerical laboratory for the two-dimensional incompressible Navier-Stokes
//! equations with bounded, non-decaying velocity.
//!
//! The plane is modelled by a doubly periodic rectangle. Statements about
//! `|x| -> infinity` become truncation-radius studies with radii at most a
//! quarter of the shorter side.

pub mod biot_savart;
pub mod bounds;
pub mod error;
pub mod evolve;
pub mod field;
pub mod grid;
pub mod pressure;
pub mod spectral;
pub mod ulnorm;

pub use error::{NsError, Result};
pub use field::{ScalarField, VectorField};
pub use grid::{GridSpec, Point};
pub use spectral::Spectrum;
