//! Numerical verification toolkit for ellipticity and mass-spreading estimates of
//! non-cutoff Boltzmann and Landau collision kernels.
//!
//! Velocities are stored as [`Vec3`] for both supported dimensions; in dimension 2
//! the third component is always zero.

pub mod boltzmann_kernel;
pub mod dist_model;
pub mod error;
pub mod frame_transform;
pub mod kinetic_geometry;
pub mod landau_coeffs;
pub mod linalg;
pub mod mass_geometry;
pub mod observables;
pub mod quadrature;

pub use dist_model::{ComponentSpec, DistributionSpec, Mixture};
pub use error::{Result, VerifyError};
pub use linalg::{Mat3, Vec3};
