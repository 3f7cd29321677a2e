//! Finite-difference solver for a stochastic Cahn-Hilliard-Navier-Stokes
//! system on a 2D channel (periodic in x, solid walls at y = 0 and y = Ly).
//!
//! The velocity obeys a generalized Navier slip condition on the walls and
//! the phase field carries a dynamic boundary condition for its wall trace.
//! Noise enters the momentum equation as truncated cylindrical multiplicative
//! forcing. The crate provides the spatial operators, the coupled time
//! stepper, energy/mass/supermartingale diagnostics, and a Monte Carlo
//! ensemble driver with reproducible seeding.

pub mod checkpoint;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod init;
pub mod mollifier;
pub mod noise;
pub mod output;
pub mod potentials;
pub mod regularization;
pub mod solvers;
pub mod verify;

pub use error::SchnsError;
pub use grid::{BoundaryField, Grid, ScalarField, VectorField};
