//! Capacity propagation through deep layered architectures.
//!
//! The discrete side models one layer as a column-stochastic operator
//! `I + εΔ` acting on a nonnegative capacity profile over a lattice. The
//! continuum side provides the diffusion limits (heat kernels, Duhamel
//! integrals, leaky diffusion) and an explicit finite-difference solver
//! used to check the discrete recursions against their limits.
//!
//! Layout:
//!
//! * [`grid`], [`profile`], [`stencil`], [`rng`], [`schedule`], [`source`]:
//!   lattice primitives shared by everything else.
//! * [`discrete`]: per-layer propagation for every architecture variant.
//! * [`continuum`]: analytic solutions and the PDE solver.
//! * [`metrics`]: mass, width, distances and power-law fits.
//! * [`experiments`]: config-driven studies producing [`experiments::ExperimentReport`]s.

pub mod continuum;
pub mod discrete;
mod error;
pub mod experiments;
pub mod grid;
pub mod metrics;
pub mod profile;
pub mod rng;
pub mod schedule;
pub mod source;
pub mod stencil;

pub use error::{Error, Result};
pub use grid::{Boundary, Grid};
pub use profile::{make_one_hot, CapacityProfile, Trajectory};
pub use rng::RngSpec;
pub use schedule::PiecewiseConstant;
pub use source::{SourceDensity, SourceSpec};
pub use stencil::{random_generator, second_moment, MomentMatrix, Offset, StencilGenerator};
