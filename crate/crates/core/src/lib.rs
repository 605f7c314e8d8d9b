//! Finite-volume laboratory for the SKT cross-diffusion system and its scalar
//! self-diffusion model equation.
//!
//! The crate has two halves that share one discrete geometry:
//!
//! * solvers — backward-Euler finite-volume stepping for linear parabolic
//!   problems ([`parabolic`]), the frozen-coefficient fixed-point scheme for
//!   the scalar self-diffusion equation ([`fixedpoint`]), and the coupled
//!   two-species system ([`skt`]);
//! * diagnostics — the quantities parabolic regularity theory is built from:
//!   maximal functions, BMO seminorms, level-set distribution sums, truncation
//!   energies, bootstrap exponent ladders, scaling transforms and boundary
//!   flattening ([`analysis`], [`geometry`]).
//!
//! Everything operates on uniform cell-centered grids in one or two space
//! dimensions with homogeneous Neumann boundary conditions. All types are
//! immutable after construction and all operations are pure functions, so
//! independent computations can run concurrently without coordination.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats and the CLI live in
//! the companion `sktlab` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod error;
pub mod fixedpoint;
pub mod geometry;
mod math;
pub mod mesh;
pub mod parabolic;
pub mod skt;
pub mod sparse;

pub use error::{Error, Result};
pub use mesh::{CubeVariant, Field, Grid, ParabolicCube, Region, SpaceTimeField, SymTensor, TensorField, TimeAxis};
