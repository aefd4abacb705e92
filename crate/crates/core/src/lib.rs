//! Band functions of multidimensional periodic Schrodinger operators and
//! constructive extraction of their spectral invariants.
//!
//! The pipeline, bottom to top:
//! - [`lattice`]: primal/dual bases, directional sublattices, quasimomentum
//!   decomposition, and admissible-offset selection;
//! - [`potential`]: trigonometric potentials and the derived directional /
//!   planar fields entering the invariants;
//! - [`hill`]: the one-dimensional operator along a direction, its labelled
//!   spectrum and eigenfunction expansions;
//! - [`bands`]: plane-wave Galerkin band computation at fixed quasimomentum;
//! - [`invariants`]: classification of band eigenvalues near a diffraction
//!   hyperplane and the averaged extraction of spectral invariants, with
//!   independent Fourier-side oracles for validation.

pub mod bands;
pub mod error;
pub mod hill;
pub mod invariants;
pub mod lattice;
pub mod linalg;
pub mod potential;

pub use error::{Error, Result};
