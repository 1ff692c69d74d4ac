//! Quantum dynamics of a spin-1/2 Gaussian wave packet crossing a
//! divergence-free Stern-Gerlach magnet.
//!
//! The magnet region is described by the dimensionless Hamiltonian
//! `h = (A/2)(px^2 + pz^2) - S (Iz (z + z0) - Ix x)`, which couples the two
//! spin components through the transverse field term. The crate provides
//!
//! * an exact solver in a two-dimensional harmonic-oscillator basis
//!   ([`exact_evolution`]),
//! * four analytic approximations to the evolution operator built on the
//!   local-field spin frame ([`approximations`]),
//! * detection-plane observables: spin-flip probabilities, focusing
//!   moments, overlaps and polarisation asymmetries ([`observables`]),
//! * a forward model and least-squares inversion that reconstructs the
//!   beam polarisation vector from a scatter pattern ([`tomography`]).
//!
//! All quantities are dimensionless: lengths in units of the packet width,
//! time in units of the magnet traversal time. [`core_model::SimParams`]
//! holds the three physical knobs `A` (adiabaticity), `S` (separation) and
//! `z0` (field inhomogeneity) plus the numerical configuration.

pub mod approximations;
pub mod core_model;
mod error;
pub mod exact_evolution;
pub mod observables;
pub mod oscillator_basis;
pub mod textbook_reference;
pub mod tomography;

pub use error::{Error, Result};

/// Complex double, the scalar type of every wave-function amplitude.
pub type C64 = num_complex::Complex64;
