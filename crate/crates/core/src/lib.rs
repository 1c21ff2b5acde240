//! Singularity propagation for the perturbed quantum harmonic oscillator.
//!
//! * [`model`]: time-dependent short-range perturbations `(a, V)`.
//! * [`classical`]: Hamiltonian flows, high-energy scattering data and the scaling-limit map.
//! * [`quantum`]: exact oscillator evolution and numerical perturbed evolution in one dimension.
//! * [`microlocal`]: quasi-homogeneous wave front set indicators and symbol transport.

pub mod classical;
pub mod microlocal;
pub mod model;
pub mod numerics;
pub mod ode;
pub mod quantum;

pub use model::{make_family, validate_decay, FamilySpec, PerturbationField, TimeShape};
