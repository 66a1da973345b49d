//! Spectral simulator for the defocusing nonlinear Schrödinger equation
//!
//! ```text
//! i ∂t u = -Δu + V u + |u|^α u,      V = V₁ + V₂
//! ```
//!
//! on a periodic box, together with the diagnostics used to study scattering
//! for a pair of repulsive potentials: virial / Morawetz functionals for the
//! two-center weight `(|x-c|+|x+c|) ψ(4x/c)`, convex level-surface margins,
//! Hamiltonian ray tracing, and pull-back / dispersive-decay probes.
//!
//! Inner loops over grid nodes, surface samples and trajectories go through
//! [`par`], which uses rayon when the `parallel` feature is enabled (the
//! default) and plain iterators otherwise. Reductions are chunked so both
//! builds give bit-identical results.

// `!(x > 0.0)` is used on purpose so NaN is rejected; index loops mirror the
// tensor notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fit;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod morawetz;
pub mod par;
pub mod potential;
pub mod propagator;
pub mod scattering;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::{Mat, Point};
pub use potential::{GaussianTerm, PotentialSpec};
pub use spectral::{ComplexField, Grid, Snapshot};

pub use rustfft::num_complex::Complex64;
