//! Periodic spectral discretization: grids, complex fields, Fourier
//! differentiation and the norms used by the scattering estimates.

mod exponents;
mod fft;
mod field;
mod grid;
mod norms;

pub use exponents::{compute_exponents, compute_exponents_exact, ExactExponents, ExponentSet};
pub use fft::{fft_forward, fft_inverse, fft_roundtrip};
pub use field::{ComplexField, Snapshot};
pub use grid::Grid;
pub use norms::{
    energy_h_norm, gradient_l2_sq, h1_norm, lp_norm, lp_norm_on, mass, mixed_norm, spacetime_norm,
};
