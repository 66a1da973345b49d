//! Scattering diagnostics: pull-backs by the free flow, dispersive decay of
//! sup norms, and the free-versus-perturbed flow comparisons.
//!
//! Nothing here decides whether a solution scatters; the functions report
//! increments, ratios and trends over a finite horizon.

mod comparison;
mod decay;
mod probe;

pub use comparison::{duhamel_comparison, flow_comparison, DuhamelComparison, FlowComparison, NormPair};
pub use decay::{dispersive_decay, linear_sup_series, DecaySeries};
pub use probe::{h1_distance, pullback, ScatterProbe};
