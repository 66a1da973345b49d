//! Classical rays of `|p|² + V` and the two-center margin geometry.

mod margin;
mod rays;

pub use margin::{
    expansion_check, expansion_remainder, lemma_margin, margin_at, margin_scaling, ExpansionReport,
    MarginReport, MarginSample, MarginScaling, ScalingVerdict, STAR_TOLERANCE,
};
pub use rays::{
    escape_time, find_trapped_ray, hamiltonian, hamiltonian_flow, off_axis_escapes, RayState, TrappedRay,
};
