//! Two-center Morawetz weight, virial identities and the rigidity report.

pub mod cutoff;
pub mod rigidity;
pub mod virial;
pub mod weight;

pub use cutoff::Cutoff;
pub use rigidity::{rigidity_report, RigidityReport, RigidityRow};
pub use virial::{
    nonlinear_coefficient, verify_virial, virial_convergence, VirialCheck, VirialContext, VirialConvergence,
    VirialRecord, VirialTerms,
};
pub use weight::{
    derivative_bound_check, weight_derivative_consistency, BoundReport, BoundRung, ConsistencyErrors,
    MorawetzWeight, WeightConsistency, WeightDerivs,
};
