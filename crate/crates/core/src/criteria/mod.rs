//! Monte Carlo and exact estimators for the stability conditions, with the
//! closed-form certificates that back them.

pub mod certificates;
pub mod estimators;
pub mod moments;
pub mod reachability;
pub mod report;

pub use certificates::{chain_lower_bound, chebyshev_lower_bound, LyapunovCertificate, Rate};
pub use estimators::{
    estimate_c1_c2, estimate_c4, eventual_continuity_defect, tv_defect, EstimatorGrid, DEFAULT_DEFECT_TOLERANCE,
};
pub use moments::{moment_constant, moment_decay_fit, second_moment_bound, MomentDecayFit};
pub use reachability::{reachability_schedule, CaseBounds, RadiusConstraint, ReachabilityParams, ReachabilitySchedule};
pub use report::*;
