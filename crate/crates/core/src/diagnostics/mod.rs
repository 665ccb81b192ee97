//! Hypothesis functionals and cross-checks for the estimators: the moment
//! functional `H_p`, moment and martingale checks, a finite-difference
//! reference, and the gradient and Sobolev bounds.
//!
//! Global suprema are approximated over sampled point clouds; reports
//! record how many points were used.

mod checks;
mod hp;

pub use checks::{
    curvature_rho, dist_rho, finite_difference_oracle, gronwall_gradient_bound, martingale_mean_check, moment_bound_check,
    moment_bound_check_sampled, sobolev_norm_check, BoundCheckReport, GronwallConstants, SobolevCheck,
};
pub use hp::{evaluate_hp, hp_report, sample_cloud, HpForm, HpReport, HpSample, DEFAULT_CLOUD_POINTS};
