//! Closed-form model mathematics: covariate and expert densities, the G0
//! baseline prior, class-hierarchy composition and Chinese-restaurant-process
//! probabilities.

mod crp;
mod dataset;
mod density;
mod hierarchy;
mod params;
mod prior;

pub use crp::{
    canonical_partition, crp_assignment_probs, crp_finite_assignment_probs, crp_partition_log_prob,
    enumerate_set_partitions,
};
pub use dataset::Dataset;
pub use density::{
    gaussian_covariate_log_density, joint_log_density, mnl_class_log_probs, normal_log_density,
};
pub use hierarchy::{compose_hierarchy_coefficients, Branch, ClassHierarchy, NodeRef};
pub use params::{ComponentParams, MnlCoefficients};
pub use prior::{g0_log_prior, hyper_log_prior, HyperState, ModelLayout, NormalPrior, PriorSpec};
