//! Synthetic generators, dataset and hierarchy files, and covariate
//! transforms.

mod io;
mod sim;
mod transform;

pub use io::{
    load_dataset, load_hierarchy, parse_dataset, parse_hierarchy, save_dataset, write_dataset, DataSchema,
};
pub use sim::{generate, generate_sim1, generate_sim2, random_split, sim2_prob_class1, SimData, SimKind, SimSpec, SimTruth};
pub use transform::{assemble_sources, center_covariates, expand_quadratic, quadratic_pairs};
