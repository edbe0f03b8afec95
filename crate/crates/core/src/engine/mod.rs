//! Posterior sampling for the Dirichlet-process mixture: auxiliary-component
//! Gibbs updates for the assignments, HMC for each component's regression
//! parameters, slice sampling for every other parameter and for the
//! concentration, and independent multi-chain orchestration.

mod assignment;
mod chain;
mod component;
mod concentration;
mod config;
mod g0;
mod hyper;
mod state;
mod trace;

pub use assignment::{sample_log_weights, update_assignment};
pub use chain::{layout_for, run_chain, run_chains, Chain, ChainOutput, ChainStats, PosteriorSample};
pub use component::{update_component_params, ExpertPosterior};
pub use concentration::{concentration_log_likelihood, update_concentration};
pub use config::{ChainConfig, ExpertKind, HmcScaling, MixtureKind};
pub use g0::draw_component;
pub use hyper::update_hyperparams;
pub use state::MixtureState;
pub use trace::{data_checksum, read_trace, write_trace, TraceHeader, TRACE_FORMAT, TRACE_VERSION};
