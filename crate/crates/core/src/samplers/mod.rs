//! Generic MCMC kernels and the deterministic random-number stream they
//! draw from.

mod gradient;
mod hmc;
mod rng;
mod slice;

pub use gradient::check_gradient;
pub use hmc::{hmc_update, hmc_update_scaled, leapfrog, HmcConfig, HmcOutcome};
pub use rng::RngStream;
pub use slice::{slice_sample_step, SliceConfig, SliceDraw};
