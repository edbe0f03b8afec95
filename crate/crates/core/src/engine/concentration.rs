use statrs::function::gamma::ln_gamma;

use crate::engine::config::ChainConfig;
use crate::error::{Error, Result};
use crate::model::PriorSpec;
use crate::real::Real;
use crate::samplers::{slice_sample_step, RngStream};

/// `ln P(K components | gamma, n)` up to terms free of gamma:
/// `K ln gamma + ln Gamma(gamma) - ln Gamma(gamma + n)`.
pub fn concentration_log_likelihood(log_gamma: f64, n_components: usize, n: usize) -> f64 {
    let gamma = log_gamma.exp();
    if !(gamma > 0.0) || !gamma.is_finite() {
        return f64::NEG_INFINITY;
    }
    n_components as f64 * log_gamma + ln_gamma(gamma) - ln_gamma(gamma + n as f64)
}

/// Slice-samples `ln gamma` given the number of occupied components.
pub fn update_concentration<F: Real>(
    gamma: F,
    n_components: usize,
    n: usize,
    prior: &PriorSpec,
    config: &ChainConfig,
    rng: &mut RngStream,
) -> Result<F> {
    let target = |v: f64| concentration_log_likelihood(v, n_components, n) + prior.log_gamma.log_density(v);
    let draw = slice_sample_step(target, gamma.to_f64_lossy().ln(), &config.slice, rng).map_err(|e| match e {
        Error::NonFinite(msg) => Error::NonFinite(format!("concentration: {msg}")),
        other => other,
    })?;
    Ok(F::lit(draw.x.exp()))
}
