use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplers::{HmcConfig, SliceConfig};

/// Which classifier sits inside each component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpertKind {
    /// One coefficient block per class.
    Mnl,
    /// Coefficient blocks per branch of the dataset's class hierarchy.
    CorMnl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixtureKind {
    /// Dirichlet-process mixture.
    Dirichlet,
    /// Exactly one component holding every case: the plain Bayesian
    /// (cor)MNL. Assignments and the concentration are never updated and the
    /// predictive puts no mass on new components.
    Single,
}

/// How HMC step sizes are set per coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HmcScaling {
    /// Every coordinate moves with `step_size`.
    Identity,
    /// Coordinate `k` moves with `step_size * (1/sd_k^2 + F_k)^(-1/2)`, where
    /// `sd_k` is its current prior scale and `F_k = sum_i x_ik^2 / 4` bounds
    /// the likelihood curvature over the component's members.
    Conditional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub slice: SliceConfig,
    pub hmc: HmcConfig,
    pub hmc_scaling: HmcScaling,
    /// HMC transitions per component per sweep.
    pub hmc_per_sweep: usize,
    pub expert: ExpertKind,
    pub mixture: MixtureKind,
    /// Holds the concentration fixed instead of sampling it.
    pub fixed_gamma: Option<f64>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_iterations: 2000,
            burn_in: 200,
            thin: 1,
            n_chains: 1,
            seed: 1,
            slice: SliceConfig::default(),
            hmc: HmcConfig::default(),
            hmc_scaling: HmcScaling::Conditional,
            hmc_per_sweep: 1,
            expert: ExpertKind::Mnl,
            mixture: MixtureKind::Dirichlet,
            fixed_gamma: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iterations {
            return Err(Error::Config(format!(
                "burn_in {} must be below n_iterations {}",
                self.burn_in, self.n_iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.n_chains == 0 {
            return Err(Error::Config("n_chains must be at least 1".into()));
        }
        if self.hmc_per_sweep == 0 {
            return Err(Error::Config("hmc_per_sweep must be at least 1".into()));
        }
        if let Some(g) = self.fixed_gamma {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::Config(format!("fixed_gamma {g} must be positive")));
            }
        }
        self.slice.validate()?;
        self.hmc.validate()
    }

    /// Number of samples a chain retains.
    pub fn retained(&self) -> usize {
        (self.n_iterations - self.burn_in).div_ceil(self.thin)
    }
}
