use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{normal_log_density, ClassHierarchy, ComponentParams};
use crate::real::Real;

/// `N(mean, sd^2)` on whichever scale the owning field names.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub sd: f64,
}

impl NormalPrior {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    pub fn log_density<F: Real>(&self, x: F) -> F {
        normal_log_density(x, F::lit(self.mean), F::lit(self.sd))
    }
}

/// Every constant of the baseline distribution G0 and its hyperpriors.
///
/// Positive scales are parameterised on the log of their square (a log
/// variance), except the per-component local scales, whose prior sits on the
/// log of the scale itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSpec {
    /// Prior on each `mu0_l`.
    pub mu0: NormalPrior,
    /// Prior on each `ln sigma0_l^2`.
    pub log_var0: NormalPrior,
    /// Prior on each `M_sigma,l`.
    pub m_sigma: NormalPrior,
    /// Prior on each `ln V_sigma,l^2`.
    pub log_v_sigma_sq: NormalPrior,
    /// Prior on `ln eta^2` (global intercept scale).
    pub log_eta_sq: NormalPrior,
    /// Prior on `ln xi_s^2`, one entry per source or a single shared entry.
    pub log_xi_sq: Vec<NormalPrior>,
    /// Prior on each ARD `ln sigma_l^2`.
    pub log_ard_sq: NormalPrior,
    /// Prior on `ln nu_c` and `ln tau_c`.
    pub log_local_scale: NormalPrior,
    /// Prior on `ln gamma`.
    pub log_gamma: NormalPrior,
    /// Auxiliary components drawn per assignment update.
    pub aux_m: usize,
    pub ard: bool,
    /// Separate G0 location/scale hyperparameters per covariate.
    pub per_covariate_g0: bool,
}

impl Default for PriorSpec {
    /// The hyperpriors used for the protein-fold models (with ARD).
    fn default() -> Self {
        Self {
            mu0: NormalPrior::new(0.0, 5.0),
            log_var0: NormalPrior::new(0.0, 2.0),
            m_sigma: NormalPrior::new(0.0, 1.0),
            log_v_sigma_sq: NormalPrior::new(0.0, 2.0),
            log_eta_sq: NormalPrior::new(0.0, 2.0),
            log_xi_sq: vec![NormalPrior::new(0.0, 1.0)],
            log_ard_sq: NormalPrior::new(-3.0, 4.0),
            log_local_scale: NormalPrior::new(0.0, 1.0),
            log_gamma: NormalPrior::new(-3.0, 2.0),
            aux_m: 3,
            ard: true,
            per_covariate_g0: true,
        }
    }
}

impl PriorSpec {
    /// Priors for the synthetic studies: `ln eta ~ N(0, 1)` and
    /// `ln nu ~ N(0, 2^2)` on the log scales, i.e. `N(0, 2^2)` and
    /// `N(0, 4^2)` on the log variances, without ARD.
    pub fn simulation() -> Self {
        Self {
            log_eta_sq: NormalPrior::new(0.0, 2.0),
            log_xi_sq: vec![NormalPrior::new(0.0, 4.0)],
            ard: false,
            ..Self::default()
        }
    }

    pub fn validate(&self, n_sources: usize) -> Result<()> {
        let mut named = vec![
            ("mu0", self.mu0),
            ("log_var0", self.log_var0),
            ("m_sigma", self.m_sigma),
            ("log_v_sigma_sq", self.log_v_sigma_sq),
            ("log_eta_sq", self.log_eta_sq),
            ("log_ard_sq", self.log_ard_sq),
            ("log_local_scale", self.log_local_scale),
            ("log_gamma", self.log_gamma),
        ];
        named.extend(self.log_xi_sq.iter().map(|&p| ("log_xi_sq", p)));
        for (name, p) in named {
            if !(p.sd > 0.0) || !p.sd.is_finite() || !p.mean.is_finite() {
                return Err(Error::Config(format!(
                    "prior {name} needs a finite mean and positive sd, got N({}, {}^2)",
                    p.mean, p.sd
                )));
            }
        }
        if self.aux_m == 0 {
            return Err(Error::Config("aux_m must be at least 1".into()));
        }
        if self.log_xi_sq.len() != 1 && self.log_xi_sq.len() != n_sources {
            return Err(Error::Config(format!(
                "{} xi priors for {n_sources} sources",
                self.log_xi_sq.len()
            )));
        }
        Ok(())
    }

    pub fn xi_prior(&self, source: usize) -> NormalPrior {
        if self.log_xi_sq.len() == 1 {
            self.log_xi_sq[0]
        } else {
            self.log_xi_sq[source]
        }
    }
}

/// Structural facts the densities need: dimensions, which source block
/// each covariate belongs to, and the expert's class tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelLayout {
    pub p: usize,
    pub n_classes: usize,
    pub source_of: Vec<usize>,
    pub n_sources: usize,
    pub hierarchy: ClassHierarchy,
}

impl ModelLayout {
    pub fn new(
        p: usize,
        n_classes: usize,
        sources: &[Range<usize>],
        hierarchy: ClassHierarchy,
    ) -> Result<Self> {
        if hierarchy.n_classes() != n_classes {
            return Err(Error::Hierarchy(format!(
                "tree has {} leaves for {n_classes} classes",
                hierarchy.n_classes()
            )));
        }
        let mut source_of = vec![usize::MAX; p];
        for (s, r) in sources.iter().enumerate() {
            for l in r.clone() {
                if l >= p || source_of[l] != usize::MAX {
                    return Err(Error::InvalidParameter(format!(
                        "source blocks overlap or exceed p at covariate {}",
                        l + 1
                    )));
                }
                source_of[l] = s;
            }
        }
        if let Some(l) = source_of.iter().position(|&s| s == usize::MAX) {
            return Err(Error::InvalidParameter(format!(
                "covariate {} belongs to no source",
                l + 1
            )));
        }
        Ok(Self {
            p,
            n_classes,
            source_of,
            n_sources: sources.len().max(1),
            hierarchy,
        })
    }

    /// Flat MNL experts with a single source.
    pub fn flat(p: usize, n_classes: usize) -> Self {
        Self::new(p, n_classes, &[0..p], ClassHierarchy::flat(n_classes)).expect("well formed")
    }

    pub fn n_branches(&self) -> usize {
        self.hierarchy.n_branches()
    }
}

/// Current values of every sampled hyperparameter.
///
/// The G0 location/scale vectors have length `p` when per-covariate
/// hyperparameters are enabled and length 1 (shared) otherwise. `ard` is all
/// ones when ARD is disabled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct HyperState<F> {
    pub mu0: Vec<F>,
    pub sigma0: Vec<F>,
    pub m_sigma: Vec<F>,
    pub v_sigma: Vec<F>,
    pub eta: F,
    pub xi: Vec<F>,
    pub ard: Vec<F>,
    pub gamma: F,
}

impl<F: Real> HyperState<F> {
    /// Every hyperparameter at the centre of its prior.
    pub fn initial(prior: &PriorSpec, layout: &ModelLayout) -> Self {
        let slots = if prior.per_covariate_g0 { layout.p.max(1) } else { 1 };
        let half_exp = |p: NormalPrior| F::lit((0.5 * p.mean).exp());
        Self {
            mu0: vec![F::lit(prior.mu0.mean); slots],
            sigma0: vec![half_exp(prior.log_var0); slots],
            m_sigma: vec![F::lit(prior.m_sigma.mean); slots],
            v_sigma: vec![half_exp(prior.log_v_sigma_sq); slots],
            eta: half_exp(prior.log_eta_sq),
            xi: (0..layout.n_sources).map(|s| half_exp(prior.xi_prior(s))).collect(),
            ard: vec![if prior.ard { half_exp(prior.log_ard_sq) } else { F::one() }; layout.p],
            gamma: F::lit(prior.log_gamma.mean.exp()),
        }
    }

    /// Slot of covariate `l` in the G0 hyperparameter vectors.
    #[inline]
    pub fn g0_slot(&self, l: usize) -> usize {
        if self.mu0.len() == 1 {
            0
        } else {
            l
        }
    }

    /// Prior standard deviation of coefficient slot `l` of a component with
    /// local scale `nu`.
    #[inline]
    pub fn coef_sd(&self, layout: &ModelLayout, l: usize, nu: F) -> F {
        self.xi[layout.source_of[l]] * self.ard[l] * nu
    }

    #[inline]
    pub fn intercept_sd(&self, tau: F) -> F {
        self.eta * tau
    }

    fn check_positive(&self) -> Result<()> {
        let scales = self
            .sigma0
            .iter()
            .chain(&self.v_sigma)
            .chain(&self.xi)
            .chain(&self.ard)
            .chain([&self.eta, &self.gamma]);
        for v in scales {
            if !(*v > F::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "hyperparameter scale {v} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// `ln G0(theta | hyper)`: normal log densities of every component parameter
/// on its stated scale.
pub fn g0_log_prior<F: Real>(
    theta: &ComponentParams<F>,
    hyper: &HyperState<F>,
    prior: &PriorSpec,
    layout: &ModelLayout,
) -> Result<F> {
    hyper.check_positive()?;
    if theta.p() != layout.p || theta.phi.rows() != layout.n_branches() {
        return Err(Error::Shape(format!(
            "component has p={} and {} branches, layout expects p={} and {}",
            theta.p(),
            theta.phi.rows(),
            layout.p,
            layout.n_branches()
        )));
    }
    if !(theta.nu > F::zero()) || !(theta.tau > F::zero()) {
        return Err(Error::InvalidParameter("local scales must be positive".into()));
    }
    if let Some(l) = theta.sigma.iter().position(|&s| !(s > F::zero())) {
        return Err(Error::InvalidParameter(format!("sigma[{l}] must be positive")));
    }
    let two = F::lit(2.0);
    let mut acc = F::zero();
    for l in 0..layout.p {
        let g = hyper.g0_slot(l);
        acc = acc + normal_log_density(theta.mu[l], hyper.mu0[g], hyper.sigma0[g]);
        acc = acc + normal_log_density(two * theta.sigma[l].ln(), hyper.m_sigma[g], hyper.v_sigma[g]);
    }
    let a_sd = hyper.intercept_sd(theta.tau);
    for b in 0..layout.n_branches() {
        let row = theta.phi.row(b);
        acc = acc + normal_log_density(row[0], F::zero(), a_sd);
        for l in 0..layout.p {
            acc = acc + normal_log_density(row[l + 1], F::zero(), hyper.coef_sd(layout, l, theta.nu));
        }
    }
    acc = acc + prior.log_local_scale.log_density(theta.nu.ln());
    acc = acc + prior.log_local_scale.log_density(theta.tau.ln());
    Ok(acc)
}

/// Log hyperprior density of every sampled hyperparameter, each on the
/// scale its prior is stated on.
pub fn hyper_log_prior<F: Real>(hyper: &HyperState<F>, prior: &PriorSpec) -> F {
    let two = F::lit(2.0);
    let mut acc = F::zero();
    for g in 0..hyper.mu0.len() {
        acc = acc + prior.mu0.log_density(hyper.mu0[g]);
        acc = acc + prior.log_var0.log_density(two * hyper.sigma0[g].ln());
        acc = acc + prior.m_sigma.log_density(hyper.m_sigma[g]);
        acc = acc + prior.log_v_sigma_sq.log_density(two * hyper.v_sigma[g].ln());
    }
    acc = acc + prior.log_eta_sq.log_density(two * hyper.eta.ln());
    for (s, &xi) in hyper.xi.iter().enumerate() {
        acc = acc + prior.xi_prior(s).log_density(two * xi.ln());
    }
    if prior.ard {
        for &a in &hyper.ard {
            acc = acc + prior.log_ard_sq.log_density(two * a.ln());
        }
    }
    acc + prior.log_gamma.log_density(hyper.gamma.ln())
}
