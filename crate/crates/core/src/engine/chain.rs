use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::assignment::{sample_log_weights, update_assignment};
use crate::engine::component::update_component_params;
use crate::engine::concentration::update_concentration;
use crate::engine::config::{ChainConfig, ExpertKind, MixtureKind};
use crate::engine::g0::draw_component;
use crate::engine::hyper::update_hyperparams;
use crate::engine::state::MixtureState;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{ClassHierarchy, ComponentParams, Dataset, HyperState, ModelLayout, PriorSpec};
use crate::real::Real;
use crate::samplers::RngStream;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub sweeps: usize,
    pub hmc_proposals: usize,
    pub hmc_accepted: usize,
    /// Trajectories whose energy became non-finite (always rejected).
    pub hmc_divergent: usize,
}

impl ChainStats {
    pub(crate) fn record_hmc(&mut self, accepted: bool, divergent: bool) {
        self.hmc_proposals += 1;
        self.hmc_accepted += usize::from(accepted);
        self.hmc_divergent += usize::from(divergent);
    }

    pub fn hmc_acceptance(&self) -> f64 {
        if self.hmc_proposals == 0 {
            return f64::NAN;
        }
        self.hmc_accepted as f64 / self.hmc_proposals as f64
    }
}

/// One retained draw of the full state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct PosteriorSample<F> {
    pub chain: usize,
    /// 1-based sweep number.
    pub iteration: usize,
    pub state: MixtureState<F>,
    pub hyper: HyperState<F>,
    /// Training log likelihood `sum_i ln F(y_i, x_i | theta_{c_i})`.
    pub log_lik: F,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput<F> {
    pub chain: usize,
    pub samples: Vec<PosteriorSample<F>>,
    pub stats: ChainStats,
}

/// Builds the structural layout the chosen expert needs from a dataset.
pub fn layout_for<F: Real>(data: &Dataset<F>, expert: ExpertKind) -> Result<ModelLayout> {
    let hierarchy = match expert {
        ExpertKind::Mnl => ClassHierarchy::flat(data.n_classes()),
        ExpertKind::CorMnl => data
            .hierarchy()
            .cloned()
            .ok_or_else(|| Error::MissingInput("corMNL experts need a class hierarchy".into()))?,
    };
    ModelLayout::new(data.p(), data.n_classes(), data.sources(), hierarchy)
}

/// A single Markov chain over assignments, component parameters,
/// hyperparameters and the concentration.
#[derive(Clone, Debug)]
pub struct Chain<F: Real> {
    data: Dataset<F>,
    layout: ModelLayout,
    prior: PriorSpec,
    config: ChainConfig,
    chain_id: usize,
    state: MixtureState<F>,
    hyper: HyperState<F>,
    rng: RngStream,
    stats: ChainStats,
}

impl<F: Real> Chain<F> {
    /// Starts with every case in one component whose covariate parameters
    /// match the data's mean and spread and whose coefficients and local
    /// scales are drawn from G0; hyperparameters start at their prior
    /// centres. With no data the
    /// Dirichlet mixture starts empty.
    pub fn new(data: Dataset<F>, prior: PriorSpec, config: ChainConfig, chain_id: usize) -> Result<Self> {
        config.validate()?;
        let layout = layout_for(&data, config.expert)?;
        prior.validate(layout.n_sources)?;
        let mut hyper = HyperState::initial(&prior, &layout);
        if let Some(g) = config.fixed_gamma {
            hyper.gamma = F::lit(g);
        }
        let mut rng = RngStream::with_stream(config.seed, chain_id as u64);
        let n = data.n();
        let state = if n > 0 {
            MixtureState::single(n, data_centred_component(&data, &hyper, &prior, &layout, &mut rng))
        } else if config.mixture == MixtureKind::Single {
            MixtureState::single(0, draw_component(&hyper, &prior, &layout, &mut rng))
        } else {
            MixtureState::empty()
        };
        Ok(Self {
            data,
            layout,
            prior,
            config,
            chain_id,
            state,
            hyper,
            rng,
            stats: ChainStats::default(),
        })
    }

    pub fn data(&self) -> &Dataset<F> {
        &self.data
    }

    pub fn layout(&self) -> &ModelLayout {
        &self.layout
    }

    pub fn state(&self) -> &MixtureState<F> {
        &self.state
    }

    pub fn hyper(&self) -> &HyperState<F> {
        &self.hyper
    }

    pub fn stats(&self) -> &ChainStats {
        &self.stats
    }

    /// One full Gibbs sweep.
    pub fn sweep(&mut self) -> Result<()> {
        let iteration = self.stats.sweeps + 1;
        self.sweep_inner().map_err(|e| match e {
            Error::NonFinite(message) | Error::InvalidParameter(message) => {
                Error::Numerical { iteration, message }
            }
            other => other,
        })?;
        self.stats.sweeps = iteration;
        Ok(())
    }

    fn sweep_inner(&mut self) -> Result<()> {
        let dirichlet = self.config.mixture == MixtureKind::Dirichlet;
        if dirichlet {
            let data = &self.data;
            let mut scratch = vec![F::zero(); data.n_classes()];
            for i in 0..data.n() {
                update_assignment(
                    i,
                    &mut self.state,
                    &self.hyper,
                    &self.prior,
                    &self.layout,
                    &mut self.rng,
                    |i, theta| theta.log_joint(data.row(i), data.label(i), &mut scratch),
                )?;
            }
        }
        let members = self.state.members();
        for (c, m) in members.iter().enumerate() {
            update_component_params(
                self.state.component_mut(c),
                m,
                &self.data,
                &self.hyper,
                &self.prior,
                &self.layout,
                &self.config,
                &mut self.rng,
                &mut self.stats,
            )?;
        }
        update_hyperparams(
            self.state.components(),
            &mut self.hyper,
            &self.prior,
            &self.layout,
            &self.config,
            &mut self.rng,
        )?;
        if dirichlet && self.config.fixed_gamma.is_none() {
            self.hyper.gamma = update_concentration(
                self.hyper.gamma,
                self.state.n_components(),
                self.data.n(),
                &self.prior,
                &self.config,
                &mut self.rng,
            )?;
        }
        Ok(())
    }

    /// Training log likelihood under the current state.
    pub fn log_lik(&self) -> F {
        let mut scratch = vec![F::zero(); self.data.n_classes()];
        let comps = self.state.components();
        self.state
            .assignments()
            .iter()
            .enumerate()
            .map(|(i, &c)| comps[c].log_joint(self.data.row(i), self.data.label(i), &mut scratch))
            .sum()
    }

    pub fn snapshot(&self) -> PosteriorSample<F> {
        PosteriorSample {
            chain: self.chain_id,
            iteration: self.stats.sweeps,
            state: self.state.clone(),
            hyper: self.hyper.clone(),
            log_lik: self.log_lik(),
        }
    }

    /// Replaces every case with a fresh draw from its current component,
    /// keeping the assignments.
    pub fn resimulate_data(&mut self) {
        let p = self.data.p();
        let mut scratch = vec![F::zero(); self.data.n_classes()];
        for i in 0..self.data.n() {
            let theta = &self.state.components()[self.state.assignments()[i]];
            let row: Vec<F> = (0..p)
                .map(|l| theta.mu[l] + theta.sigma[l] * F::lit(self.rng.normal()))
                .collect();
            theta.coef.log_probs_into(&row, &mut scratch);
            let y = sample_log_weights(&scratch, &mut self.rng).unwrap_or(0);
            self.data.x_mut().row_mut(i).copy_from_slice(&row);
            self.data.labels_mut()[i] = y;
        }
    }
}

fn data_centred_component<F: Real>(
    data: &Dataset<F>,
    hyper: &HyperState<F>,
    prior: &PriorSpec,
    layout: &ModelLayout,
    rng: &mut RngStream,
) -> ComponentParams<F> {
    let mut theta = draw_component(hyper, prior, layout, rng);
    // A G0 draw of the coefficients can put logits hundreds apart; start
    // them at the prior mode instead.
    theta.phi = Matrix::from_elem(theta.phi.rows(), theta.phi.cols(), F::zero());
    theta.recompose(&layout.hierarchy);
    let n = F::from_usize(data.n()).unwrap();
    for l in 0..data.p() {
        let mean = (0..data.n()).map(|i| data.row(i)[l]).sum::<F>() / n;
        let var = (0..data.n()).map(|i| (data.row(i)[l] - mean).powi(2)).sum::<F>() / n;
        theta.mu[l] = mean;
        theta.sigma[l] = if var > F::zero() && var.is_finite() { var.sqrt() } else { F::one() };
    }
    theta
}

/// Runs one chain and keeps every `thin`-th sweep after burn-in.
pub fn run_chain<F: Real>(
    data: &Dataset<F>,
    prior: &PriorSpec,
    config: &ChainConfig,
    chain_id: usize,
) -> Result<ChainOutput<F>> {
    let mut chain = Chain::new(data.clone(), prior.clone(), config.clone(), chain_id)?;
    let mut samples = Vec::with_capacity(config.retained());
    for t in 1..=config.n_iterations {
        chain.sweep()?;
        if t > config.burn_in && (t - config.burn_in - 1) % config.thin == 0 {
            samples.push(chain.snapshot());
        }
    }
    Ok(ChainOutput {
        chain: chain_id,
        samples,
        stats: chain.stats,
    })
}

/// Runs `config.n_chains` independent chains in parallel; results come back
/// in chain order and do not depend on the thread count.
pub fn run_chains<F: Real>(data: &Dataset<F>, prior: &PriorSpec, config: &ChainConfig) -> Result<Vec<ChainOutput<F>>> {
    (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(data, prior, config, c))
        .collect()
}
