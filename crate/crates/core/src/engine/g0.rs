use crate::matrix::Matrix;
use crate::model::{ComponentParams, HyperState, ModelLayout, PriorSpec};
use crate::real::Real;
use crate::samplers::RngStream;

/// Draws fresh component parameters from G0 given the hyperparameters.
pub fn draw_component<F: Real>(
    hyper: &HyperState<F>,
    prior: &PriorSpec,
    layout: &ModelLayout,
    rng: &mut RngStream,
) -> ComponentParams<F> {
    let p = layout.p;
    let mut mu = Vec::with_capacity(p);
    let mut sigma = Vec::with_capacity(p);
    for l in 0..p {
        let g = hyper.g0_slot(l);
        mu.push(hyper.mu0[g] + hyper.sigma0[g] * F::lit(rng.normal()));
        let log_var = hyper.m_sigma[g] + hyper.v_sigma[g] * F::lit(rng.normal());
        sigma.push((log_var * F::lit(0.5)).exp());
    }
    let local = prior.log_local_scale;
    let nu = F::lit((local.mean + local.sd * rng.normal()).exp());
    let tau = F::lit((local.mean + local.sd * rng.normal()).exp());
    let a_sd = hyper.intercept_sd(tau);
    let mut phi = Matrix::from_elem(layout.n_branches(), p + 1, F::zero());
    for b in 0..layout.n_branches() {
        let row = phi.row_mut(b);
        row[0] = a_sd * F::lit(rng.normal());
        for l in 0..p {
            row[l + 1] = hyper.coef_sd(layout, l, nu) * F::lit(rng.normal());
        }
    }
    ComponentParams::new(mu, sigma, phi, nu, tau, &layout.hierarchy)
}
