use crate::engine::chain::ChainStats;
use crate::engine::config::{ChainConfig, HmcScaling};
use crate::engine::hyper::scale_log_lik;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{normal_log_density, ComponentParams, Dataset, HyperState, ModelLayout, PriorSpec};
use crate::real::Real;
use crate::samplers::{hmc_update_scaled, slice_sample_step, RngStream};

/// Conditional posterior of one component's branch parameters given its
/// members, its local scales and the hyperparameters, up to an additive
/// constant. Positions are the branch matrix flattened row-major
/// (`B x (p + 1)`, intercept slot first in each row).
pub struct ExpertPosterior<'a, F> {
    layout: &'a ModelLayout,
    x: Vec<F>,
    y: Vec<usize>,
    /// Prior sd per slot: intercept then one per covariate.
    slot_sd: Vec<F>,
    classes_under: Vec<Vec<usize>>,
}

impl<'a, F: Real> ExpertPosterior<'a, F> {
    pub fn new(
        data: &Dataset<F>,
        members: &[usize],
        layout: &'a ModelLayout,
        hyper: &HyperState<F>,
        nu: F,
        tau: F,
    ) -> Self {
        let p = layout.p;
        let mut x = Vec::with_capacity(members.len() * p);
        let mut y = Vec::with_capacity(members.len());
        for &i in members {
            x.extend_from_slice(data.row(i));
            y.push(data.label(i));
        }
        let mut slot_sd = Vec::with_capacity(p + 1);
        slot_sd.push(hyper.intercept_sd(tau));
        slot_sd.extend((0..p).map(|l| hyper.coef_sd(layout, l, nu)));
        let mut classes_under = vec![Vec::new(); layout.n_branches()];
        for j in 0..layout.n_classes {
            for &b in layout.hierarchy.path(j) {
                classes_under[b].push(j);
            }
        }
        Self {
            layout,
            x,
            y,
            slot_sd,
            classes_under,
        }
    }

    pub fn dim(&self) -> usize {
        self.layout.n_branches() * (self.layout.p + 1)
    }

    pub fn n_members(&self) -> usize {
        self.y.len()
    }

    pub(crate) fn member_rows(&self) -> impl Iterator<Item = &[F]> {
        self.x.chunks_exact(self.layout.p.max(1)).take(self.y.len())
    }

    /// Log density and its gradient at the flattened branch parameters.
    pub fn log_density_and_grad(&self, phi: &[F]) -> (F, Vec<F>) {
        let p = self.layout.p;
        let w = p + 1;
        let n_classes = self.layout.n_classes;
        let h = &self.layout.hierarchy;

        // Class coefficient rows [alpha_j, beta_1j, ..., beta_pj].
        let mut coef = vec![F::zero(); n_classes * w];
        for j in 0..n_classes {
            let row = &mut coef[j * w..(j + 1) * w];
            for &b in h.path(j) {
                for (r, &v) in row.iter_mut().zip(&phi[b * w..(b + 1) * w]) {
                    *r = *r + v;
                }
            }
        }

        let mut logp = F::zero();
        let mut class_grad = vec![F::zero(); n_classes * w];
        let mut scores = vec![F::zero(); n_classes];
        for (k, &yk) in self.y.iter().enumerate() {
            let xi = &self.x[k * p..(k + 1) * p];
            for j in 0..n_classes {
                let row = &coef[j * w..(j + 1) * w];
                let mut s = row[0];
                for l in 0..p {
                    s = s + xi[l] * row[l + 1];
                }
                scores[j] = s;
            }
            let max = scores.iter().copied().fold(F::neg_infinity(), F::max);
            let observed = scores[yk] - max;
            let mut total = F::zero();
            for s in scores.iter_mut() {
                *s = (*s - max).exp();
                total = total + *s;
            }
            // Stays finite when exp(observed) underflows.
            logp = logp + observed - total.ln();
            for j in 0..n_classes {
                let r = if j == yk { F::one() } else { F::zero() } - scores[j] / total;
                let g = &mut class_grad[j * w..(j + 1) * w];
                g[0] = g[0] + r;
                for l in 0..p {
                    g[l + 1] = g[l + 1] + r * xi[l];
                }
            }
        }

        let mut grad = vec![F::zero(); phi.len()];
        let half = F::lit(0.5);
        for (b, under) in self.classes_under.iter().enumerate() {
            for k in 0..w {
                let v = phi[b * w + k];
                let sd = self.slot_sd[k];
                let z = v / sd;
                logp = logp - z * z * half;
                let mut g = -v / (sd * sd);
                for &j in under {
                    g = g + class_grad[j * w + k];
                }
                grad[b * w + k] = g;
            }
        }
        (logp, grad)
    }

    /// Per-coordinate step multipliers `(1/sd^2 + sum_i x_ik^2 / 4)^(-1/2)`.
    ///
    /// The likelihood curvature in any branch slot is at most a quarter of
    /// the summed squared covariate, whatever classes the branch covers.
    pub fn step_scales(&self) -> Vec<F> {
        let p = self.layout.p;
        let quarter = F::lit(0.25);
        let mut curv = vec![F::zero(); p + 1];
        curv[0] = F::from_usize(self.y.len()).unwrap() * quarter;
        for row in self.member_rows() {
            for l in 0..p {
                curv[l + 1] = curv[l + 1] + row[l] * row[l] * quarter;
            }
        }
        let slot: Vec<F> = (0..=p)
            .map(|k| {
                let sd = self.slot_sd[k];
                (F::one() / (sd * sd) + curv[k]).sqrt().recip()
            })
            .collect();
        (0..self.layout.n_branches())
            .flat_map(|_| slot.iter().copied())
            .collect()
    }
}

fn slice<F: Real>(
    target: impl FnMut(F) -> F,
    x0: F,
    config: &ChainConfig,
    rng: &mut RngStream,
    what: &str,
) -> Result<F> {
    slice_sample_step(target, x0, &config.slice, rng)
        .map(|d| d.x)
        .map_err(|e| match e {
            Error::NonFinite(msg) => Error::NonFinite(format!("{what}: {msg}")),
            other => other,
        })
}

/// One Gibbs pass over a component's parameters: HMC on the branch
/// parameters, then slice updates of each `mu_l`, each `ln sigma_l^2`,
/// `ln nu` and `ln tau`.
#[allow(clippy::too_many_arguments)]
pub fn update_component_params<F: Real>(
    theta: &mut ComponentParams<F>,
    members: &[usize],
    data: &Dataset<F>,
    hyper: &HyperState<F>,
    prior: &PriorSpec,
    layout: &ModelLayout,
    config: &ChainConfig,
    rng: &mut RngStream,
    stats: &mut ChainStats,
) -> Result<()> {
    let p = layout.p;
    let w = p + 1;
    let n_branches = layout.n_branches();

    let post = ExpertPosterior::new(data, members, layout, hyper, theta.nu, theta.tau);
    let scales = match config.hmc_scaling {
        HmcScaling::Identity => None,
        HmcScaling::Conditional => Some(post.step_scales()),
    };
    let mut phi = theta.phi.as_slice().to_vec();
    for _ in 0..config.hmc_per_sweep {
        let out = hmc_update_scaled(
            |v: &[F]| post.log_density_and_grad(v),
            &phi,
            scales.as_deref(),
            &config.hmc,
            rng,
        )?;
        stats.record_hmc(out.accepted, !out.delta_h.is_finite());
        phi = out.x;
    }
    theta.phi = Matrix::from_vec(n_branches, w, phi)?;
    theta.recompose(&layout.hierarchy);

    let n = F::from_usize(post.n_members()).unwrap();
    // Centred sufficient statistics: sum (x - m)^2 = ss + n (xbar - m)^2.
    let mut xbar = vec![F::zero(); p];
    let mut ss = vec![F::zero(); p];
    if post.n_members() > 0 {
        for row in post.member_rows() {
            for l in 0..p {
                xbar[l] = xbar[l] + row[l];
            }
        }
        for v in xbar.iter_mut() {
            *v = *v / n;
        }
        for row in post.member_rows() {
            for l in 0..p {
                ss[l] = ss[l] + (row[l] - xbar[l]).powi(2);
            }
        }
    }
    let two = F::lit(2.0);
    let half = F::lit(0.5);
    for l in 0..p {
        let g = hyper.g0_slot(l);
        let sq_dev = |m: F| ss[l] + n * (xbar[l] - m).powi(2);

        let var = theta.sigma[l] * theta.sigma[l];
        let (mu0, sigma0) = (hyper.mu0[g], hyper.sigma0[g]);
        theta.mu[l] = slice(
            |m| -quad_over(sq_dev(m), two * var) + normal_log_density(m, mu0, sigma0),
            theta.mu[l],
            config,
            rng,
            "component mean",
        )?;

        let q = sq_dev(theta.mu[l]);
        let (ms, vs) = (hyper.m_sigma[g], hyper.v_sigma[g]);
        let u = slice(
            |u| scale_log_lik(n, q, half, u) + normal_log_density(u, ms, vs),
            two * theta.sigma[l].ln(),
            config,
            rng,
            "component log variance",
        )?;
        theta.sigma[l] = (u * half).exp();
    }

    let local = prior.log_local_scale;
    let mut q_nu = F::zero();
    let mut q_tau = F::zero();
    for b in 0..n_branches {
        let row = theta.phi.row(b);
        let za = row[0] / hyper.eta;
        q_tau = q_tau + za * za;
        for l in 0..p {
            let z = row[l + 1] / (hyper.xi[layout.source_of[l]] * hyper.ard[l]);
            q_nu = q_nu + z * z;
        }
    }
    let k_nu = F::from_usize(n_branches * p).unwrap();
    let v = slice(
        |v| scale_log_lik(k_nu, q_nu, F::one(), v) + local.log_density(v),
        theta.nu.ln(),
        config,
        rng,
        "local coefficient scale",
    )?;
    theta.nu = v.exp();
    let k_tau = F::from_usize(n_branches).unwrap();
    let v = slice(
        |v| scale_log_lik(k_tau, q_tau, F::one(), v) + local.log_density(v),
        theta.tau.ln(),
        config,
        rng,
        "local intercept scale",
    )?;
    theta.tau = v.exp();
    Ok(())
}

/// `q / v`, taking `0 / 0` as 0 so that a collapsed scale still admits
/// the point it collapsed onto.
fn quad_over<F: Real>(q: F, v: F) -> F {
    if q == F::zero() {
        F::zero()
    } else {
        q / v
    }
}
