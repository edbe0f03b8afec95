use crate::engine::config::ChainConfig;
use crate::error::{Error, Result};
use crate::model::{normal_log_density, ComponentParams, HyperState, ModelLayout, NormalPrior, PriorSpec};
use crate::real::Real;
use crate::samplers::{slice_sample_step, RngStream};

/// Log likelihood of `n` zero-mean normal values with squared sum `q` when
/// their common scale is `exp(c * u)`.
#[inline]
pub(crate) fn scale_log_lik<F: Real>(n: F, q: F, c: F, u: F) -> F {
    let quad = if q == F::zero() {
        F::zero()
    } else {
        q * (-F::lit(2.0) * c * u).exp() * F::lit(0.5)
    };
    -n * c * u - quad
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

/// Slice-samples a log-variance `u` (scale `exp(u / 2)`) given `n` values
/// with squared sum `q`.
fn log_var_update<F: Real>(
    n: usize,
    q: F,
    prior: NormalPrior,
    scale: F,
    config: &ChainConfig,
    rng: &mut RngStream,
    what: &str,
) -> Result<F> {
    let n = F::from_usize(n).unwrap();
    let half = F::lit(0.5);
    let u = slice(
        |u| scale_log_lik(n, q, half, u) + prior.log_density(u),
        F::lit(2.0) * scale.ln(),
        config,
        rng,
        what,
    )?;
    Ok((u * half).exp())
}

/// Slice-samples every hyperparameter given the occupied components, one
/// coordinate at a time.
pub fn update_hyperparams<F: Real>(
    components: &[ComponentParams<F>],
    hyper: &mut HyperState<F>,
    prior: &PriorSpec,
    layout: &ModelLayout,
    config: &ChainConfig,
    rng: &mut RngStream,
) -> Result<()> {
    let p = layout.p;
    let two = F::lit(2.0);
    let slots = hyper.mu0.len();
    for g in 0..slots {
        let covs: Vec<usize> = if slots == 1 { (0..p).collect() } else { vec![g] };
        let mut mus = Vec::with_capacity(components.len() * covs.len());
        let mut log_vars = Vec::with_capacity(mus.capacity());
        for theta in components {
            for &l in &covs {
                mus.push(theta.mu[l]);
                log_vars.push(two * theta.sigma[l].ln());
            }
        }

        let sigma0 = hyper.sigma0[g];
        hyper.mu0[g] = slice(
            |m| mus.iter().map(|&v| normal_log_density(v, m, sigma0)).sum::<F>() + prior.mu0.log_density(m),
            hyper.mu0[g],
            config,
            rng,
            "G0 mean location",
        )?;
        let q: F = mus.iter().map(|&v| (v - hyper.mu0[g]) * (v - hyper.mu0[g])).sum();
        hyper.sigma0[g] = log_var_update(mus.len(), q, prior.log_var0, sigma0, config, rng, "G0 mean scale")?;

        let v_sigma = hyper.v_sigma[g];
        hyper.m_sigma[g] = slice(
            |m| log_vars.iter().map(|&v| normal_log_density(v, m, v_sigma)).sum::<F>() + prior.m_sigma.log_density(m),
            hyper.m_sigma[g],
            config,
            rng,
            "G0 log-variance location",
        )?;
        let ms = hyper.m_sigma[g];
        let q: F = log_vars.iter().map(|&v| (v - ms) * (v - ms)).sum();
        hyper.v_sigma[g] =
            log_var_update(log_vars.len(), q, prior.log_v_sigma_sq, v_sigma, config, rng, "G0 log-variance scale")?;
    }

    let n_branches = layout.n_branches();
    let mut q = F::zero();
    for theta in components {
        for b in 0..n_branches {
            let z = theta.phi.get(b, 0) / theta.tau;
            q = q + z * z;
        }
    }
    hyper.eta = log_var_update(
        components.len() * n_branches,
        q,
        prior.log_eta_sq,
        hyper.eta,
        config,
        rng,
        "intercept scale",
    )?;

    for s in 0..layout.n_sources {
        let mut q = F::zero();
        let mut count = 0;
        for theta in components {
            for l in (0..p).filter(|&l| layout.source_of[l] == s) {
                for b in 0..n_branches {
                    let z = theta.phi.get(b, l + 1) / (hyper.ard[l] * theta.nu);
                    q = q + z * z;
                    count += 1;
                }
            }
        }
        hyper.xi[s] = log_var_update(count, q, prior.xi_prior(s), hyper.xi[s], config, rng, "coefficient scale")?;
    }

    if prior.ard {
        for l in 0..p {
            let xi = hyper.xi[layout.source_of[l]];
            let mut q = F::zero();
            for theta in components {
                for b in 0..n_branches {
                    let z = theta.phi.get(b, l + 1) / (xi * theta.nu);
                    q = q + z * z;
                }
            }
            hyper.ard[l] = log_var_update(
                components.len() * n_branches,
                q,
                prior.log_ard_sq,
                hyper.ard[l],
                config,
                rng,
                "relevance scale",
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_log_lik_matches_normal_sum() {
        let values = [0.3_f64, -1.2, 2.0];
        let q: f64 = values.iter().map(|v| v * v).sum();
        for u in [-1.0_f64, 0.0, 0.7] {
            let sd = (0.5 * u).exp();
            let direct: f64 = values.iter().map(|&v| normal_log_density(v, 0.0, sd)).sum();
            let via = scale_log_lik(3.0, q, 0.5, u) - 3.0 * f64::half_ln_2pi();
            assert!((direct - via).abs() < 1e-12);
            let sd = u.exp();
            let direct: f64 = values.iter().map(|&v| normal_log_density(v, 0.0, sd)).sum();
            let via = scale_log_lik(3.0, q, 1.0, u) - 3.0 * f64::half_ln_2pi();
            assert!((direct - via).abs() < 1e-12);
        }
        assert_eq!(scale_log_lik(0.0, 0.0, 1.0, -800.0_f64), 0.0);
    }

    #[test]
    fn no_components_samples_hyperprior() {
        let prior = PriorSpec::default();
        let layout = ModelLayout::flat(1, 2);
        let mut hyper: HyperState<f64> = HyperState::initial(&prior, &layout);
        let config = ChainConfig::default();
        let mut rng = RngStream::new(21);
        let mut mu0 = Vec::new();
        let mut log_eta_sq = Vec::new();
        for _ in 0..20_000 {
            update_hyperparams(&[], &mut hyper, &prior, &layout, &config, &mut rng).unwrap();
            mu0.push(hyper.mu0[0]);
            log_eta_sq.push(2.0 * hyper.eta.ln());
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let sd = |v: &[f64]| {
            let m = mean(v);
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        };
        assert!(mean(&mu0).abs() < 0.25);
        assert!((sd(&mu0) - 5.0).abs() < 0.25);
        assert!(mean(&log_eta_sq).abs() < 0.1);
        assert!((sd(&log_eta_sq) - 2.0).abs() < 0.1);
    }
}
