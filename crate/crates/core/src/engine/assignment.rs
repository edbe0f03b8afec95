use crate::engine::g0::draw_component;
use crate::engine::state::MixtureState;
use crate::error::{Error, Result};
use crate::model::{ComponentParams, HyperState, ModelLayout, PriorSpec};
use crate::real::Real;
use crate::samplers::RngStream;

/// Draws an index with probability proportional to `exp(log_weights[k])`.
pub fn sample_log_weights<F: Real>(log_weights: &[F], rng: &mut RngStream) -> Result<usize> {
    let max = log_weights.iter().copied().fold(F::neg_infinity(), F::max);
    if log_weights.iter().any(|w| w.is_nan()) || !max.is_finite() {
        return Err(Error::NonFinite(format!(
            "assignment weights have no finite maximum ({max})"
        )));
    }
    let weights: Vec<f64> = log_weights
        .iter()
        .map(|&w| (w - max).exp().to_f64_lossy())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.uniform() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return Ok(k);
        }
        u -= w;
    }
    // Rounding left `u` just past the end; take the last positive weight.
    Ok(weights.iter().rposition(|&w| w > 0.0).unwrap_or(0))
}

/// Resamples the component of case `i` with `m` auxiliary components.
///
/// If `i` sits alone, its component's parameters become the first auxiliary
/// and the rest are fresh G0 draws. Existing component `c` is chosen with
/// weight `n_{-i,c} F(i | theta_c)` and each auxiliary with
/// `(gamma / m) F(i | theta_aux)`. `loglik(i, theta)` supplies `ln F`.
pub fn update_assignment<F, L>(
    i: usize,
    state: &mut MixtureState<F>,
    hyper: &HyperState<F>,
    prior: &PriorSpec,
    layout: &ModelLayout,
    rng: &mut RngStream,
    mut loglik: L,
) -> Result<()>
where
    F: Real,
    L: FnMut(usize, &ComponentParams<F>) -> F,
{
    let m = prior.aux_m;
    let mut aux: Vec<ComponentParams<F>> = Vec::with_capacity(m);
    if let Some(theta) = state.detach(i) {
        aux.push(theta);
    }
    while aux.len() < m {
        aux.push(draw_component(hyper, prior, layout, rng));
    }

    let k = state.n_components();
    let mut log_w = Vec::with_capacity(k + m);
    for (c, theta) in state.components().iter().enumerate() {
        let count = F::from_usize(state.counts()[c]).unwrap();
        log_w.push(count.ln() + loglik(i, theta));
    }
    let log_new = (hyper.gamma / F::from_usize(m).unwrap()).ln();
    for theta in &aux {
        log_w.push(log_new + loglik(i, theta));
    }

    let pick = sample_log_weights(&log_w, rng).map_err(|e| match e {
        Error::NonFinite(msg) => Error::NonFinite(format!("case {}: {msg}", i + 1)),
        other => other,
    })?;
    if pick < k {
        state.attach(i, pick);
    } else {
        state.attach_new(i, aux.swap_remove(pick - k));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{crp_partition_log_prob, enumerate_set_partitions, canonical_partition};

    fn setup(n: usize) -> (MixtureState<f64>, HyperState<f64>, PriorSpec, ModelLayout) {
        let prior = PriorSpec::simulation();
        let layout = ModelLayout::flat(1, 2);
        let hyper = HyperState::initial(&prior, &layout);
        let mut rng = RngStream::new(3);
        let theta = draw_component(&hyper, &prior, &layout, &mut rng);
        (MixtureState::single(n, theta), hyper, prior, layout)
    }

    #[test]
    fn log_weight_sampling_frequencies() {
        let mut rng = RngStream::new(11);
        let lw = [0.0_f64.ln(), 1.0_f64.ln(), 3.0_f64.ln()];
        let mut hits = [0usize; 3];
        for _ in 0..40_000 {
            hits[sample_log_weights(&lw, &mut rng).unwrap()] += 1;
        }
        assert_eq!(hits[0], 0);
        assert!((hits[2] as f64 / 40_000.0 - 0.75).abs() < 0.01);
        assert!(sample_log_weights(&[f64::NEG_INFINITY], &mut rng).is_err());
        assert!(sample_log_weights(&[0.0, f64::NAN], &mut rng).is_err());
    }

    #[test]
    fn huge_log_weights_do_not_overflow() {
        let mut rng = RngStream::new(1);
        let k = sample_log_weights(&[-1e6_f64, -1e6 + 50.0], &mut rng).unwrap();
        assert_eq!(k, 1);
    }

    #[test]
    fn single_case_always_reassigned_to_itself() {
        let (mut state, hyper, prior, layout) = setup(1);
        let mut rng = RngStream::new(5);
        for _ in 0..50 {
            update_assignment(0, &mut state, &hyper, &prior, &layout, &mut rng, |_, _| 0.0).unwrap();
            assert_eq!(state.n_components(), 1);
            assert_eq!(state.assignments(), &[0]);
            state.check_invariants().unwrap();
        }
    }

    #[test]
    fn constant_likelihood_gives_crp_partitions() {
        // With F constant the stationary law of the partition is the CRP.
        let n = 4;
        let (mut state, mut hyper, prior, layout) = setup(n);
        hyper.gamma = 1.3;
        let mut rng = RngStream::new(17);
        let parts = enumerate_set_partitions(n);
        let mut hits = vec![0usize; parts.len()];
        let sweeps = 60_000;
        for _ in 0..sweeps {
            for i in 0..n {
                update_assignment(i, &mut state, &hyper, &prior, &layout, &mut rng, |_, _| -2.0)
                    .unwrap();
            }
            let canon = canonical_partition(state.assignments());
            hits[parts.iter().position(|p| *p == canon).unwrap()] += 1;
        }
        for (p, &h) in parts.iter().zip(&hits) {
            let expected = crp_partition_log_prob(p, 1.3_f64).exp();
            let freq = h as f64 / sweeps as f64;
            assert!((freq - expected).abs() < 0.01, "{p:?}: {freq} vs {expected}");
        }
    }

    #[test]
    fn singleton_parameters_reused_as_auxiliary() {
        // Only the original parameters have finite likelihood, so a
        // singleton must keep them.
        let (mut state, hyper, prior, layout) = setup(1);
        let original = state.components()[0].clone();
        let mut rng = RngStream::new(2);
        let target = original.mu[0];
        for _ in 0..20 {
            update_assignment(0, &mut state, &hyper, &prior, &layout, &mut rng, |_, t| {
                if t.mu[0] == target {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            })
            .unwrap();
            assert_eq!(state.components()[0], original);
        }
    }
}
