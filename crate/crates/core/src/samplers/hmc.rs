use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::samplers::RngStream;

/// Hamiltonian dynamics settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmcConfig {
    pub step_size: f64,
    pub leapfrog_steps: usize,
    /// Scalar multiple of the identity mass matrix.
    pub mass: f64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            step_size: 0.05,
            leapfrog_steps: 20,
            mass: 1.0,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::Config(format!("hmc step_size {} must be positive", self.step_size)));
        }
        if self.leapfrog_steps == 0 {
            return Err(Error::Config("hmc leapfrog_steps must be at least 1".into()));
        }
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(Error::Config(format!("hmc mass {} must be positive", self.mass)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HmcOutcome<F> {
    pub x: Vec<F>,
    pub accepted: bool,
    /// `H(end) - H(start)`; `+inf` when the trajectory diverged.
    pub delta_h: F,
    /// Log density at the returned point.
    pub log_density: F,
}

/// Runs `steps` leapfrog steps in place, with per-coordinate step sizes
/// `step_size * scales[k]` (unit scales when `None`).
///
/// Returns the log density and gradient at the final position.
pub fn leapfrog<F: Real, G>(
    target: &mut G,
    x: &mut [F],
    momentum: &mut [F],
    step_size: F,
    steps: usize,
    mass: F,
    scales: Option<&[F]>,
) -> (F, Vec<F>)
where
    G: FnMut(&[F]) -> (F, Vec<F>),
{
    let half = F::lit(0.5);
    let scale = |k: usize| scales.map_or(F::one(), |s| s[k]);
    let (mut logp, mut grad) = target(x);
    for _ in 0..steps {
        for k in 0..x.len() {
            momentum[k] = momentum[k] + half * step_size * scale(k) * grad[k];
        }
        for k in 0..x.len() {
            x[k] = x[k] + step_size * scale(k) * momentum[k] / mass;
        }
        let next = target(x);
        logp = next.0;
        grad = next.1;
        for k in 0..x.len() {
            momentum[k] = momentum[k] + half * step_size * scale(k) * grad[k];
        }
    }
    (logp, grad)
}

/// One HMC transition with an identity (times `mass`) mass matrix.
pub fn hmc_update<F: Real, G>(
    target: G,
    x0: &[F],
    cfg: &HmcConfig,
    rng: &mut RngStream,
) -> Result<HmcOutcome<F>>
where
    G: FnMut(&[F]) -> (F, Vec<F>),
{
    hmc_update_scaled(target, x0, None, cfg, rng)
}

/// One HMC transition. With `scales`, coordinate `k` moves with step
/// `step_size * scales[k]`, which is plain HMC on `x[k] / scales[k]`.
/// Scales may depend on anything held fixed during the update.
pub fn hmc_update_scaled<F: Real, G>(
    mut target: G,
    x0: &[F],
    scales: Option<&[F]>,
    cfg: &HmcConfig,
    rng: &mut RngStream,
) -> Result<HmcOutcome<F>>
where
    G: FnMut(&[F]) -> (F, Vec<F>),
{
    let mass = F::lit(cfg.mass);
    let half = F::lit(0.5);
    let (logp0, grad0) = target(x0);
    if logp0.is_nan() || grad0.iter().any(|g| g.is_nan()) {
        return Err(Error::NonFinite("log density or gradient is NaN at the current state".into()));
    }
    let mut momentum: Vec<F> = (0..x0.len())
        .map(|_| F::lit(rng.normal() * cfg.mass.sqrt()))
        .collect();
    let kinetic = |p: &[F]| p.iter().map(|&v| v * v).sum::<F>() * half / mass;
    let h0 = -logp0 + kinetic(&momentum);

    let mut x = x0.to_vec();
    let (logp1, _) = leapfrog(
        &mut target,
        &mut x,
        &mut momentum,
        F::lit(cfg.step_size),
        cfg.leapfrog_steps,
        mass,
        scales,
    );
    let h1 = -logp1 + kinetic(&momentum);
    let delta_h = if h1.is_finite() && x.iter().all(|v| v.is_finite()) {
        h1 - h0
    } else {
        F::infinity()
    };
    let u = rng.uniform_open();
    let accepted = delta_h.is_finite() && F::lit(u.ln()) < -delta_h;
    Ok(if accepted {
        HmcOutcome {
            x,
            accepted,
            delta_h,
            log_density: logp1,
        }
    } else {
        HmcOutcome {
            x: x0.to_vec(),
            accepted,
            delta_h,
            log_density: logp0,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal(x: &[f64]) -> (f64, Vec<f64>) {
        (-0.5 * x.iter().map(|v| v * v).sum::<f64>(), x.iter().map(|v| -v).collect())
    }

    #[test]
    fn energy_conserved_for_small_steps() {
        let mut x = vec![0.7, -1.2];
        let mut p = vec![0.3, 0.9];
        let h0 = 0.5 * (0.7f64.powi(2) + 1.2f64.powi(2)) + 0.5 * (0.09 + 0.81);
        let (logp, _) = leapfrog(&mut std_normal, &mut x, &mut p, 1e-3, 10, 1.0, None);
        let h1 = -logp + 0.5 * p.iter().map(|v| v * v).sum::<f64>();
        assert!((h1 - h0).abs() < 1e-5);
    }

    #[test]
    fn leapfrog_is_reversible() {
        let target = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            (-0.25 * a.powi(4) - 0.5 * b * b - 0.3 * a * b, vec![-a.powi(3) - 0.3 * b, -b - 0.3 * a])
        };
        let mut t = target;
        let x0 = vec![0.4, -0.8];
        let mut x = x0.clone();
        let mut p = vec![1.1, 0.2];
        leapfrog(&mut t, &mut x, &mut p, 0.1, 25, 1.0, None);
        for v in p.iter_mut() {
            *v = -*v;
        }
        leapfrog(&mut t, &mut x, &mut p, 0.1, 25, 1.0, None);
        for (a, b) in x.iter().zip(&x0) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn acceptance_rate_on_standard_normal() {
        let cfg = HmcConfig {
            step_size: 0.5,
            leapfrog_steps: 10,
            mass: 1.0,
        };
        let mut rng = RngStream::new(11);
        let mut x = vec![0.0];
        let mut accepted = 0;
        for _ in 0..10_000 {
            let out = hmc_update(std_normal, &x, &cfg, &mut rng).unwrap();
            accepted += out.accepted as usize;
            x = out.x;
        }
        let rate = accepted as f64 / 10_000.0;
        assert!(rate > 0.6 && rate < 1.0, "rate {rate}");
    }

    #[test]
    fn correlated_gaussian_covariance() {
        // Covariance [[1, 0.8], [0.8, 1]].
        let det = 1.0 - 0.64;
        let target = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let q = (a * a - 1.6 * a * b + b * b) / det;
            (-0.5 * q, vec![-(a - 0.8 * b) / det, -(b - 0.8 * a) / det])
        };
        let cfg = HmcConfig {
            step_size: 0.15,
            leapfrog_steps: 20,
            mass: 1.0,
        };
        let mut rng = RngStream::new(12);
        let mut x = vec![0.0, 0.0];
        let n = 20_000;
        let (mut saa, mut sab, mut sbb, mut sa, mut sb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            x = hmc_update(target, &x, &cfg, &mut rng).unwrap().x;
            sa += x[0];
            sb += x[1];
            saa += x[0] * x[0];
            sab += x[0] * x[1];
            sbb += x[1] * x[1];
        }
        let nf = n as f64;
        let (ma, mb) = (sa / nf, sb / nf);
        assert!((saa / nf - ma * ma - 1.0).abs() < 0.05);
        assert!((sbb / nf - mb * mb - 1.0).abs() < 0.05);
        assert!((sab / nf - ma * mb - 0.8).abs() < 0.05);
    }

    #[test]
    fn divergence_is_rejected_not_fatal() {
        let cfg = HmcConfig {
            step_size: 50.0,
            leapfrog_steps: 50,
            mass: 1.0,
        };
        let target = |x: &[f64]| (-x[0].powi(4), vec![-4.0 * x[0].powi(3)]);
        let mut rng = RngStream::new(13);
        let out = hmc_update(target, &[1.0], &cfg, &mut rng).unwrap();
        assert!(!out.accepted);
        assert_eq!(out.x, vec![1.0]);
    }

    #[test]
    fn scaled_steps_match_rescaled_target() {
        // HMC on x with scales s equals HMC on z = x / s with unit scales.
        let s = [0.01, 3.0];
        let cfg = HmcConfig::default();
        let target_x = |x: &[f64]| {
            let z = [x[0] / s[0], x[1] / s[1]];
            (-0.5 * (z[0] * z[0] + z[1] * z[1]), vec![-z[0] / s[0], -z[1] / s[1]])
        };
        let mut r1 = RngStream::new(14);
        let mut r2 = RngStream::new(14);
        let mut x = vec![0.005, 1.0];
        let mut z = vec![0.5, 1.0 / 3.0];
        for _ in 0..50 {
            x = hmc_update_scaled(target_x, &x, Some(&s), &cfg, &mut r1).unwrap().x;
            z = hmc_update(std_normal, &z, &cfg, &mut r2).unwrap().x;
            assert!((x[0] / s[0] - z[0]).abs() < 1e-9);
            assert!((x[1] / s[1] - z[1]).abs() < 1e-9);
        }
    }
}
