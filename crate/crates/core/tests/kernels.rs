//! Both kernels leave their target invariant: long thinned runs are binned
//! into equiprobable cells of the exact CDF and checked with a chi-squared
//! test at the 0.001 level.

use dpmnl::samplers::{hmc_update, slice_sample_step, HmcConfig, RngStream, SliceConfig};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

const BINS: usize = 20;

fn chi_squared_ok(draws: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut counts = [0usize; BINS];
    for &x in draws {
        let u = cdf(x);
        counts[((u * BINS as f64) as usize).min(BINS - 1)] += 1;
    }
    let expected = draws.len() as f64 / BINS as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let crit = ChiSquared::new((BINS - 1) as f64).unwrap().inverse_cdf(0.999);
    (stat, crit)
}

struct Target {
    name: &'static str,
    log_pdf: fn(f64) -> f64,
    grad: fn(f64) -> f64,
    /// CDF of the reported draw `report(x)`.
    cdf: fn(f64) -> f64,
    report: fn(f64) -> f64,
    start: f64,
}

fn normal_cdf(m: f64, s: f64, x: f64) -> f64 {
    Normal::new(m, s).unwrap().cdf(x)
}

fn targets() -> Vec<Target> {
    vec![
        Target {
            name: "normal(1, 2)",
            log_pdf: |x| -0.125 * (x - 1.0).powi(2),
            grad: |x| -0.25 * (x - 1.0),
            cdf: |x| normal_cdf(1.0, 2.0, x),
            report: |x| x,
            start: 0.0,
        },
        Target {
            // Sampled on z = ln x, density e^z * 1.5 e^{-1.5 e^z}.
            name: "exponential(1.5) on the log scale",
            log_pdf: |z| z - 1.5 * z.exp(),
            grad: |z| 1.0 - 1.5 * z.exp(),
            cdf: |x| 1.0 - (-1.5 * x).exp(),
            report: f64::exp,
            start: 0.0,
        },
        Target {
            name: "bimodal mixture",
            log_pdf: |x| {
                let a = -0.5 * (x + 2.0).powi(2);
                let b = -0.5 * (x - 2.0).powi(2);
                a.max(b) + ((a - a.max(b)).exp() + (b - a.max(b)).exp()).ln()
            },
            grad: |x| {
                let wa = (-0.5 * (x + 2.0).powi(2)).exp();
                let wb = (-0.5 * (x - 2.0).powi(2)).exp();
                (-(x + 2.0) * wa - (x - 2.0) * wb) / (wa + wb)
            },
            cdf: |x| 0.5 * normal_cdf(-2.0, 1.0, x) + 0.5 * normal_cdf(2.0, 1.0, x),
            report: |x| x,
            start: 0.3,
        },
    ]
}

const KEEP: usize = 6000;
const THIN: usize = 10;

#[test]
fn slice_sampler_preserves_targets() {
    for (k, t) in targets().into_iter().enumerate() {
        let mut rng = RngStream::new(100 + k as u64);
        let cfg = SliceConfig::default();
        let mut x = t.start;
        let mut draws = Vec::with_capacity(KEEP);
        for i in 0..KEEP * THIN {
            x = slice_sample_step(t.log_pdf, x, &cfg, &mut rng).unwrap().x;
            if i % THIN == THIN - 1 {
                draws.push((t.report)(x));
            }
        }
        let (stat, crit) = chi_squared_ok(&draws, t.cdf);
        assert!(stat < crit, "{}: chi2 {stat:.1} >= {crit:.1}", t.name);
    }
}

#[test]
fn hmc_preserves_targets() {
    let cfg = HmcConfig {
        step_size: 0.25,
        leapfrog_steps: 12,
        mass: 1.0,
    };
    for (k, t) in targets().into_iter().enumerate() {
        let mut rng = RngStream::new(200 + k as u64);
        let target = |x: &[f64]| ((t.log_pdf)(x[0]), vec![(t.grad)(x[0])]);
        let mut x = vec![t.start];
        let mut draws = Vec::with_capacity(KEEP);
        let mut accepted = 0;
        for i in 0..KEEP * THIN {
            let out = hmc_update(target, &x, &cfg, &mut rng).unwrap();
            accepted += out.accepted as usize;
            x = out.x;
            if i % THIN == THIN - 1 {
                draws.push((t.report)(x[0]));
            }
        }
        assert!(accepted > KEEP * THIN / 2, "{}: acceptance too low", t.name);
        let (stat, crit) = chi_squared_ok(&draws, t.cdf);
        assert!(stat < crit, "{}: chi2 {stat:.1} >= {crit:.1}", t.name);
    }
}

#[test]
fn scaled_hmc_preserves_a_badly_scaled_target() {
    // Scales matched to the target's standard deviations.
    let sd = [0.05, 20.0];
    let target = |x: &[f64]| {
        let z = [x[0] / sd[0], x[1] / sd[1]];
        (-0.5 * (z[0] * z[0] + z[1] * z[1]), vec![-z[0] / sd[0], -z[1] / sd[1]])
    };
    let cfg = HmcConfig {
        step_size: 0.2,
        leapfrog_steps: 7,
        mass: 1.0,
    };
    let mut rng = RngStream::new(300);
    let mut x = vec![0.0, 0.0];
    let mut first = Vec::new();
    let mut second = Vec::new();
    for i in 0..KEEP * THIN {
        x = dpmnl::samplers::hmc_update_scaled(target, &x, Some(&sd), &cfg, &mut rng).unwrap().x;
        if i % THIN == THIN - 1 {
            first.push(x[0]);
            second.push(x[1]);
        }
    }
    for (draws, s) in [(&first, sd[0]), (&second, sd[1])] {
        let (stat, crit) = chi_squared_ok(draws, |v| normal_cdf(0.0, s, v));
        assert!(stat < crit, "sd {s}: chi2 {stat:.1} >= {crit:.1}");
    }
}
