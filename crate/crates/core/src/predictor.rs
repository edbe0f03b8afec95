//! Posterior-predictive class probabilities for new covariate vectors.
//!
//! For each retained sample the joint density `P(y = j, x)` is a mixture
//! over the occupied components (weights `n_c / (n + gamma)`) plus a new
//! component drawn from G0 (weight `gamma / (n + gamma)`), the latter
//! averaged over `n_g0_draws` fresh draws. Joint densities are averaged over
//! samples before normalising, in log space throughout.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{draw_component, MixtureKind, PosteriorSample};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{ComponentParams, ModelLayout, PriorSpec};
use crate::real::{log_sum_exp, Real};
use crate::samplers::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    /// G0 draws per sample for the new-component term.
    pub n_g0_draws: usize,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            n_g0_draws: 10,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveReport<F> {
    /// `cases x J` class probabilities.
    pub probs: Matrix<F>,
    /// Zero-based argmax class per case (lowest index on ties).
    pub predicted: Vec<usize>,
    /// `ln P(x)` per case.
    pub log_px: Vec<F>,
}

/// A sample's predictive mixture: log weights and component parameters,
/// G0 draws included.
#[derive(Clone, Debug)]
pub struct SampleMixture<F> {
    pub log_weights: Vec<F>,
    pub components: Vec<ComponentParams<F>>,
    /// Per component: log weight plus the covariate density's normaliser.
    offsets: Vec<F>,
    inv_sigma: Vec<Vec<F>>,
}

impl<F: Real> SampleMixture<F> {
    pub fn new(
        sample: &PosteriorSample<F>,
        prior: &PriorSpec,
        layout: &ModelLayout,
        mixture: MixtureKind,
        n_g0_draws: usize,
        rng: &mut RngStream,
    ) -> Self {
        let state = &sample.state;
        let n = F::from_usize(state.n()).unwrap();
        let mut log_weights = Vec::new();
        let mut components = Vec::new();
        match mixture {
            MixtureKind::Single => {
                let total = state.counts().iter().sum::<usize>();
                for (c, theta) in state.components().iter().enumerate() {
                    let w = if total == 0 {
                        F::one() / F::from_usize(state.n_components()).unwrap()
                    } else {
                        F::from_usize(state.counts()[c]).unwrap() / n
                    };
                    log_weights.push(w.ln());
                    components.push(theta.clone());
                }
            }
            MixtureKind::Dirichlet => {
                let gamma = sample.hyper.gamma;
                let log_denom = (n + gamma).ln();
                for (c, theta) in state.components().iter().enumerate() {
                    log_weights.push(F::from_usize(state.counts()[c]).unwrap().ln() - log_denom);
                    components.push(theta.clone());
                }
                if n_g0_draws > 0 {
                    let lw = gamma.ln() - log_denom - F::from_usize(n_g0_draws).unwrap().ln();
                    for _ in 0..n_g0_draws {
                        log_weights.push(lw);
                        components.push(draw_component(&sample.hyper, prior, layout, rng));
                    }
                }
            }
        }
        let offsets = components
            .iter()
            .zip(&log_weights)
            .map(|(t, &lw)| {
                let p = F::from_usize(t.p()).unwrap();
                lw - t.sigma.iter().map(|s| s.ln()).sum::<F>() - p * F::half_ln_2pi()
            })
            .collect();
        let inv_sigma = components
            .iter()
            .map(|t| t.sigma.iter().map(|s| s.recip()).collect())
            .collect();
        Self {
            log_weights,
            components,
            offsets,
            inv_sigma,
        }
    }

    /// `ln P(y = j, x)` for every class `j`. `scratch` is reused across
    /// calls.
    pub fn log_joint(&self, x: &[F], out: &mut [F], scratch: &mut Vec<F>) {
        let j_count = out.len();
        let k_count = self.components.len();
        scratch.clear();
        scratch.resize(k_count * j_count, F::zero());
        let half = F::lit(0.5);
        for (k, theta) in self.components.iter().enumerate() {
            let mut cov = self.offsets[k];
            for ((&xl, &m), &is) in x.iter().zip(&theta.mu).zip(&self.inv_sigma[k]) {
                let z = (xl - m) * is;
                cov = cov - z * z * half;
            }
            let row = &mut scratch[k * j_count..(k + 1) * j_count];
            theta.coef.log_probs_into(x, row);
            for v in row.iter_mut() {
                *v = *v + cov;
            }
        }
        for (j, o) in out.iter_mut().enumerate() {
            let mut max = F::neg_infinity();
            for k in 0..k_count {
                max = max.max(scratch[k * j_count + j]);
            }
            if !max.is_finite() {
                *o = max;
                continue;
            }
            let mut sum = F::zero();
            for k in 0..k_count {
                sum = sum + (scratch[k * j_count + j] - max).exp();
            }
            *o = max + sum.ln();
        }
    }
}

/// Stream id for a sample's G0 draws, so the draws follow the sample rather
/// than its position in the list.
fn sample_stream<F>(s: &PosteriorSample<F>) -> u64 {
    ((s.chain as u64) << 40) ^ s.iteration as u64
}

/// `ln P(y = j, x | sample)` for one covariate vector.
pub fn predictive_log_joint<F: Real>(
    x: &[F],
    sample: &PosteriorSample<F>,
    prior: &PriorSpec,
    layout: &ModelLayout,
    mixture: MixtureKind,
    cfg: &PredictorConfig,
) -> Result<Vec<F>> {
    check_case(x, layout, 0)?;
    let mut rng = RngStream::with_stream(cfg.seed, sample_stream(sample));
    let mix = SampleMixture::new(sample, prior, layout, mixture, cfg.n_g0_draws, &mut rng);
    let mut out = vec![F::zero(); layout.n_classes];
    let mut scratch = Vec::new();
    mix.log_joint(x, &mut out, &mut scratch);
    if out.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("predictive density is NaN".into()));
    }
    Ok(out)
}

fn check_case<F: Real>(x: &[F], layout: &ModelLayout, case: usize) -> Result<()> {
    if x.len() != layout.p {
        return Err(Error::Shape(format!(
            "case {} has {} covariates, model expects {}",
            case + 1,
            x.len(),
            layout.p
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("case {} has a non-finite covariate", case + 1)));
    }
    Ok(())
}

/// Pools all samples with equal weight and returns
/// `mean_s P(y = j, x | s) / mean_s P(x | s)` for every case.
pub fn posterior_predictive<F: Real>(
    x: &Matrix<F>,
    samples: &[PosteriorSample<F>],
    prior: &PriorSpec,
    layout: &ModelLayout,
    mixture: MixtureKind,
    cfg: &PredictorConfig,
) -> Result<PredictiveReport<F>> {
    if samples.is_empty() {
        return Err(Error::MissingInput("no posterior samples".into()));
    }
    for i in 0..x.rows() {
        check_case(x.row(i), layout, i)?;
    }
    let mixtures: Vec<SampleMixture<F>> = samples
        .par_iter()
        .map(|s| {
            let mut rng = RngStream::with_stream(cfg.seed, sample_stream(s));
            SampleMixture::new(s, prior, layout, mixture, cfg.n_g0_draws, &mut rng)
        })
        .collect();
    let j_count = layout.n_classes;
    let log_s = F::from_usize(samples.len()).unwrap().ln();

    let rows: Vec<Result<(Vec<F>, F)>> = (0..x.rows())
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let mut per_class: Vec<Vec<F>> = vec![Vec::with_capacity(mixtures.len()); j_count];
            let mut out = vec![F::zero(); j_count];
            let mut scratch = Vec::new();
            for m in &mixtures {
                m.log_joint(xi, &mut out, &mut scratch);
                for (acc, &v) in per_class.iter_mut().zip(&out) {
                    acc.push(v);
                }
            }
            let joint: Vec<F> = per_class.iter().map(|v| log_sum_exp(v) - log_s).collect();
            let log_px = log_sum_exp(&joint);
            if !log_px.is_finite() {
                return Err(Error::NonFinite(format!(
                    "P(x) underflows for case {} in every sample",
                    i + 1
                )));
            }
            let mut probs: Vec<F> = joint.iter().map(|&v| (v - log_px).exp()).collect();
            let total: F = probs.iter().copied().sum();
            for p in probs.iter_mut() {
                *p = *p / total;
            }
            Ok((probs, log_px))
        })
        .collect();

    let mut probs = Matrix::from_elem(x.rows(), j_count, F::zero());
    let mut predicted = Vec::with_capacity(x.rows());
    let mut log_px = Vec::with_capacity(x.rows());
    for (i, r) in rows.into_iter().enumerate() {
        let (p, lp) = r?;
        let mut best = 0;
        for j in 1..j_count {
            if p[j] > p[best] {
                best = j;
            }
        }
        probs.row_mut(i).copy_from_slice(&p);
        predicted.push(best);
        log_px.push(lp);
    }
    Ok(PredictiveReport {
        probs,
        predicted,
        log_px,
    })
}

/// Header `case,p1,...,pJ,predicted`, then one row per case with 1-based
/// case ids and labels.
pub fn write_predictions<F: Real, W: Write>(mut out: W, report: &PredictiveReport<F>) -> Result<()> {
    let j = report.probs.cols();
    let mut header = String::from("case");
    for c in 1..=j {
        header.push_str(&format!(",p{c}"));
    }
    header.push_str(",predicted");
    writeln!(out, "{header}")?;
    for i in 0..report.probs.rows() {
        let mut line = (i + 1).to_string();
        for v in report.probs.row(i) {
            line.push(',');
            line.push_str(&v.to_f64_lossy().to_string());
        }
        line.push_str(&format!(",{}", report.predicted[i] + 1));
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the zero-based predicted labels and probabilities back from
/// [`write_predictions`] output.
pub fn read_predictions<R: BufRead>(input: R) -> Result<(Vec<usize>, Matrix<f64>)> {
    let mut predicted = Vec::new();
    let mut probs = Vec::new();
    let mut width = None;
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if k == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let err = |m: String| Error::Parse { line: k + 1, message: m };
        if fields.len() < 3 {
            return Err(err("expected case id, probabilities and a label".into()));
        }
        let j = fields.len() - 2;
        if *width.get_or_insert(j) != j {
            return Err(err(format!("{j} probabilities, earlier rows have {}", width.unwrap())));
        }
        for f in &fields[1..=j] {
            probs.push(f.parse::<f64>().map_err(|_| err(format!("{f:?} is not a probability")))?);
        }
        let label: usize = fields[j + 1]
            .parse()
            .map_err(|_| err(format!("label {:?} is not an integer", fields[j + 1])))?;
        if label == 0 || label > j {
            return Err(err(format!("label {label} outside 1..={j}")));
        }
        predicted.push(label - 1);
    }
    let rows = predicted.len();
    Ok((predicted, Matrix::from_vec(rows, width.unwrap_or(0), probs)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::MixtureState;
    use crate::model::{joint_log_density, HyperState};

    fn theta(shift: f64) -> ComponentParams<f64> {
        let beta = Matrix::from_rows(&[vec![1.0 + shift, -0.5, 0.0], vec![0.2, shift, -1.0]]).unwrap();
        ComponentParams::from_mnl(vec![shift, -shift], vec![1.0, 0.5 + shift.abs()], &[0.1, shift, -0.3], &beta, 1.0, 1.0)
    }

    fn sample(
        assign: Vec<usize>,
        comps: Vec<ComponentParams<f64>>,
        gamma: f64,
        iteration: usize,
    ) -> (PosteriorSample<f64>, PriorSpec, ModelLayout) {
        let prior = PriorSpec::simulation();
        let layout = ModelLayout::flat(2, 3);
        let mut hyper = HyperState::initial(&prior, &layout);
        hyper.gamma = gamma;
        let s = PosteriorSample {
            chain: 0,
            iteration,
            state: MixtureState::from_assignments(assign, comps).unwrap(),
            hyper,
            log_lik: 0.0,
        };
        (s, prior, layout)
    }

    #[test]
    fn tiny_gamma_single_component_is_exact() {
        let t = theta(0.3);
        let (s, prior, layout) = sample(vec![0; 4], vec![t.clone()], 1e-300, 1);
        let x = [0.4, -1.1];
        let out = predictive_log_joint(&x, &s, &prior, &layout, MixtureKind::Dirichlet, &PredictorConfig::default())
            .unwrap();
        for (j, v) in out.iter().enumerate() {
            let direct = joint_log_density(&x, j, &t).unwrap();
            assert!((v - direct).abs() < 1e-12);
        }
        let single = predictive_log_joint(&x, &s, &prior, &layout, MixtureKind::Single, &PredictorConfig::default())
            .unwrap();
        for (j, v) in single.iter().enumerate() {
            assert_eq!(*v, joint_log_density(&x, j, &t).unwrap());
        }
    }

    #[test]
    fn two_components_match_hand_mixture() {
        // No G0 draws isolates the occupied-component arithmetic.
        let (a, b) = (theta(0.3), theta(-0.8));
        let (s, prior, layout) = sample(vec![0, 0, 0, 1], vec![a.clone(), b.clone()], 0.5, 1);
        let cfg = PredictorConfig {
            n_g0_draws: 0,
            ..PredictorConfig::default()
        };
        let x = [0.4, -1.1];
        let out = predictive_log_joint(&x, &s, &prior, &layout, MixtureKind::Dirichlet, &cfg).unwrap();
        for j in 0..3 {
            let direct = 3.0 / 4.5 * joint_log_density(&x, j, &a).unwrap().exp()
                + 1.0 / 4.5 * joint_log_density(&x, j, &b).unwrap().exp();
            assert!((out[j].exp() - direct).abs() < 1e-14 * direct.max(1e-300));
        }
    }

    #[test]
    fn sum_over_classes_is_covariate_mixture() {
        let (a, b) = (theta(0.3), theta(-0.8));
        let (s, prior, layout) = sample(vec![0, 1, 1], vec![a.clone(), b.clone()], 1.0, 1);
        let cfg = PredictorConfig {
            n_g0_draws: 0,
            ..PredictorConfig::default()
        };
        let x = [1.0, 0.2];
        let out = predictive_log_joint(&x, &s, &prior, &layout, MixtureKind::Dirichlet, &cfg).unwrap();
        let total: f64 = out.iter().map(|v| v.exp()).sum();
        let px = 1.0 / 4.0 * a.covariate_log_density(&x).exp() + 2.0 / 4.0 * b.covariate_log_density(&x).exp();
        assert!((total - px).abs() < 1e-12);
    }

    #[test]
    fn ratio_of_averages_not_average_of_ratios() {
        // Two samples that disagree and put very different mass on x.
        let (s1, prior, layout) = sample(vec![0; 3], vec![theta(0.3)], 1e-12, 1);
        let (s2, _, _) = sample(vec![0; 3], vec![theta(-2.0)], 1e-12, 2);
        let samples = [s1.clone(), s2.clone()];
        let x = Matrix::from_rows(&[vec![1.5, 0.3]]).unwrap();
        let cfg = PredictorConfig::default();
        let rep = posterior_predictive(&x, &samples, &prior, &layout, MixtureKind::Single, &cfg).unwrap();

        let j1 = predictive_log_joint(x.row(0), &s1, &prior, &layout, MixtureKind::Single, &cfg).unwrap();
        let j2 = predictive_log_joint(x.row(0), &s2, &prior, &layout, MixtureKind::Single, &cfg).unwrap();
        let norm = |v: &[f64]| {
            let t: f64 = v.iter().map(|a| a.exp()).sum();
            v.iter().map(|a| a.exp() / t).collect::<Vec<_>>()
        };
        let (p1, p2) = (norm(&j1), norm(&j2));
        let mut max_gap: f64 = 0.0;
        for j in 0..3 {
            let num = (j1[j].exp() + j2[j].exp()) / 2.0;
            let den: f64 = (0..3).map(|k| (j1[k].exp() + j2[k].exp()) / 2.0).sum();
            assert!((rep.probs.get(0, j) - num / den).abs() < 1e-12);
            let avg_ratio = (p1[j] + p2[j]) / 2.0;
            max_gap = max_gap.max((rep.probs.get(0, j) - avg_ratio).abs());
        }
        assert!(max_gap > 0.01, "fixture does not separate the two formulas: {max_gap}");
    }

    #[test]
    fn order_invariant_and_normalised() {
        let (s1, prior, layout) = sample(vec![0, 1, 0], vec![theta(0.3), theta(1.0)], 0.7, 1);
        let (s2, _, _) = sample(vec![0, 0, 0], vec![theta(-0.5)], 0.2, 2);
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![3.0, -2.0], vec![-10.0, 8.0]]).unwrap();
        let cfg = PredictorConfig::default();
        let a = posterior_predictive(&x, &[s1.clone(), s2.clone()], &prior, &layout, MixtureKind::Dirichlet, &cfg)
            .unwrap();
        let b = posterior_predictive(&x, &[s2, s1], &prior, &layout, MixtureKind::Dirichlet, &cfg).unwrap();
        for i in 0..3 {
            let total: f64 = a.probs.row(i).iter().sum();
            assert!((total - 1.0).abs() < 1e-10);
            for j in 0..3 {
                assert!((a.probs.get(i, j) - b.probs.get(i, j)).abs() < 1e-12);
            }
        }
        assert_eq!(a.predicted, b.predicted);
    }

    #[test]
    fn relabelling_components_changes_nothing() {
        let (a, b) = (theta(0.3), theta(-0.8));
        let (s1, prior, layout) = sample(vec![0, 1, 1], vec![a.clone(), b.clone()], 0.9, 1);
        let (s2, _, _) = sample(vec![1, 0, 0], vec![b, a], 0.9, 1);
        let x = Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let cfg = PredictorConfig::default();
        let r1 = posterior_predictive(&x, &[s1], &prior, &layout, MixtureKind::Dirichlet, &cfg).unwrap();
        let r2 = posterior_predictive(&x, &[s2], &prior, &layout, MixtureKind::Dirichlet, &cfg).unwrap();
        for j in 0..3 {
            assert!((r1.probs.get(0, j) - r2.probs.get(0, j)).abs() < 1e-12);
        }
    }

    #[test]
    fn prediction_file_round_trip() {
        let (s, prior, layout) = sample(vec![0, 0], vec![theta(0.1)], 0.5, 1);
        let x = Matrix::from_rows(&[vec![0.5, 0.5], vec![-1.0, 2.0]]).unwrap();
        let rep = posterior_predictive(&x, &[s], &prior, &layout, MixtureKind::Dirichlet, &PredictorConfig::default())
            .unwrap();
        let mut buf = Vec::new();
        write_predictions(&mut buf, &rep).unwrap();
        let (pred, probs) = read_predictions(buf.as_slice()).unwrap();
        assert_eq!(pred, rep.predicted);
        assert_eq!(probs, rep.probs);
    }

    #[test]
    fn rejects_bad_cases() {
        let (s, prior, layout) = sample(vec![0], vec![theta(0.1)], 0.5, 1);
        let cfg = PredictorConfig::default();
        let x = Matrix::from_rows(&[vec![0.5]]).unwrap();
        assert!(posterior_predictive(&x, &[s.clone()], &prior, &layout, MixtureKind::Dirichlet, &cfg).is_err());
        let x = Matrix::from_rows(&[vec![f64::NAN, 0.0]]).unwrap();
        assert!(posterior_predictive(&x, &[s], &prior, &layout, MixtureKind::Dirichlet, &cfg).is_err());
        let x = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert!(posterior_predictive::<f64>(&x, &[], &prior, &layout, MixtureKind::Dirichlet, &cfg).is_err());
    }
}
