use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::engine::sample_log_weights;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{ComponentParams, Dataset};
use crate::samplers::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimKind {
    /// Two-component mixture of Gaussian-covariate MNLs, `p = 5`, `J = 4`.
    Sim1,
    /// Smooth nonlinear binary boundary on `Uniform(0, 5)^3` covariates.
    Sim2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSpec {
    pub which: SimKind,
    pub n_total: usize,
    pub n_train: usize,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            which: SimKind::Sim1,
            n_total: 2100,
            n_train: 100,
            seed: 1,
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_train >= self.n_total {
            return Err(Error::Config(format!(
                "need 0 < n_train ({}) < n_total ({})",
                self.n_train, self.n_total
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimTruth {
    Sim1 { components: Vec<ComponentParams<f64>> },
    Sim2 { a: [f64; 3] },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimData {
    pub train: Dataset<f64>,
    pub test: Dataset<f64>,
    pub truth: SimTruth,
    /// Generating component of each training case (all zero for sim2).
    pub train_component: Vec<usize>,
    pub test_component: Vec<usize>,
}

pub fn generate(spec: &SimSpec) -> Result<SimData> {
    match spec.which {
        SimKind::Sim1 => generate_sim1(spec),
        SimKind::Sim2 => generate_sim2(spec),
    }
}

const SIM1_P: usize = 5;
const SIM1_J: usize = 4;

fn sim1_component(rng: &mut RngStream) -> ComponentParams<f64> {
    let mu: Vec<f64> = (0..SIM1_P).map(|_| rng.normal()).collect();
    let sigma: Vec<f64> = (0..SIM1_P).map(|_| (0.5 * 2.0 * rng.normal()).exp()).collect();
    let tau = (0.5 * 0.1 * rng.normal()).exp();
    let nu = (0.5 * 2.0 * rng.normal()).exp();
    let alpha: Vec<f64> = (0..SIM1_J).map(|_| tau * rng.normal()).collect();
    let beta = Matrix::from_vec(
        SIM1_P,
        SIM1_J,
        (0..SIM1_P * SIM1_J).map(|_| nu * rng.normal()).collect(),
    )
    .expect("shape is fixed");
    ComponentParams::from_mnl(mu, sigma, &alpha, &beta, nu, tau)
}

/// Draws two components from the simulation baseline prior and
/// `n_total / 2` cases from each (the first gets the odd one out), then
/// splits uniformly at random.
pub fn generate_sim1(spec: &SimSpec) -> Result<SimData> {
    spec.validate()?;
    let mut rng = RngStream::new(spec.seed);
    let components = vec![sim1_component(&mut rng), sim1_component(&mut rng)];
    let sizes = [spec.n_total.div_ceil(2), spec.n_total / 2];
    let mut x = Vec::with_capacity(spec.n_total * SIM1_P);
    let mut y = Vec::with_capacity(spec.n_total);
    let mut origin = Vec::with_capacity(spec.n_total);
    let mut lp = [0.0; SIM1_J];
    for (c, theta) in components.iter().enumerate() {
        for _ in 0..sizes[c] {
            let row: Vec<f64> = (0..SIM1_P)
                .map(|l| theta.mu[l] + theta.sigma[l] * rng.normal())
                .collect();
            theta.coef.log_probs_into(&row, &mut lp);
            y.push(sample_log_weights(&lp, &mut rng)?);
            x.extend(row);
            origin.push(c);
        }
    }
    let all = Dataset::new(Matrix::from_vec(spec.n_total, SIM1_P, x)?, y, SIM1_J)?;
    let (train_idx, test_idx) = random_split(spec.n_total, spec.n_train, &mut rng);
    Ok(SimData {
        train: all.subset(&train_idx),
        test: all.subset(&test_idx),
        truth: SimTruth::Sim1 { components },
        train_component: train_idx.iter().map(|&i| origin[i]).collect(),
        test_component: test_idx.iter().map(|&i| origin[i]).collect(),
    })
}

/// `P(y = 1 | x)` for the nonlinear boundary with constants `a`.
pub fn sim2_prob_class1(a: &[f64; 3], x: &[f64]) -> Result<f64> {
    if x.len() != 3 {
        return Err(Error::Shape(format!("expected 3 covariates, got {}", x.len())));
    }
    if x[0] < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "x1 = {} must be non-negative for the power term",
            x[0]
        )));
    }
    let s = a[0] * (x[0].powf(1.04) + 1.2).sin() + x[0] * (a[1] * x[1] + 0.7).cos() + a[2] * x[2] - 2.0;
    Ok(1.0 / (1.0 + s.exp()))
}

pub fn generate_sim2(spec: &SimSpec) -> Result<SimData> {
    spec.validate()?;
    let mut rng = RngStream::new(spec.seed);
    let a = [
        1.0 + 0.5 * rng.normal(),
        1.0 + 0.5 * rng.normal(),
        1.0 + 0.5 * rng.normal(),
    ];
    let mut x = Vec::with_capacity(spec.n_total * 3);
    let mut y = Vec::with_capacity(spec.n_total);
    for _ in 0..spec.n_total {
        let row = [5.0 * rng.uniform(), 5.0 * rng.uniform(), 5.0 * rng.uniform()];
        let p1 = sim2_prob_class1(&a, &row)?;
        y.push(if rng.uniform() < p1 { 0 } else { 1 });
        x.extend(row);
    }
    let all = Dataset::new(Matrix::from_vec(spec.n_total, 3, x)?, y, 2)?;
    let (train_idx, test_idx) = random_split(spec.n_total, spec.n_train, &mut rng);
    Ok(SimData {
        train: all.subset(&train_idx),
        test: all.subset(&test_idx),
        truth: SimTruth::Sim2 { a },
        train_component: vec![0; train_idx.len()],
        test_component: vec![0; test_idx.len()],
    })
}

/// Uniform random split of `0..n` without replacement. Both halves come
/// back in ascending order.
pub fn random_split(n: usize, n_train: usize, rng: &mut RngStream) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut train = idx[..n_train.min(n)].to_vec();
    let mut test = idx[n_train.min(n)..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}
