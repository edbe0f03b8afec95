use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use dpmnl::model::{Dataset, MnlCoefficients};
use dpmnl::{Error, Matrix, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlFit {
    pub coef: MnlCoefficients<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const GRAD_TOL: f64 = 1e-6;
const MAX_ITER: usize = 200;

/// Parameters are stacked class by class: `[alpha_j, beta_1j, ..., beta_pj]`.
fn unpack(theta: &DVector<f64>, p: usize, j: usize) -> MnlCoefficients<f64> {
    let w = p + 1;
    let alpha = (0..j).map(|c| theta[c * w]).collect();
    let beta = Matrix::from_vec(p, j, (0..p * j).map(|k| theta[(k % j) * w + 1 + k / j]).collect())
        .expect("shape is fixed");
    MnlCoefficients { alpha, beta }
}

/// `sum_i ln P(y_i | x_i) - ridge * |beta|^2 / 2`.
pub fn ml_objective(data: &Dataset<f64>, coef: &MnlCoefficients<f64>, ridge: f64) -> f64 {
    let mut lp = vec![0.0; data.n_classes()];
    let mut f = 0.0;
    for i in 0..data.n() {
        coef.log_probs_into(data.row(i), &mut lp);
        f += lp[data.label(i)];
    }
    f - 0.5 * ridge * coef.beta.as_slice().iter().map(|b| b * b).sum::<f64>()
}

fn grad_hess(data: &Dataset<f64>, theta: &DVector<f64>, ridge: f64) -> (f64, DVector<f64>, DMatrix<f64>) {
    let (p, j) = (data.p(), data.n_classes());
    let w = p + 1;
    let dim = j * w;
    let coef = unpack(theta, p, j);
    let mut g = DVector::zeros(dim);
    let mut h = DMatrix::zeros(dim, dim);
    let mut lp = vec![0.0; j];
    let mut xt = vec![1.0; w];
    for i in 0..data.n() {
        let x = data.row(i);
        xt[1..].copy_from_slice(x);
        coef.log_probs_into(x, &mut lp);
        let probs: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
        let y = data.label(i);
        for a in 0..j {
            let r = f64::from(u8::from(a == y)) - probs[a];
            for k in 0..w {
                g[a * w + k] += r * xt[k];
            }
            for b in 0..j {
                let c = if a == b { probs[a] * (1.0 - probs[a]) } else { -probs[a] * probs[b] };
                for k in 0..w {
                    for m in 0..w {
                        h[(a * w + k, b * w + m)] += c * xt[k] * xt[m];
                    }
                }
            }
        }
    }
    for a in 0..j {
        for k in 1..w {
            g[a * w + k] -= ridge * theta[a * w + k];
            h[(a * w + k, a * w + k)] += ridge;
        }
    }
    (ml_objective(data, &coef, ridge), g, h)
}

/// Maximum-likelihood MNL with a ridge penalty on the slopes only, by
/// damped Newton ascent from zero. The intercepts keep their redundant
/// shift direction; a tiny diagonal jitter keeps the Newton system
/// solvable. Stops at gradient norm [`GRAD_TOL`] or after 200 iterations,
/// returning the best iterate either way.
pub fn fit_mnl_ml(data: &Dataset<f64>, ridge: f64) -> Result<MlFit> {
    if data.n() == 0 {
        return Err(Error::InvalidParameter("cannot fit an empty training set".into()));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::Config(format!("ridge {ridge} must be non-negative")));
    }
    let (p, j) = (data.p(), data.n_classes());
    let dim = j * (p + 1);
    let mut theta = DVector::zeros(dim);
    let (mut f, mut g, mut h) = grad_hess(data, &theta, ridge);
    let mut iterations = 0;
    while g.norm() >= GRAD_TOL && iterations < MAX_ITER {
        iterations += 1;
        let mut jitter = 1e-10 * (1.0 + h.diagonal().max());
        let step = loop {
            let mut m = h.clone();
            for k in 0..dim {
                m[(k, k)] += jitter;
            }
            if let Some(chol) = m.cholesky() {
                break chol.solve(&g);
            }
            jitter *= 10.0;
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let cand = &theta + &step * t;
            let fc = ml_objective(data, &unpack(&cand, p, j), ridge);
            if fc.is_finite() && fc >= f {
                theta = cand;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
        (f, g, h) = grad_hess(data, &theta, ridge);
    }
    let grad_norm = g.norm();
    Ok(MlFit {
        coef: unpack(&theta, p, j),
        objective: f,
        grad_norm,
        iterations,
        converged: grad_norm < GRAD_TOL,
    })
}

/// Argmax class per row (lowest index on ties).
pub fn predict_mnl(coef: &MnlCoefficients<f64>, x: &Matrix<f64>) -> Vec<usize> {
    let mut scores = vec![0.0; coef.n_classes()];
    (0..x.rows())
        .map(|i| {
            coef.scores_into(x.row(i), &mut scores);
            let mut best = 0;
            for (k, &s) in scores.iter().enumerate() {
                if s > scores[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}
