use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::model::ClassHierarchy;
use crate::real::Real;

/// Class-level MNL coefficients: intercepts `alpha` (length `J`) and the
/// `p x J` coefficient matrix `beta`. No class is pinned to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct MnlCoefficients<F> {
    pub alpha: Vec<F>,
    pub beta: Matrix<F>,
}

impl<F: Real> MnlCoefficients<F> {
    pub fn zeros(p: usize, n_classes: usize) -> Self {
        Self {
            alpha: vec![F::zero(); n_classes],
            beta: Matrix::from_elem(p, n_classes, F::zero()),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.alpha.len()
    }

    pub fn p(&self) -> usize {
        self.beta.rows()
    }

    /// Writes the linear scores `alpha_j + x . beta_j` into `out`.
    #[inline]
    pub fn scores_into(&self, x: &[F], out: &mut [F]) {
        out.copy_from_slice(&self.alpha);
        for (l, &xl) in x.iter().enumerate() {
            if xl == F::zero() {
                continue;
            }
            for (o, &b) in out.iter_mut().zip(self.beta.row(l)) {
                *o = *o + xl * b;
            }
        }
    }

    /// Overwrites `out` with the class log probabilities at `x`.
    #[inline]
    pub fn log_probs_into(&self, x: &[F], out: &mut [F]) {
        self.scores_into(x, out);
        let max = out.iter().copied().fold(F::neg_infinity(), F::max);
        let mut sum = F::zero();
        for &s in out.iter() {
            sum = sum + (s - max).exp();
        }
        let norm = max + sum.ln();
        for o in out.iter_mut() {
            *o = *o - norm;
        }
    }

    pub(crate) fn compose_from(&mut self, hierarchy: &ClassHierarchy, phi: &Matrix<F>) {
        let p = self.p();
        for j in 0..self.n_classes() {
            let mut a = F::zero();
            for &b in hierarchy.path(j) {
                a = a + phi.get(b, 0);
            }
            self.alpha[j] = a;
            for l in 0..p {
                let mut s = F::zero();
                for &b in hierarchy.path(j) {
                    s = s + phi.get(b, l + 1);
                }
                self.beta.set(l, j, s);
            }
        }
    }
}

/// Parameters of one mixture component.
///
/// `phi` holds one row per branch of the expert's class tree (one row per
/// class for the flat MNL): column 0 is the intercept slot, columns `1..=p`
/// the covariate slots. `coef` caches the composed class coefficients and is
/// refreshed by [`ComponentParams::recompose`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct ComponentParams<F> {
    pub mu: Vec<F>,
    pub sigma: Vec<F>,
    pub phi: Matrix<F>,
    /// Local coefficient scale.
    pub nu: F,
    /// Local intercept scale.
    pub tau: F,
    pub coef: MnlCoefficients<F>,
}

impl<F: Real> ComponentParams<F> {
    pub fn new(
        mu: Vec<F>,
        sigma: Vec<F>,
        phi: Matrix<F>,
        nu: F,
        tau: F,
        hierarchy: &ClassHierarchy,
    ) -> Self {
        let mut coef = MnlCoefficients::zeros(mu.len(), hierarchy.n_classes());
        coef.compose_from(hierarchy, &phi);
        Self {
            mu,
            sigma,
            phi,
            nu,
            tau,
            coef,
        }
    }

    /// Builds a flat-MNL component straight from class coefficients.
    pub fn from_mnl(mu: Vec<F>, sigma: Vec<F>, alpha: &[F], beta: &Matrix<F>, nu: F, tau: F) -> Self {
        let (p, j) = (beta.rows(), beta.cols());
        let mut phi = Matrix::from_elem(j, p + 1, F::zero());
        for c in 0..j {
            phi.set(c, 0, alpha[c]);
            for l in 0..p {
                phi.set(c, l + 1, beta.get(l, c));
            }
        }
        Self::new(mu, sigma, phi, nu, tau, &ClassHierarchy::flat(j))
    }

    pub fn p(&self) -> usize {
        self.mu.len()
    }

    pub fn recompose(&mut self, hierarchy: &ClassHierarchy) {
        self.coef.compose_from(hierarchy, &self.phi);
    }

    /// Log density of the covariate vector, no validation.
    #[inline]
    pub fn covariate_log_density(&self, x: &[F]) -> F {
        let mut acc = F::zero();
        for ((&xl, &m), &s) in x.iter().zip(&self.mu).zip(&self.sigma) {
            let z = (xl - m) / s;
            acc = acc - s.ln() - z * z * F::lit(0.5);
        }
        acc - F::half_ln_2pi() * F::from_usize(x.len()).unwrap()
    }

    /// `ln F(y, x | theta)` using `scratch` (length `J`) as workspace.
    #[inline]
    pub fn log_joint(&self, x: &[F], y: usize, scratch: &mut [F]) -> F {
        self.coef.log_probs_into(x, scratch);
        self.covariate_log_density(x) + scratch[y]
    }
}
