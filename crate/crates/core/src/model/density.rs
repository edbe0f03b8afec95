use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{ComponentParams, MnlCoefficients};
use crate::real::Real;

#[inline]
pub fn normal_log_density<F: Real>(x: F, mean: F, sd: F) -> F {
    let z = (x - mean) / sd;
    -F::half_ln_2pi() - sd.ln() - z * z * F::lit(0.5)
}

fn check_finite<F: Real>(what: &str, values: &[F]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::NonFinite(format!("{what}[{k}] = {}", values[k]))),
        None => Ok(()),
    }
}

/// Log of `softmax(alpha_j + x . beta_j)` over the `J` classes.
///
/// `beta` is `p x J`. Max-subtraction keeps the result finite for large
/// scores.
pub fn mnl_class_log_probs<F: Real>(x: &[F], alpha: &[F], beta: &Matrix<F>) -> Result<Vec<F>> {
    if beta.rows() != x.len() || beta.cols() != alpha.len() {
        return Err(Error::Shape(format!(
            "x has {} entries, alpha {}, beta is {}x{}",
            x.len(),
            alpha.len(),
            beta.rows(),
            beta.cols()
        )));
    }
    if alpha.is_empty() {
        return Err(Error::Shape("no classes".into()));
    }
    check_finite("x", x)?;
    check_finite("alpha", alpha)?;
    check_finite("beta", beta.as_slice())?;
    let coef = MnlCoefficients {
        alpha: alpha.to_vec(),
        beta: beta.clone(),
    };
    let mut out = vec![F::zero(); alpha.len()];
    coef.log_probs_into(x, &mut out);
    Ok(out)
}

/// Sum of independent normal log densities, one per covariate.
pub fn gaussian_covariate_log_density<F: Real>(x: &[F], mu: &[F], sigma: &[F]) -> Result<F> {
    if x.len() != mu.len() || x.len() != sigma.len() {
        return Err(Error::Shape(format!(
            "x has {} entries, mu {}, sigma {}",
            x.len(),
            mu.len(),
            sigma.len()
        )));
    }
    if let Some(l) = sigma.iter().position(|&s| !(s > F::zero())) {
        return Err(Error::InvalidParameter(format!(
            "sigma[{l}] = {} must be positive",
            sigma[l]
        )));
    }
    Ok(x.iter()
        .zip(mu)
        .zip(sigma)
        .map(|((&xl, &m), &s)| normal_log_density(xl, m, s))
        .sum())
}

/// `ln P(x) + ln P(y | x)` under one component. `y` is zero-based.
pub fn joint_log_density<F: Real>(x: &[F], y: usize, theta: &ComponentParams<F>) -> Result<F> {
    if y >= theta.coef.n_classes() {
        return Err(Error::InvalidParameter(format!(
            "label {} outside 1..={}",
            y + 1,
            theta.coef.n_classes()
        )));
    }
    let cov = gaussian_covariate_log_density(x, &theta.mu, &theta.sigma)?;
    let lp = mnl_class_log_probs(x, &theta.coef.alpha, &theta.coef.beta)?;
    Ok(cov + lp[y])
}
