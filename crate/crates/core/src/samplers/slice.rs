use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::samplers::RngStream;

/// Tuning for the univariate slice sampler.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceConfig {
    /// Initial interval width `w`.
    pub width: f64,
    /// Cap `m` on the total number of width-`w` steps taken while stepping
    /// out (the interval spans at most `m * w`).
    pub max_steps: usize,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self {
            width: 1.0,
            max_steps: 20,
        }
    }
}

impl SliceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::Config(format!("slice width {} must be positive", self.width)));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("slice max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SliceDraw<F> {
    pub x: F,
    /// Log height of the slice the draw was taken from.
    pub level: F,
    /// `log_pdf(x)`, always `>= level`.
    pub log_pdf: F,
    pub evaluations: usize,
}

/// One transition of the univariate slice sampler: a uniform level under
/// `log_pdf(x0)`, stepping out by `width` (at most `max_steps` steps split
/// randomly between the two sides), then shrinkage sampling inside the
/// interval.
pub fn slice_sample_step<F: Real>(
    mut log_pdf: impl FnMut(F) -> F,
    x0: F,
    cfg: &SliceConfig,
    rng: &mut RngStream,
) -> Result<SliceDraw<F>> {
    let mut evaluations = 0usize;
    let mut eval = |x: F| -> Result<F> {
        evaluations += 1;
        let v = log_pdf(x);
        if v.is_nan() {
            return Err(Error::NonFinite(format!("log density is NaN at x = {x}")));
        }
        Ok(v)
    };

    let f0 = eval(x0)?;
    if !f0.is_finite() {
        return Err(Error::NonFinite(format!(
            "slice sampler started where the log density is {f0} (x = {x0})"
        )));
    }
    let level = f0 - F::lit(rng.exp1());
    let w = F::lit(cfg.width);

    let mut left = x0 - w * F::lit(rng.uniform());
    let mut right = left + w;
    let mut steps_left = (cfg.max_steps as f64 * rng.uniform()).floor() as usize;
    let mut steps_right = cfg.max_steps - 1 - steps_left;
    while steps_left > 0 && level < eval(left)? {
        left = left - w;
        steps_left -= 1;
    }
    while steps_right > 0 && level < eval(right)? {
        right = right + w;
        steps_right -= 1;
    }

    loop {
        let x1 = left + F::lit(rng.uniform()) * (right - left);
        let f1 = eval(x1)?;
        if f1 >= level {
            return Ok(SliceDraw {
                x: x1,
                level,
                log_pdf: f1,
                evaluations,
            });
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
        if !(right > left) {
            // Interval collapsed onto x0 in floating point.
            return Ok(SliceDraw {
                x: x0,
                level,
                log_pdf: f0,
                evaluations,
            });
        }
    }
}
