use crate::real::Real;

/// Largest coordinatewise discrepancy between the analytic gradient and
/// central finite differences with step `h`, each measured relative to
/// `max(1, |analytic|, |numeric|)`.
pub fn check_gradient<F: Real, G>(mut target: G, x: &[F], h: F) -> F
where
    G: FnMut(&[F]) -> (F, Vec<F>),
{
    let (_, analytic) = target(x);
    let two = F::lit(2.0);
    let mut probe = x.to_vec();
    let mut worst = F::zero();
    for k in 0..x.len() {
        probe[k] = x[k] + h;
        let up = target(&probe).0;
        probe[k] = x[k] - h;
        let down = target(&probe).0;
        probe[k] = x[k];
        let numeric = (up - down) / (two * h);
        let denom = F::one().max(analytic[k].abs()).max(numeric.abs());
        worst = worst.max((numeric - analytic[k]).abs() / denom);
    }
    worst
}
