use crate::error::{Error, Result};
use crate::real::Real;

/// Chinese-restaurant-process probabilities for one customer given the
/// occupancy of the other `n_minus` customers.
///
/// Returns one probability per existing component followed by the
/// probability of opening a new one.
pub fn crp_assignment_probs<F: Real>(counts: &[usize], gamma: F, n_minus: usize) -> Result<Vec<F>> {
    if !(gamma > F::zero()) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be positive")));
    }
    let total: usize = counts.iter().sum();
    if total != n_minus {
        return Err(Error::InvalidParameter(format!(
            "counts sum to {total}, expected {n_minus}"
        )));
    }
    let denom = F::from_usize(n_minus).unwrap() + gamma;
    let mut out: Vec<F> = counts
        .iter()
        .map(|&c| F::from_usize(c).unwrap() / denom)
        .collect();
    out.push(gamma / denom);
    Ok(out)
}

/// Finite-mixture counterpart with `n_components` symmetric Dirichlet
/// components: `(n_c + gamma / C) / (n_minus + gamma)` for each of the `C`
/// components (unlisted components have count zero).
pub fn crp_finite_assignment_probs<F: Real>(
    counts: &[usize],
    gamma: F,
    n_components: usize,
) -> Result<Vec<F>> {
    if !(gamma > F::zero()) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be positive")));
    }
    if counts.len() > n_components {
        return Err(Error::InvalidParameter(format!(
            "{} occupied components exceed C = {n_components}",
            counts.len()
        )));
    }
    let n_minus: usize = counts.iter().sum();
    let denom = F::from_usize(n_minus).unwrap() + gamma;
    let share = gamma / F::from_usize(n_components).unwrap();
    Ok((0..n_components)
        .map(|c| (F::from_usize(counts.get(c).copied().unwrap_or(0)).unwrap() + share) / denom)
        .collect())
}

/// Log probability of a set partition of `n` items under the CRP:
/// `gamma^K prod_k (|B_k| - 1)! / prod_{i<n} (i + gamma)`.
///
/// `blocks[i]` is an arbitrary block identifier for item `i`.
pub fn crp_partition_log_prob<F: Real>(blocks: &[usize], gamma: F) -> F {
    let mut sizes: Vec<(usize, usize)> = Vec::new();
    for &b in blocks {
        match sizes.iter_mut().find(|(id, _)| *id == b) {
            Some((_, size)) => *size += 1,
            None => sizes.push((b, 1)),
        }
    }
    let mut acc = F::from_usize(sizes.len()).unwrap() * gamma.ln();
    for &(_, size) in &sizes {
        for k in 1..size {
            acc = acc + F::from_usize(k).unwrap().ln();
        }
    }
    for i in 0..blocks.len() {
        acc = acc - (F::from_usize(i).unwrap() + gamma).ln();
    }
    acc
}

/// Every set partition of `0..n` as a restricted-growth string
/// (`a[0] = 0`, `a[i] <= 1 + max(a[..i])`), in lexicographic order.
pub fn enumerate_set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, n: usize, max: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let limit = if prefix.is_empty() { 0 } else { max + 1 };
        for b in 0..=limit {
            prefix.push(b);
            extend(prefix, n, max.max(b), out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(n), n, 0, &mut out);
    out
}

/// Canonical restricted-growth relabelling of a block assignment.
pub fn canonical_partition(blocks: &[usize]) -> Vec<usize> {
    let mut seen: Vec<usize> = Vec::new();
    blocks
        .iter()
        .map(|b| match seen.iter().position(|s| s == b) {
            Some(k) => k,
            None => {
                seen.push(*b);
                seen.len() - 1
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_substitution() {
        let p = crp_assignment_probs(&[3, 1], 2.0_f64, 4).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((p[2] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn first_customer_opens_new_table() {
        let p = crp_assignment_probs::<f64>(&[], 0.7, 0).unwrap();
        assert_eq!(p, vec![1.0]);
    }

    #[test]
    fn rejects_inconsistent_counts() {
        assert!(crp_assignment_probs(&[3, 1], 2.0_f64, 5).is_err());
        assert!(crp_assignment_probs(&[3, 1], 0.0_f64, 4).is_err());
    }

    #[test]
    fn finite_mixture_substitution() {
        let p = crp_finite_assignment_probs(&[3, 1], 2.0_f64, 2).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn finite_mixture_converges_to_crp() {
        let counts = [3, 1];
        let c = 1_000_000;
        let finite = crp_finite_assignment_probs(&counts, 2.0_f64, c).unwrap();
        let limit = crp_assignment_probs(&counts, 2.0_f64, 4).unwrap();
        assert!((finite[0] - limit[0]).abs() < 1e-5);
        assert!((finite[1] - limit[1]).abs() < 1e-5);
        let new_mass: f64 = finite[2..].iter().sum();
        assert!((new_mass - limit[2]).abs() < 1e-5);
    }

    #[test]
    fn sequential_product_for_three_together() {
        // 1 * (1/2) * (2/3)
        let lp = crp_partition_log_prob(&[0, 0, 0], 1.0_f64);
        assert!((lp.exp() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(crp_partition_log_prob(&[5], 2.0_f64), 0.0);
    }

    #[test]
    fn bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52, 203];
        for (n, &b) in bell.iter().enumerate() {
            assert_eq!(enumerate_set_partitions(n).len(), b);
        }
    }

    #[test]
    fn partition_law_normalises() {
        for n in 1..=6 {
            for gamma in [0.1_f64, 1.0, 10.0] {
                let total: f64 = enumerate_set_partitions(n)
                    .iter()
                    .map(|p| crp_partition_log_prob(p, gamma).exp())
                    .sum();
                assert!((total - 1.0).abs() < 1e-12, "n={n} gamma={gamma} total={total}");
            }
        }
    }

    #[test]
    fn partition_law_matches_sequential_conditionals() {
        // Seat customers in order and multiply the conditional probabilities.
        for part in enumerate_set_partitions(5) {
            let mut counts: Vec<usize> = Vec::new();
            let mut prob = 1.0_f64;
            for (i, &b) in part.iter().enumerate() {
                let probs = crp_assignment_probs(&counts, 1.5, i).unwrap();
                if b < counts.len() {
                    prob *= probs[b];
                    counts[b] += 1;
                } else {
                    prob *= probs[counts.len()];
                    counts.push(1);
                }
            }
            assert!((crp_partition_log_prob(&part, 1.5_f64).exp() - prob).abs() < 1e-14);
        }
    }

    #[test]
    fn canonical_labels() {
        assert_eq!(canonical_partition(&[7, 3, 7, 9]), vec![0, 1, 0, 2]);
    }
}
