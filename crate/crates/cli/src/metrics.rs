use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use dpmnl::model::ClassHierarchy;
use dpmnl::{Error, Result};

/// Confusion counts for one class: `a` correctly assigned to it, `b`
/// wrongly assigned to it, `c` belonging to it but assigned elsewhere.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    /// Percent.
    pub accuracy: f64,
    /// Macro F1 in percent: mean over classes of `2a / (2a + b + c)`, with
    /// a class whose denominator is zero contributing 0.
    pub f1: f64,
    /// Percent, after mapping both labels to their parent node.
    pub parent_accuracy: Option<f64>,
    pub per_class: Vec<ClassCounts>,
}

/// Scores zero-based predictions against zero-based truth.
pub fn evaluate(
    predicted: &[usize],
    truth: &[usize],
    n_classes: usize,
    hierarchy: Option<&ClassHierarchy>,
) -> Result<MetricsReport> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} cases",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidParameter("nothing to evaluate".into()));
    }
    if let Some(&bad) = predicted.iter().chain(truth).find(|&&y| y >= n_classes) {
        return Err(Error::InvalidParameter(format!("label {} outside 1..={n_classes}", bad + 1)));
    }
    let mut per_class = vec![ClassCounts::default(); n_classes];
    let mut correct = 0;
    for (&p, &t) in predicted.iter().zip(truth) {
        if p == t {
            per_class[p].a += 1;
            correct += 1;
        } else {
            per_class[p].b += 1;
            per_class[t].c += 1;
        }
    }
    let n = truth.len();
    let f1 = per_class
        .iter()
        .map(|k| {
            let denom = 2 * k.a + k.b + k.c;
            if denom == 0 {
                0.0
            } else {
                2.0 * k.a as f64 / denom as f64
            }
        })
        .sum::<f64>()
        / n_classes as f64;
    let parent_accuracy = match hierarchy {
        Some(h) => {
            if h.n_classes() != n_classes {
                return Err(Error::Hierarchy(format!(
                    "hierarchy has {} leaves for {n_classes} classes",
                    h.n_classes()
                )));
            }
            let hits = predicted
                .iter()
                .zip(truth)
                .filter(|(&p, &t)| h.parent_of(p) == h.parent_of(t))
                .count();
            Some(100.0 * hits as f64 / n as f64)
        }
        None => None,
    };
    Ok(MetricsReport {
        n,
        accuracy: 100.0 * correct as f64 / n as f64,
        f1: 100.0 * f1,
        parent_accuracy,
        per_class,
    })
}

/// The most frequent training label, smallest label on ties.
pub fn majority_class(train_labels: &[usize], n_classes: usize) -> Result<usize> {
    if train_labels.is_empty() {
        return Err(Error::InvalidParameter("empty training set".into()));
    }
    let mut counts = vec![0usize; n_classes];
    for &y in train_labels {
        if y >= n_classes {
            return Err(Error::InvalidParameter(format!("label {} outside 1..={n_classes}", y + 1)));
        }
        counts[y] += 1;
    }
    let mut best = 0;
    for (j, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = j;
        }
    }
    Ok(best)
}

/// Predicts the training mode for every test case and scores it.
pub fn baseline_majority(
    train_labels: &[usize],
    test_labels: &[usize],
    n_classes: usize,
    hierarchy: Option<&ClassHierarchy>,
) -> Result<MetricsReport> {
    let mode = majority_class(train_labels, n_classes)?;
    evaluate(&vec![mode; test_labels.len()], test_labels, n_classes, hierarchy)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// Paired t-test of `a - b`: a one-sample t-test on the differences.
/// `None` with fewer than two pairs.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<Option<PairedTTest>> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {} paired values", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Ok(None);
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let (t, p_value) = if se == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean / se;
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        (t, 2.0 * (1.0 - dist.cdf(t.abs())))
    };
    Ok(Some(PairedTTest {
        n,
        mean_diff: mean,
        t,
        p_value,
    }))
}

/// Mean and sample standard deviation (`None` for fewer than two values).
pub fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Some(var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 2, 1];
        let m = evaluate(&y, &y, 3, None).unwrap();
        assert_eq!(m.accuracy, 100.0);
        assert_eq!(m.f1, 100.0);
    }

    #[test]
    fn hand_counted_two_class_case() {
        // Class 1: A=3, B=1, C=2. Class 2: A=3, B=2, C=1.
        let truth = [0, 0, 0, 0, 0, 1, 1, 1, 1];
        let pred = [0, 0, 0, 1, 1, 1, 1, 1, 0];
        let m = evaluate(&pred, &truth, 2, None).unwrap();
        assert_eq!(m.per_class[0], ClassCounts { a: 3, b: 1, c: 2 });
        assert_eq!(m.per_class[1], ClassCounts { a: 3, b: 2, c: 1 });
        assert!((m.accuracy - 66.67).abs() < 5e-3);
        assert!((m.f1 - 66.67).abs() < 5e-3);
    }

    #[test]
    fn constant_prediction_on_balanced_truth() {
        let truth: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let m = evaluate(&[2; 40], &truth, 4, None).unwrap();
        assert_eq!(m.accuracy, 25.0);
        // Only class 3 has a non-zero term: 2*10 / (20 + 30 + 0).
        assert!((m.f1 - 100.0 * 0.4 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn empty_class_contributes_zero() {
        let m = evaluate(&[0, 1], &[0, 1], 3, None).unwrap();
        assert!((m.f1 - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn parent_accuracy() {
        let a = vec!["left".to_string()];
        let b = vec!["right".to_string()];
        let h = ClassHierarchy::from_leaf_paths(4, &[a.clone(), a, b.clone(), b]).unwrap();
        let m = evaluate(&[1, 2, 3, 0], &[0, 3, 3, 1], 4, Some(&h)).unwrap();
        assert_eq!(m.accuracy, 25.0);
        assert_eq!(m.parent_accuracy, Some(100.0));
    }

    #[test]
    fn majority_rules() {
        assert_eq!(majority_class(&[0, 0, 1], 2).unwrap(), 0);
        assert_eq!(majority_class(&[1, 2, 2, 1, 0], 4).unwrap(), 1);
        let truth: Vec<usize> = (0..8).map(|i| i % 4).collect();
        assert_eq!(baseline_majority(&[3, 3, 1], &truth, 4, None).unwrap().accuracy, 25.0);
        assert!(majority_class(&[], 2).is_err());
    }

    #[test]
    fn three_point_t_test() {
        // Differences 1, 2, 3: mean 2, sd 1, t = 2 sqrt(3), df 2. For df = 2
        // the CDF is 1/2 + t / (2 sqrt(2 + t^2)).
        let t = paired_t_test(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).unwrap().unwrap();
        let t_hand = 2.0 * 3.0_f64.sqrt();
        assert!((t.t - t_hand).abs() < 1e-12);
        let cdf = 0.5 + t_hand / (2.0 * (2.0 + t_hand * t_hand).sqrt());
        assert!((t.p_value - 2.0 * (1.0 - cdf)).abs() < 1e-9);
        assert!((t.p_value - 0.0742).abs() < 1e-4);
        assert!(paired_t_test(&[1.0], &[0.0]).unwrap().is_none());
    }

    #[test]
    fn mean_and_sd() {
        assert_eq!(mean_sd(&[3.0]), (3.0, None));
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s.unwrap() - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn permutation_invariant(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..40), seed in 0u64..1000) {
            let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            order.sort_by_key(|&i| (i as u64).wrapping_mul(seed.wrapping_add(0x9E37_79B9)) % 1009);
            let p2: Vec<usize> = order.iter().map(|&i| pred[i]).collect();
            let t2: Vec<usize> = order.iter().map(|&i| truth[i]).collect();
            prop_assert_eq!(evaluate(&pred, &truth, 4, None).unwrap(), evaluate(&p2, &t2, 4, None).unwrap());
        }

        #[test]
        fn correct_count_matches(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..40)) {
            let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let m = evaluate(&pred, &truth, 4, None).unwrap();
            let a: usize = m.per_class.iter().map(|k| k.a).sum();
            prop_assert!((100.0 * a as f64 / m.n as f64 - m.accuracy).abs() < 1e-12);
            prop_assert!(m.f1 >= 0.0 && m.f1 <= 100.0);
        }
    }
}
