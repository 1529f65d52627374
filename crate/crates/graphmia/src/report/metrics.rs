//! Binary attack metrics, overfitting measurement, and Spearman rank
//! correlation.

use super::EvalError;
use crate::engine::{evaluate_accuracy, EngineError, TrainedModel};
use crate::graph::Dataset;

/// Precision, recall, and F1 with "member" as the positive class.
///
/// Zero-denominator precision or recall is 0, and F1 is 0 whenever
/// `precision + recall` is 0.
pub fn attack_metrics(
    predicted: &[bool],
    actual: &[bool],
) -> Result<(f64, f64, f64), EvalError> {
    if predicted.len() != actual.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok((precision, recall, f1))
}

/// Overfitting level: training accuracy minus test accuracy.
pub fn train_test_gap(
    model: &TrainedModel,
    train: &Dataset,
    test: &Dataset,
) -> Result<f64, EngineError> {
    Ok(evaluate_accuracy(model, train)? - evaluate_accuracy(model, test)?)
}

/// Ranks with ties averaged, 1-based.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share the average
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
///
/// Requires at least 3 points; a constant series makes the coefficient
/// undefined and is reported as an error rather than a silent zero.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch {
            predicted: xs.len(),
            actual: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(EvalError::TooFewPoints { len: xs.len() });
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut num = 0.0;
    let mut den_x = 0.0;
    let mut den_y = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mean) * (b - mean);
        den_x += (a - mean) * (a - mean);
        den_y += (b - mean) * (b - mean);
    }
    if den_x == 0.0 || den_y == 0.0 {
        return Err(EvalError::ConstantSeries);
    }
    Ok(num / (den_x * den_y).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_correct_gives_ones() {
        let labels = [true, false, true, false];
        let (p, r, f1) = attack_metrics(&labels, &labels).unwrap();
        assert_eq!((p, r, f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn all_member_on_balanced_set() {
        let predicted = [true; 10];
        let actual: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        let (p, r, f1) = attack_metrics(&predicted, &actual).unwrap();
        assert_eq!(p, 0.5);
        assert_eq!(r, 1.0);
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn all_non_member_hits_zero_denominator_rule() {
        let predicted = [false; 6];
        let actual = [true, false, true, false, true, false];
        let (p, r, f1) = attack_metrics(&predicted, &actual).unwrap();
        assert_eq!((p, r, f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(matches!(
            attack_metrics(&[true], &[true, false]),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert!(matches!(attack_metrics(&[], &[]), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn spearman_monotone_series() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let up = [2.0, 4.0, 8.0, 16.0, 32.0];
        let down = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&xs, &up).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&xs, &down).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_hand_computed_example() {
        // d = (1, -1, 1, -1): 1 - 6*4/(4*15) = 0.6
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 1.0, 4.0, 3.0];
        assert!((spearman(&xs, &ys).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn spearman_handles_ties_with_average_ranks() {
        let xs = [1.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 2.0, 3.0, 4.0];
        let rho = spearman(&xs, &ys).unwrap();
        // ranks x = (1.5, 1.5, 3, 4); Pearson of ranks ~ 0.9487
        assert!((rho - 0.9486832980505138).abs() < 1e-9);
    }

    #[test]
    fn spearman_errors_on_constant_or_short_series() {
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(EvalError::ConstantSeries)
        ));
        assert!(matches!(
            spearman(&[1.0, 2.0], &[1.0, 2.0]),
            Err(EvalError::TooFewPoints { len: 2 })
        ));
    }
}
