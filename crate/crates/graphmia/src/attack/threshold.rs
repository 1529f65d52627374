//! Threshold-based attack: scalar confidence metrics over posteriors,
//! threshold selection from shadow-side value distributions, and the
//! membership decision.
//!
//! Ground-truth labels never enter these metrics: the reference one-hot
//! vector always sits at the posterior's own argmax, so the attack works
//! from query responses alone. Thresholds are selected on the shadow split,
//! never on target data.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AttackError;
use crate::engine::{EngineError, Posterior, TrainedModel};
use crate::graph::Graph;

/// Which side of the threshold looks like a member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Larger values indicate membership (highest confidence score).
    HigherIsMember,
    /// Smaller values indicate membership (losses and distances).
    LowerIsMember,
}

/// Scalar confidence metrics computed from one posterior `p` with reference
/// one-hot `y` at `argmax(p)` (lowest-index tie break):
///
/// - `HighestScore`: `max_i p_i`
/// - `CrossEntropy`: `-ln(exp(max_i p_i) / sum_j exp(p_j))`, applied to the
///   posterior entries exactly as written
/// - `Mse`: `sqrt(sum_i (p_i - y_i)^2)`, the Euclidean distance to `y`
/// - `Cityblock`: `sum_i |p_i - y_i|`
/// - `Canberra`: `sum_i |p_i - y_i| / |p_i + y_i|`, with 0/0 terms read as 0
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfidenceMetric {
    HighestScore,
    CrossEntropy,
    Mse,
    Cityblock,
    Canberra,
}

impl ConfidenceMetric {
    pub const ALL: [ConfidenceMetric; 5] = [
        ConfidenceMetric::HighestScore,
        ConfidenceMetric::CrossEntropy,
        ConfidenceMetric::Mse,
        ConfidenceMetric::Cityblock,
        ConfidenceMetric::Canberra,
    ];

    pub fn orientation(&self) -> Orientation {
        match self {
            ConfidenceMetric::HighestScore => Orientation::HigherIsMember,
            _ => Orientation::LowerIsMember,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConfidenceMetric::HighestScore => "highest-score",
            ConfidenceMetric::CrossEntropy => "cross-entropy",
            ConfidenceMetric::Mse => "mse",
            ConfidenceMetric::Cityblock => "cityblock",
            ConfidenceMetric::Canberra => "canberra",
        }
    }
}

impl std::str::FromStr for ConfidenceMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "highest-score" | "highest" | "max" => Ok(ConfidenceMetric::HighestScore),
            "cross-entropy" | "crossentropy" | "ce" => Ok(ConfidenceMetric::CrossEntropy),
            "mse" => Ok(ConfidenceMetric::Mse),
            "cityblock" | "manhattan" => Ok(ConfidenceMetric::Cityblock),
            "canberra" => Ok(ConfidenceMetric::Canberra),
            other => Err(format!("unknown confidence metric {other:?}")),
        }
    }
}

/// Evaluate one confidence metric on a posterior.
pub fn metric_value(metric: ConfidenceMetric, p: &Posterior) -> f64 {
    let probs = p.probs();
    let predicted = p.argmax();
    match metric {
        ConfidenceMetric::HighestScore => probs[predicted],
        ConfidenceMetric::CrossEntropy => {
            let sum_exp: f64 = probs.iter().map(|&x| x.exp()).sum();
            -(probs[predicted].exp() / sum_exp).ln()
        }
        ConfidenceMetric::Mse => {
            let mut sum = 0.0;
            for (i, &x) in probs.iter().enumerate() {
                let y = if i == predicted { 1.0 } else { 0.0 };
                sum += (x - y) * (x - y);
            }
            sum.sqrt()
        }
        ConfidenceMetric::Cityblock => {
            let mut sum = 0.0;
            for (i, &x) in probs.iter().enumerate() {
                let y = if i == predicted { 1.0 } else { 0.0 };
                sum += (x - y).abs();
            }
            sum
        }
        ConfidenceMetric::Canberra => {
            let mut sum = 0.0;
            for (i, &x) in probs.iter().enumerate() {
                let y = if i == predicted { 1.0 } else { 0.0 };
                let denom = (x + y).abs();
                if denom > 0.0 {
                    sum += (x - y).abs() / denom;
                }
            }
            sum
        }
    }
}

/// What the attacker optimized when picking the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdObjective {
    /// Scan candidate thresholds and keep the best F1 on the shadow values.
    MaxF1,
    /// Precision-oriented pick: the stated quantile of the member values.
    PrecisionQuantile(f64),
    /// Recall-oriented pick: the stated quantile of the member values.
    RecallQuantile(f64),
}

/// A fully determined decision rule for [`threshold_attack`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub metric: ConfidenceMetric,
    pub threshold: f64,
    pub objective: ThresholdObjective,
}

/// Member-side test for one value: boundary values count as member.
fn on_member_side(orientation: Orientation, threshold: f64, value: f64) -> bool {
    match orientation {
        Orientation::HigherIsMember => value >= threshold,
        Orientation::LowerIsMember => value <= threshold,
    }
}

fn f1_at(
    orientation: Orientation,
    threshold: f64,
    member: &[f64],
    non_member: &[f64],
) -> f64 {
    let tp = member
        .iter()
        .filter(|&&v| on_member_side(orientation, threshold, v))
        .count();
    let fp = non_member
        .iter()
        .filter(|&&v| on_member_side(orientation, threshold, v))
        .count();
    let fn_ = member.len() - tp;
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
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Candidate thresholds for the max-F1 scan: midpoints between consecutive
/// distinct values of the pooled sorted list, plus one candidate beyond each
/// extreme (the two degenerate classifiers).
pub(crate) fn candidate_thresholds(member: &[f64], non_member: &[f64]) -> Vec<f64> {
    let mut pooled: Vec<f64> = member.iter().chain(non_member).copied().collect();
    pooled.sort_by(|a, b| a.partial_cmp(b).expect("metric values are finite"));
    pooled.dedup();
    let mut candidates = Vec::with_capacity(pooled.len() + 1);
    candidates.push(pooled[0] - 1.0);
    for pair in pooled.windows(2) {
        candidates.push(0.5 * (pair[0] + pair[1]));
    }
    candidates.push(pooled[pooled.len() - 1] + 1.0);
    candidates
}

/// Choose a threshold from shadow member/non-member metric values.
///
/// The max-F1 objective scans the candidate midpoints and both outward
/// extremes, breaking F1 ties toward the stricter (more precise) threshold.
/// Quantile objectives take the stated quantile of the member values
/// (linear interpolation); the objective only records the attacker's intent.
pub fn select_threshold(
    values_member: &[f64],
    values_non_member: &[f64],
    metric: ConfidenceMetric,
    objective: ThresholdObjective,
) -> Result<ThresholdRule, AttackError> {
    if values_member.is_empty() || values_non_member.is_empty() {
        return Err(AttackError::EmptyValues);
    }
    for &v in values_member.iter().chain(values_non_member) {
        if !v.is_finite() {
            return Err(AttackError::NonFiniteValue { value: v });
        }
    }
    let orientation = metric.orientation();
    let threshold = match objective {
        ThresholdObjective::MaxF1 => {
            let candidates = candidate_thresholds(values_member, values_non_member);
            let mut best = candidates[0];
            let mut best_f1 = f1_at(orientation, best, values_member, values_non_member);
            for &t in &candidates[1..] {
                let f1 = f1_at(orientation, t, values_member, values_non_member);
                let stricter = match orientation {
                    Orientation::HigherIsMember => t > best,
                    Orientation::LowerIsMember => t < best,
                };
                if f1 > best_f1 || (f1 == best_f1 && stricter) {
                    best_f1 = f1;
                    best = t;
                }
            }
            best
        }
        ThresholdObjective::PrecisionQuantile(q) | ThresholdObjective::RecallQuantile(q) => {
            if !(0.0..=1.0).contains(&q) {
                return Err(AttackError::InvalidQuantile { q });
            }
            let mut sorted = values_member.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            let pos = q * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        }
    };
    Ok(ThresholdRule {
        metric,
        threshold,
        objective,
    })
}

/// Decide membership for one graph: query the target, evaluate the rule's
/// metric, and compare against the threshold with the boundary counting as
/// member.
pub fn threshold_attack(
    rule: &ThresholdRule,
    target: &TrainedModel,
    g: &Graph,
) -> Result<bool, EngineError> {
    let posterior = target.forward(g)?;
    let value = metric_value(rule.metric, &posterior);
    Ok(on_member_side(rule.metric.orientation(), rule.threshold, value))
}

/// Export metric values as CSV `metric,value,membership` for threshold
/// histograms (membership is `member` or `non_member`).
pub fn write_metric_distribution_csv(
    metric: ConfidenceMetric,
    values_member: &[f64],
    values_non_member: &[f64],
    path: &Path,
) -> Result<(), AttackError> {
    let mut out = String::from("metric,value,membership\n");
    for (values, tag) in [(values_member, "member"), (values_non_member, "non_member")] {
        for v in values {
            let _ = writeln!(out, "{},{v},{tag}", metric.name());
        }
    }
    crate::io_util::write_atomic(path, out.as_bytes()).map_err(|e| AttackError::CheckpointIo {
        path: path.display().to_string(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn posterior(v: &[f64]) -> Posterior {
        Posterior::new(v.to_vec()).unwrap()
    }

    #[test]
    fn metric_hand_computations() {
        let half = posterior(&[0.5, 0.5]);
        assert!((metric_value(ConfidenceMetric::CrossEntropy, &half) - 2f64.ln()).abs() < 1e-12);

        let uniform10 = posterior(&[0.1; 10]);
        assert!(
            (metric_value(ConfidenceMetric::CrossEntropy, &uniform10) - 10f64.ln()).abs() < 1e-12
        );

        let p = posterior(&[0.1, 0.7, 0.2]);
        assert_eq!(metric_value(ConfidenceMetric::HighestScore, &p), 0.7);

        let p = posterior(&[0.6, 0.4]);
        assert!((metric_value(ConfidenceMetric::Mse, &p) - 0.32f64.sqrt()).abs() < 1e-12);
        assert!((metric_value(ConfidenceMetric::Cityblock, &p) - 0.8).abs() < 1e-12);
        assert!((metric_value(ConfidenceMetric::Canberra, &p) - 1.25).abs() < 1e-12);

        let onehot = posterior(&[1.0, 0.0]);
        assert_eq!(metric_value(ConfidenceMetric::Cityblock, &onehot), 0.0);
        assert_eq!(metric_value(ConfidenceMetric::Canberra, &onehot), 0.0);
    }

    #[test]
    fn perfect_separation_yields_f1_one() {
        let rule = select_threshold(
            &[0.1, 0.2],
            &[0.8, 0.9],
            ConfidenceMetric::CrossEntropy,
            ThresholdObjective::MaxF1,
        )
        .unwrap();
        assert!(rule.threshold > 0.2 && rule.threshold < 0.8);
        assert_eq!(
            f1_at(Orientation::LowerIsMember, rule.threshold, &[0.1, 0.2], &[0.8, 0.9]),
            1.0
        );
    }

    #[test]
    fn identical_distributions_cap_f1_at_two_thirds() {
        let values = [0.3, 0.5, 0.7, 0.9];
        let rule = select_threshold(
            &values,
            &values,
            ConfidenceMetric::Mse,
            ThresholdObjective::MaxF1,
        )
        .unwrap();
        let f1 = f1_at(Orientation::LowerIsMember, rule.threshold, &values, &values);
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12);
        // predict-all-member extreme: everything at or below max+1
        assert!(rule.threshold > 0.9);
    }

    #[test]
    fn threshold_boundary_counts_as_member() {
        assert!(on_member_side(Orientation::HigherIsMember, 0.9, 0.9));
        assert!(on_member_side(Orientation::HigherIsMember, 0.9, 0.95));
        assert!(!on_member_side(Orientation::HigherIsMember, 0.9, 0.85));
        assert!(on_member_side(Orientation::LowerIsMember, 0.65, 0.65));
        assert!(!on_member_side(Orientation::LowerIsMember, 0.65, 0.70));
    }

    #[test]
    fn quantile_objectives_pick_member_quantiles() {
        let member = [1.0, 2.0, 3.0, 4.0, 5.0];
        let rule = select_threshold(
            &member,
            &[9.0],
            ConfidenceMetric::CrossEntropy,
            ThresholdObjective::RecallQuantile(0.5),
        )
        .unwrap();
        assert_eq!(rule.threshold, 3.0);
        let rule = select_threshold(
            &member,
            &[9.0],
            ConfidenceMetric::CrossEntropy,
            ThresholdObjective::PrecisionQuantile(0.25),
        )
        .unwrap();
        assert_eq!(rule.threshold, 2.0);
        assert!(matches!(
            select_threshold(
                &member,
                &[9.0],
                ConfidenceMetric::CrossEntropy,
                ThresholdObjective::RecallQuantile(1.5),
            ),
            Err(AttackError::InvalidQuantile { .. })
        ));
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(matches!(
            select_threshold(
                &[],
                &[1.0],
                ConfidenceMetric::Mse,
                ThresholdObjective::MaxF1
            ),
            Err(AttackError::EmptyValues)
        ));
    }

    #[test]
    fn tie_break_prefers_stricter_threshold() {
        // single overlapping value: every candidate gives the same F1 for
        // these degenerate inputs, so the strict extreme must win
        let rule = select_threshold(
            &[0.5],
            &[0.5],
            ConfidenceMetric::HighestScore,
            ThresholdObjective::MaxF1,
        )
        .unwrap();
        // higher-is-member: both candidates (0.5 - 1, 0.5 + 1) give F1 2/3
        // vs 0; all-member keeps F1 2/3... the strict one gives 0, so the
        // lenient extreme wins on F1 and the rule stays finite
        assert!(rule.threshold < 0.5);
        let f1 = f1_at(Orientation::HigherIsMember, rule.threshold, &[0.5], &[0.5]);
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12);
    }
}
