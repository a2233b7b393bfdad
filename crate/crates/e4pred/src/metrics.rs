//! Classification metrics: confusion counts, accuracy, F1, ROC, AUC, and
//! mean/std aggregation over repeated runs.
//!
//! Scores are generic over [`Real`]; the metric values themselves are count
//! ratios and are always reported as `f64`.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("scores ({scores}) and labels ({labels}) differ in length")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("metric needs at least one example")]
    EmptyInput,
    #[error("ROC needs both a positive and a negative example")]
    SingleClass,
    #[error("score at index {index} is not finite")]
    NonFiniteScore { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub true_neg: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }
}

/// One point of a ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub false_pos_rate: f64,
    pub true_pos_rate: f64,
}

/// Threshold scores at `threshold`: predicted positive iff `score >= threshold`.
pub fn confusion<T: Real>(
    scores: &[T],
    labels: &[bool],
    threshold: T,
) -> Result<ConfusionCounts, MetricsError> {
    check_inputs(scores, labels)?;
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(labels) {
        let pred = s >= threshold;
        match (pred, y) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => c.true_neg += 1,
        }
    }
    Ok(c)
}

pub fn accuracy(c: &ConfusionCounts) -> f64 {
    let total = c.total();
    if total == 0 {
        return 0.0;
    }
    (c.true_pos + c.true_neg) as f64 / total as f64
}

/// F1 = 2 TP / (2 TP + FP + FN). The degenerate case (no positives anywhere)
/// is reported as 0.
pub fn f1(c: &ConfusionCounts) -> f64 {
    let denom = 2 * c.true_pos + c.false_pos + c.false_neg;
    if denom == 0 {
        log::warn!("F1 undefined (no positive labels or predictions); reporting 0");
        return 0.0;
    }
    2.0 * c.true_pos as f64 / denom as f64
}

pub fn precision(c: &ConfusionCounts) -> f64 {
    let denom = c.true_pos + c.false_pos;
    if denom == 0 {
        return 0.0;
    }
    c.true_pos as f64 / denom as f64
}

pub fn recall(c: &ConfusionCounts) -> f64 {
    let denom = c.true_pos + c.false_neg;
    if denom == 0 {
        return 0.0;
    }
    c.true_pos as f64 / denom as f64
}

/// ROC curve swept over every distinct score, ties grouped, with the (0,0)
/// and (1,1) endpoints. Points are ordered by increasing false-positive rate.
pub fn roc_curve<T: Real>(scores: &[T], labels: &[bool]) -> Result<Vec<RocPoint>, MetricsError> {
    check_inputs(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut points = Vec::with_capacity(scores.len() + 1);
    points.push(RocPoint {
        false_pos_rate: 0.0,
        true_pos_rate: 0.0,
    });
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        // One curve point per distinct threshold value.
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            false_pos_rate: fp as f64 / neg as f64,
            true_pos_rate: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

/// Area under a ROC curve by the trapezoid rule.
pub fn auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| {
            (w[1].false_pos_rate - w[0].false_pos_rate)
                * (w[0].true_pos_rate + w[1].true_pos_rate)
                * 0.5
        })
        .sum()
}

/// AUC by direct positive/negative pair counting (ties count 1/2).
///
/// Independent of [`roc_curve`]/[`auc`]; the two routes must agree to
/// 1e-12 and the test suite holds them to that.
pub fn auc_pair_count<T: Real>(scores: &[T], labels: &[bool]) -> Result<f64, MetricsError> {
    check_inputs(scores, labels)?;
    let mut wins = 0.0f64;
    let mut pairs = 0u64;
    for (i, &yi) in labels.iter().enumerate() {
        if !yi {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    if pairs == 0 {
        return Err(MetricsError::SingleClass);
    }
    Ok(wins / pairs as f64)
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(Aggregate {
        mean,
        std: var.sqrt(),
    })
}

/// Metrics of a single seeded repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub auc: f64,
}

/// Aggregated report over one or more seeded repetitions.
///
/// `precision`, `recall` and `auc` are means over seeds; `roc_points` is the
/// curve of all seeds' scores pooled, kept for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub precision: f64,
    pub recall: f64,
    pub auc: f64,
    pub roc_points: Vec<RocPoint>,
    pub per_seed: Vec<SeedMetrics>,
}

impl MetricsReport {
    pub fn from_seed_runs(
        per_seed: Vec<SeedMetrics>,
        roc_points: Vec<RocPoint>,
    ) -> Result<Self, MetricsError> {
        if per_seed.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        let take = |f: fn(&SeedMetrics) -> f64| per_seed.iter().map(f).collect::<Vec<_>>();
        let acc = aggregate(&take(|m| m.accuracy))?;
        let f1 = aggregate(&take(|m| m.f1))?;
        let prec = aggregate(&take(|m| m.precision))?;
        let rec = aggregate(&take(|m| m.recall))?;
        let auc = aggregate(&take(|m| m.auc))?;
        Ok(MetricsReport {
            accuracy_mean: acc.mean,
            accuracy_std: acc.std,
            f1_mean: f1.mean,
            f1_std: f1.std,
            precision: prec.mean,
            recall: rec.mean,
            auc: auc.mean,
            roc_points,
            per_seed,
        })
    }

    /// Compute the single-seed metrics for one batch of scored examples.
    pub fn single_seed<T: Real>(
        seed: u64,
        scores: &[T],
        labels: &[bool],
        threshold: T,
    ) -> Result<SeedMetrics, MetricsError> {
        let c = confusion(scores, labels, threshold)?;
        // Degenerate single-class evaluation sets keep accuracy/F1 but have
        // no ROC; report AUC 0.5 so aggregation stays defined.
        let auc_value = match roc_curve(scores, labels) {
            Ok(points) => auc(&points),
            Err(MetricsError::SingleClass) => 0.5,
            Err(e) => return Err(e),
        };
        Ok(SeedMetrics {
            seed,
            accuracy: accuracy(&c),
            f1: f1(&c),
            precision: precision(&c),
            recall: recall(&c),
            auc: auc_value,
        })
    }
}

/// Two-column CSV (`false_pos_rate,true_pos_rate`) for a ROC curve.
pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("false_pos_rate,true_pos_rate\n");
    for p in points {
        out.push_str(&format!("{:.6},{:.6}\n", p.false_pos_rate, p.true_pos_rate));
    }
    out
}

fn check_inputs<T: Real>(scores: &[T], labels: &[bool]) -> Result<(), MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore { index });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_closed_form() {
        let c = ConfusionCounts {
            true_pos: 3,
            true_neg: 5,
            false_pos: 1,
            false_neg: 1,
        };
        assert_eq!(accuracy(&c), 0.8);
    }

    #[test]
    fn f1_closed_form() {
        let c = ConfusionCounts {
            true_pos: 2,
            true_neg: 0,
            false_pos: 1,
            false_neg: 1,
        };
        assert!((f1(&c) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn f1_degenerate_is_zero() {
        let c = ConfusionCounts {
            true_pos: 0,
            true_neg: 4,
            false_pos: 0,
            false_neg: 0,
        };
        assert_eq!(f1(&c), 0.0);
    }

    #[test]
    fn threshold_is_inclusive() {
        let c = confusion(&[0.5f64, 0.49], &[true, false], 0.5).unwrap();
        assert_eq!(c.true_pos, 1);
        assert_eq!(c.true_neg, 1);
    }

    #[test]
    fn worked_auc_example() {
        let scores = [0.9f64, 0.8, 0.3, 0.2];
        let labels = [true, false, true, false];
        let points = roc_curve(&scores, &labels).unwrap();
        assert!((auc(&points) - 0.75).abs() < 1e-12);
        assert!((auc_pair_count(&scores, &labels).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn roc_endpoints_and_monotonicity() {
        let scores = [0.9f64, 0.8, 0.8, 0.3, 0.2, 0.1];
        let labels = [true, false, true, true, false, false];
        let points = roc_curve(&scores, &labels).unwrap();
        assert_eq!(points.first().unwrap().false_pos_rate, 0.0);
        assert_eq!(points.first().unwrap().true_pos_rate, 0.0);
        assert_eq!(points.last().unwrap().false_pos_rate, 1.0);
        assert_eq!(points.last().unwrap().true_pos_rate, 1.0);
        for w in points.windows(2) {
            assert!(w[1].false_pos_rate >= w[0].false_pos_rate);
            assert!(w[1].true_pos_rate >= w[0].true_pos_rate);
        }
        // Tied scores collapse into one point: 6 scores, 5 distinct values.
        assert_eq!(points.len(), 6);
    }

    #[test]
    fn perfect_and_inverted_rankings() {
        let labels = [true, true, false, false];
        let points = roc_curve(&[0.9f64, 0.8, 0.2, 0.1], &labels).unwrap();
        assert_eq!(auc(&points), 1.0);
        let points = roc_curve(&[0.1f64, 0.2, 0.8, 0.9], &labels).unwrap();
        assert_eq!(auc(&points), 0.0);
    }

    #[test]
    fn all_tied_scores_give_half() {
        let scores = [0.5f64; 4];
        let labels = [true, false, true, false];
        let points = roc_curve(&scores, &labels).unwrap();
        assert!((auc(&points) - 0.5).abs() < 1e-12);
        assert!((auc_pair_count(&scores, &labels).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn roc_rejects_single_class() {
        assert_eq!(
            roc_curve(&[0.1f64, 0.2], &[true, true]).unwrap_err(),
            MetricsError::SingleClass
        );
    }

    #[test]
    fn rejects_length_mismatch_and_nonfinite() {
        assert!(matches!(
            confusion(&[0.1f64], &[true, false], 0.5),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert_eq!(
            confusion(&[f64::NAN, 0.2], &[true, false], 0.5).unwrap_err(),
            MetricsError::NonFiniteScore { index: 0 }
        );
    }

    #[test]
    fn aggregate_mean_and_population_std() {
        let a = aggregate(&[0.4, 0.6]).unwrap();
        assert!((a.mean - 0.5).abs() < 1e-15);
        assert!((a.std - 0.1).abs() < 1e-15);
        let single = aggregate(&[0.7]).unwrap();
        assert_eq!(single.mean, 0.7);
        assert_eq!(single.std, 0.0);
    }

    #[test]
    fn report_aggregates_match_recomputation() {
        let per_seed = vec![
            SeedMetrics {
                seed: 0,
                accuracy: 0.8,
                f1: 0.4,
                precision: 0.5,
                recall: 0.4,
                auc: 0.7,
            },
            SeedMetrics {
                seed: 1,
                accuracy: 0.9,
                f1: 0.6,
                precision: 0.7,
                recall: 0.6,
                auc: 0.9,
            },
        ];
        let report = MetricsReport::from_seed_runs(per_seed.clone(), vec![]).unwrap();
        let f1s: Vec<f64> = per_seed.iter().map(|m| m.f1).collect();
        let agg = aggregate(&f1s).unwrap();
        assert!((report.f1_mean - agg.mean).abs() < 1e-12);
        assert!((report.f1_std - agg.std).abs() < 1e-12);
        assert_eq!(report.per_seed.len(), 2);
    }

    #[test]
    fn roc_csv_has_two_columns() {
        let csv = roc_csv(&[RocPoint {
            false_pos_rate: 0.25,
            true_pos_rate: 0.5,
        }]);
        assert_eq!(csv, "false_pos_rate,true_pos_rate\n0.250000,0.500000\n");
    }
}
