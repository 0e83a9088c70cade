//! Alarm-versus-label metrics.

use serde::Serialize;

use crate::ensemble::PointReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    /// Share of grid cells whose alarm state matches the labels.
    pub accuracy: f64,
    /// Seconds.
    pub match_tolerance: u64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Matches alarms to labels one-to-one: alarms in time order each take
/// the earliest unmatched label within `±tolerance` seconds.
pub fn match_counts(alarms: &[i64], labels: &[i64], tolerance: u64) -> (usize, usize, usize) {
    let mut a = alarms.to_vec();
    let mut l = labels.to_vec();
    a.sort_unstable();
    l.sort_unstable();
    let tol = tolerance.min(i64::MAX as u64) as i64;
    let mut used = vec![false; l.len()];
    let mut first = 0;
    let mut tp = 0;
    for &t in &a {
        while first < l.len() && (used[first] || l[first] < t.saturating_sub(tol)) {
            first += 1;
        }
        if let Some(j) = (first..l.len()).take_while(|&j| l[j] <= t.saturating_add(tol)).find(|&j| !used[j]) {
            used[j] = true;
            tp += 1;
        }
    }
    (tp, a.len() - tp, l.len() - tp)
}

pub fn evaluate(points: &[PointReport], labels: &[i64], tolerance: u64) -> EvalMetrics {
    let alarms: Vec<i64> = points.iter().filter(|p| p.alarm).map(|p| p.ts).collect();
    let (tp, fp, fn_) = match_counts(&alarms, labels, tolerance);

    // cell width from the report spacing
    let step = points
        .windows(2)
        .map(|w| w[1].ts - w[0].ts)
        .filter(|&d| d > 0)
        .min()
        .unwrap_or(1);
    let correct = points
        .iter()
        .filter(|p| {
            let truth = labels.iter().any(|&l| l >= p.ts && l < p.ts + step);
            truth == p.alarm
        })
        .count();
    EvalMetrics {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        accuracy: ratio(correct, points.len()),
        match_tolerance: tolerance,
    }
}
