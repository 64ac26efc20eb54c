use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Receiver operating characteristic and its area.
#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    /// Score threshold of each point after the origin (`score >= t` is
    /// predicted positive).
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

/// Sweeps a threshold over the distinct scores, highest first. Equal
/// scores enter together, producing one diagonal segment; the area uses the
/// trapezoid rule.
pub fn roc_auc(scores: &[f64], truth: &[bool]) -> Result<RocCurve> {
    if scores.len() != truth.len() {
        return Err(Error::Data(format!(
            "{} scores but {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Data("NaN score".into()));
    }
    let positives = truth.iter().filter(|&&t| t).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Data(format!(
            "ROC needs both classes, got {positives} positives and {negatives} negatives"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let point = (fp as f64 / negatives as f64, tp as f64 / positives as f64);
        let last = *points.last().expect("origin present");
        auc += (point.0 - last.0) * (point.1 + last.1) / 2.0;
        points.push(point);
        thresholds.push(s);
    }
    Ok(RocCurve {
        points,
        thresholds,
        auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_scores() {
        let truth = [true, false, true, false, false];
        let scores: Vec<f64> = truth.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
        let roc = roc_auc(&scores, &truth).unwrap();
        assert_eq!(roc.auc, 1.0);
        assert_eq!(roc.points, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
    }

    #[test]
    fn constant_scores_are_chance() {
        let truth = [true, false, true, false, false];
        let roc = roc_auc(&[0.3; 5], &truth).unwrap();
        assert_eq!(roc.auc, 0.5);
        assert_eq!(roc.points.len(), 2);
    }

    #[test]
    fn inverted_scores() {
        let roc = roc_auc(&[0.0, 1.0], &[true, false]).unwrap();
        assert_eq!(roc.auc, 0.0);
    }

    #[test]
    fn single_class_rejected() {
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(roc_auc(&[0.1], &[true, false]).is_err());
    }
}
