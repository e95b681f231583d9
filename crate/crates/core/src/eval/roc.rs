use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve for a detector, points ordered by descending threshold.
///
/// The first point has threshold `+inf` and sits at the origin; every later
/// point corresponds to one distinct score, counting scores `>= threshold`
/// as detections, so the curve ends at `(1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocReport {
    points: Vec<RocPoint>,
    auc: f64,
    n_pos: usize,
    n_neg: usize,
}

impl RocReport {
    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    /// Trapezoidal area under the curve.
    pub fn auc(&self) -> f64 {
        self.auc
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }
}

pub fn roc(pos_scores: &[f64], neg_scores: &[f64]) -> Result<RocReport> {
    if pos_scores.is_empty() || neg_scores.is_empty() {
        return Err(Error::invalid("ROC needs at least one positive and one negative score"));
    }
    if pos_scores.iter().chain(neg_scores).any(|s| !s.is_finite()) {
        return Err(Error::invalid("ROC scores must be finite"));
    }
    let mut labelled: Vec<(f64, bool)> = pos_scores
        .iter()
        .map(|&s| (s, true))
        .chain(neg_scores.iter().map(|&s| (s, false)))
        .collect();
    labelled.sort_by(|a, b| b.0.total_cmp(&a.0));

    let n_pos = pos_scores.len();
    let n_neg = neg_scores.len();
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < labelled.len() {
        let threshold = labelled[i].0;
        // Equal scores enter the curve together.
        while i < labelled.len() && labelled[i].0 == threshold {
            if labelled[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(RocReport {
        points,
        auc,
        n_pos,
        n_neg,
    })
}
