//! ROC curves, tie-aware AUC and the zero-change operating point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predicted progressive iff `score > threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    #[serde(with = "crate::serde_inf")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionTable {
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

impl ConfusionTable {
    pub fn from_counts(tn: usize, fp: usize, fn_: usize, tp: usize) -> Self {
        let total = tn + fp + fn_ + tp;
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        ConfusionTable {
            tn,
            fp,
            fn_,
            tp,
            accuracy: ratio(tp + tn, total),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
        }
    }

    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    /// From (0, 0) at the highest threshold to (1, 1) at `-inf`.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    /// Confusion when every metric value `<= 0` is called stable.
    pub operating_point: ConfusionTable,
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::validation(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::validation("scores contain NaN"));
    }
    Ok(())
}

/// Confusion of "progressive iff value > 0" against `labels`.
pub fn confusion_at_zero(values: &[f64], labels: &[bool]) -> Result<ConfusionTable> {
    check_inputs(values, labels)?;
    let (mut tn, mut fp, mut fn_, mut tp) = (0, 0, 0, 0);
    for (&v, &l) in values.iter().zip(labels) {
        match (v > 0.0, l) {
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (true, true) => tp += 1,
        }
    }
    Ok(ConfusionTable::from_counts(tn, fp, fn_, tp))
}

/// ROC curve and trapezoidal AUC. Tied scores move the curve diagonally,
/// which is the same as counting tied positive/negative pairs as half a win.
/// `+inf` scores rank above every finite score and tie with each other.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocResult> {
    check_inputs(scores, labels)?;
    if scores.is_empty() {
        return Err(Error::validation("ROC needs at least one case"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc(format!(
            "{positives} progressive and {negatives} stable cases; both classes are needed"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    // Twice the area in units of one positive × one negative pair.
    let mut doubled_area = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / n,
            tpr: tp as f64 / p,
        });
        let (tp_before, fp_before) = (tp, fp);
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        doubled_area += (fp - fp_before) * (tp + tp_before);
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });

    Ok(RocResult {
        points,
        auc: doubled_area as f64 / (2.0 * p * n),
        operating_point: confusion_at_zero(scores, labels)?,
    })
}

/// Trapezoidal area under `points`.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}
