use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::stats::safe_div;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f2: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl MetricsReport {
    pub const NAMES: [&'static str; 5] = ["accuracy", "f1", "f2", "precision", "recall"];

    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let (tpf, fpf, fnf) = (tp as f64, fp as f64, fn_ as f64);
        let precision = safe_div(tpf, tpf + fpf);
        let recall = safe_div(tpf, tpf + fnf);
        Self {
            accuracy: safe_div((tp + tn) as f64, (tp + fp + tn + fn_) as f64),
            precision,
            recall,
            f1: safe_div(2.0 * precision * recall, precision + recall),
            f2: safe_div(5.0 * precision * recall, 4.0 * precision + recall),
            tp,
            fp,
            tn,
            fn_,
        }
    }

    /// The five headline metrics in [`Self::NAMES`] order.
    pub fn values(&self) -> [f64; 5] {
        [self.accuracy, self.f1, self.f2, self.precision, self.recall]
    }
}

/// Confusion counts with `+1` as the positive (artefact) label.
pub fn compute_metrics(pred: &[i8], truth: &[i8]) -> Result<MetricsReport, ClassifierError> {
    if pred.len() != truth.len() {
        return Err(ClassifierError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(ClassifierError::Empty);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p > 0, t > 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(MetricsReport::from_counts(tp, fp, tn, fn_))
}
