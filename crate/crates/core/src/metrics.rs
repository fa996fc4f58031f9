//! Confusion matrices, per-class and macro F1, and percentage gain over a
//! baseline score.

use crate::data::NUM_CLASSES;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// Rows are true classes, columns predicted classes.
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
    pub per_class_f1: [f64; NUM_CLASSES],
    pub macro_f1: f64,
}

impl EvalResult {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let hits: usize = (0..NUM_CLASSES).map(|c| self.confusion[c][c]).sum();
        hits as f64 / total as f64
    }
}

/// Per-class F1 as `2tp / (2tp + fp + fn)`, the harmonic mean of precision
/// and recall, with `0/0` taken as 0; averaged without weights over all ten
/// classes.
pub fn macro_f1(truth: &[usize], predicted: &[usize]) -> Result<EvalResult> {
    if truth.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= NUM_CLASSES || p >= NUM_CLASSES {
            return Err(Error::InvalidParameter(format!(
                "label pair ({t}, {p}) outside [0, {NUM_CLASSES})"
            )));
        }
        confusion[t][p] += 1;
    }
    let mut per_class_f1 = [0.0; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        let tp = confusion[c][c];
        let actual: usize = confusion[c].iter().sum();
        let claimed: usize = confusion.iter().map(|row| row[c]).sum();
        // claimed + actual = 2tp + fp + fn
        let denom = claimed + actual;
        per_class_f1[c] = if denom == 0 {
            0.0
        } else {
            (2 * tp) as f64 / denom as f64
        };
    }
    let macro_f1 = per_class_f1.iter().sum::<f64>() / NUM_CLASSES as f64;
    Ok(EvalResult {
        confusion,
        per_class_f1,
        macro_f1,
    })
}

/// `100 * (chaos - baseline) / baseline`.
pub fn gain_percent(f1_chaos: f64, f1_sa: f64) -> Result<f64> {
    if f1_sa <= 0.0 || !f1_sa.is_finite() || !f1_chaos.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gain is undefined against a baseline score of {f1_sa}"
        )));
    }
    Ok(100.0 * (f1_chaos - f1_sa) / f1_sa)
}
