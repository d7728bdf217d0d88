//! Confusion matrices, balanced accuracy, weighted and per-class F1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ClassId;

/// Rows are truth, columns are prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

/// Builds the confusion matrix from parallel truth/prediction vectors.
pub fn confusion(
    truth: &[ClassId],
    predicted: &[ClassId],
    classes: &[String],
) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::invariant(format!(
            "truth/prediction length mismatch: {} vs {}",
            truth.len(),
            predicted.len()
        )));
    }
    let n = classes.len();
    let mut counts = vec![vec![0u64; n]; n];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= n || p >= n {
            return Err(Error::invariant(format!(
                "label {} outside class table of size {n}",
                t.max(p)
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: ClassId) -> u64 {
        self.counts[class].iter().sum()
    }

    fn predicted_total(&self, class: ClassId) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    /// Mean per-class recall over classes with nonzero support.
    pub fn balanced_accuracy(&self) -> Result<f64> {
        let mut sum = 0.0;
        let mut classes = 0usize;
        for c in 0..self.classes.len() {
            let support = self.support(c);
            if support == 0 {
                continue;
            }
            sum += self.counts[c][c] as f64 / support as f64;
            classes += 1;
        }
        if classes == 0 {
            return Err(Error::invariant("balanced accuracy of an all-zero matrix"));
        }
        Ok(sum / classes as f64)
    }

    /// F1 per class: 2PR/(P+R), 0 when precision + recall = 0.
    pub fn per_class_f1(&self) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| {
                let tp = self.counts[c][c] as f64;
                let support = self.support(c) as f64;
                let predicted = self.predicted_total(c) as f64;
                let precision = if predicted == 0.0 { 0.0 } else { tp / predicted };
                let recall = if support == 0.0 { 0.0 } else { tp / support };
                if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                }
            })
            .collect()
    }

    /// Support-weighted mean of per-class F1. Classes with zero support carry
    /// zero weight; truth classes never predicted still weight in.
    pub fn weighted_f1(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::invariant("weighted F1 of an all-zero matrix"));
        }
        let f1 = self.per_class_f1();
        let sum: f64 = (0..self.classes.len())
            .map(|c| self.support(c) as f64 * f1[c])
            .sum();
        Ok(sum / total as f64)
    }

    /// CSV with a header row/column of class names.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("truth\\predicted");
        for c in &self.classes {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (name, row) in self.classes.iter().zip(&self.counts) {
            out.push_str(name);
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}
