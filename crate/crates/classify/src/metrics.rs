//! Confusion matrix, accuracy and one-vs-rest ROC-AUC.

use serde::{Deserialize, Serialize};

use qst_nn::Network;

use crate::dataset::Dataset;
use crate::model::{argmax, predict};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub classes: Vec<String>,
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<usize>>,
    /// Rows of `counts` normalized per true label.
    pub confusion: Vec<Vec<f64>>,
    pub accuracy: f64,
    /// `None` for classes absent from the test set.
    pub auc: Vec<Option<f64>>,
    /// Mean over the classes with a defined AUC.
    pub macro_auc: Option<f64>,
}

impl Metrics {
    pub fn from_scores(classes: &[String], labels: &[usize], scores: &[Vec<f64>]) -> Self {
        let n = classes.len();
        let mut counts = vec![vec![0usize; n]; n];
        for (l, s) in labels.iter().zip(scores) {
            counts[*l][argmax(s)] += 1;
        }
        let confusion = counts
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                row.iter().map(|c| if total == 0 { 0.0 } else { *c as f64 / total as f64 }).collect()
            })
            .collect();
        let correct: usize = (0..n).map(|i| counts[i][i]).sum();
        let accuracy = if labels.is_empty() { 0.0 } else { correct as f64 / labels.len() as f64 };
        let auc: Vec<Option<f64>> = (0..n)
            .map(|c| {
                let positive: Vec<bool> = labels.iter().map(|l| *l == c).collect();
                let s: Vec<f64> = scores.iter().map(|v| v[c]).collect();
                roc_auc(&s, &positive)
            })
            .collect();
        let defined: Vec<f64> = auc.iter().flatten().copied().collect();
        let macro_auc = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        Self { classes: classes.to_vec(), counts, confusion, accuracy, auc, macro_auc }
    }

    /// Confusion matrix as CSV with a header row of predicted labels.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for c in &self.classes {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            out.push_str(c);
            for v in row {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Area under the ROC curve by trapezoidal integration over every distinct
/// score threshold. `None` when either class is absent.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|a, b| scores[*b].total_cmp(&scores[*a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_tpr, mut prev_fpr) = (0.0, 0.0);
    let mut area = 0.0;
    let mut k = 0;
    while k < idx.len() {
        let threshold = scores[idx[k]];
        while k < idx.len() && scores[idx[k]] == threshold {
            if positive[idx[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let tpr = tp as f64 / n_pos as f64;
        let fpr = fp as f64 / n_neg as f64;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    Some(area)
}

/// Evaluates a trained network on every sample of `data`.
pub fn evaluate(net: &mut Network, data: &Dataset) -> Result<Metrics> {
    let mut scores = Vec::with_capacity(data.samples.len());
    for s in &data.samples {
        scores.push(predict(net, &s.image)?);
    }
    let labels: Vec<usize> = data.samples.iter().map(|s| s.label).collect();
    Ok(Metrics::from_scores(&data.classes, &labels, &scores))
}
