//! Rand index and outlier F-measure.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Fraction of point pairs on which two labelings agree.
///
/// Computed from the contingency table: agreements are
/// `C(n,2) + 2·Σ C(n_ij,2) − Σ C(a_i,2) − Σ C(b_j,2)`.
pub fn rand_index<A: Eq + Hash, B: Eq + Hash>(labels_a: &[A], labels_b: &[B]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::LengthMismatch {
            left: labels_a.len(),
            right: labels_b.len(),
        });
    }
    let n = labels_a.len();
    if n < 2 {
        return Err(Error::InvalidInput("rand index needs at least two points".into()));
    }
    let mut joint: HashMap<(&A, &B), u64> = HashMap::new();
    let mut rows: HashMap<&A, u64> = HashMap::new();
    let mut cols: HashMap<&B, u64> = HashMap::new();
    for (a, b) in labels_a.iter().zip(labels_b) {
        *joint.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let same_both: u64 = joint.values().map(|&c| pairs(c)).sum();
    let same_a: u64 = rows.values().map(|&c| pairs(c)).sum();
    let same_b: u64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n as u64);
    let agree = total + 2 * same_both - same_a - same_b;
    Ok(agree as f64 / total as f64)
}

/// Rand index over the points that are inliers in the ground truth and were
/// kept (`Some`) by the prediction.
pub fn rand_index_on_inliers(predicted: &[Option<usize>], truth: &[usize], truth_outlier: &[bool]) -> Result<f64> {
    if predicted.len() != truth.len() || truth.len() != truth_outlier.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len().min(truth_outlier.len()),
        });
    }
    let (a, b): (Vec<usize>, Vec<usize>) = predicted
        .iter()
        .zip(truth)
        .zip(truth_outlier)
        .filter_map(|((p, &t), &out)| match (p, out) {
            (Some(p), false) => Some((*p, t)),
            _ => None,
        })
        .unzip();
    rand_index(&a, &b)
}

/// Harmonic mean of precision and recall of the outlier class
/// (`true` = outlier in both masks); 0 when nothing is predicted.
pub fn outlier_f_measure(predicted: &[bool], truth: &[bool]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    let tp = predicted.iter().zip(truth).filter(|(p, t)| **p && **t).count() as f64;
    let predicted_pos = predicted.iter().filter(|&&p| p).count() as f64;
    let actual_pos = truth.iter().filter(|&&t| t).count() as f64;
    if actual_pos == 0.0 {
        return Err(Error::InvalidInput("ground truth contains no outliers".into()));
    }
    if predicted_pos == 0.0 || tp == 0.0 {
        return Ok(0.0);
    }
    let precision = tp / predicted_pos;
    let recall = tp / actual_pos;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub trials: usize,
    pub rand_index: Vec<f64>,
    pub rand_summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_measure: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_summary: Option<Summary>,
}

impl MetricReport {
    pub fn new(rand_index: Vec<f64>, f_measure: Option<Vec<f64>>) -> Self {
        Self {
            trials: rand_index.len(),
            rand_summary: Summary::of(&rand_index),
            f_summary: f_measure.as_deref().map(Summary::of),
            rand_index,
            f_measure,
        }
    }
}
