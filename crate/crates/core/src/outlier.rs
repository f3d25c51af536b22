//! Outlier ranking by the stationary distribution of the random walk `D⁻¹W`.
//!
//! For symmetric `W` the stationary probability of each vertex is its degree
//! over the total edge mass, so low-degree points are the least visited and
//! the first to be filtered.

use serde::{Deserialize, Serialize};

use crate::affinity::SimilarityMatrix;
use crate::error::{Error, Result};
use crate::kmeans::kmeans;

/// Replicates and seed of the automatic 2-means threshold.
pub const AUTO_REPLICATES: usize = 100;
pub const AUTO_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OutlierMode {
    /// Drop the `round(ratio · n)` lowest-ranked points.
    GivenRatio(f64),
    /// Split the raw degrees with 2-means; the low-degree cluster is dropped.
    AutoKMeans,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierReport {
    pub scores: Vec<f64>,
    pub degrees: Vec<f64>,
    pub inlier_mask: Vec<bool>,
    pub mode: OutlierMode,
}

impl OutlierReport {
    pub fn inlier_indices(&self) -> Vec<usize> {
        self.inlier_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &keep)| keep.then_some(i))
            .collect()
    }

    pub fn outlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&k| !k).count()
    }
}

fn checked_degrees(w: &SimilarityMatrix) -> Result<Vec<f64>> {
    let degrees = w.degrees();
    if let Some(vertex) = degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::IsolatedVertex { vertex });
    }
    Ok(degrees)
}

/// `π = 1ᵀD / ‖W‖₁`.
pub fn stationary_scores(w: &SimilarityMatrix) -> Result<Vec<f64>> {
    let degrees = checked_degrees(w)?;
    let total = w.l1_norm();
    Ok(degrees.into_iter().map(|d| d / total).collect())
}

/// Inlier mask from a ranking vector (scores or degrees); `true` keeps the point.
pub fn filter_outliers(values: &[f64], mode: OutlierMode) -> Result<Vec<bool>> {
    let n = values.len();
    match mode {
        OutlierMode::GivenRatio(ratio) => {
            if !(0.0..1.0).contains(&ratio) {
                return Err(Error::Config(format!("outlier ratio {ratio} must lie in [0, 1)")));
            }
            let drop = (ratio * n as f64).round() as usize;
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
            let mut mask = vec![true; n];
            for &i in order.iter().take(drop) {
                mask[i] = false;
            }
            Ok(mask)
        }
        OutlierMode::AutoKMeans => {
            if n < 2 {
                return Ok(vec![true; n]);
            }
            let fit = kmeans(values, 1, 2, AUTO_REPLICATES, AUTO_SEED)?;
            let (low, high) = if fit.centers[0] <= fit.centers[1] {
                (fit.centers[0], fit.centers[1])
            } else {
                (fit.centers[1], fit.centers[0])
            };
            Ok(values
                .iter()
                .map(|&v| (v - low).abs() >= (v - high).abs())
                .collect())
        }
    }
}

/// Scores every point and filters according to `mode`.
pub fn detect_outliers(w: &SimilarityMatrix, mode: OutlierMode) -> Result<OutlierReport> {
    let degrees = checked_degrees(w)?;
    let scores = stationary_scores(w)?;
    let inlier_mask = match mode {
        OutlierMode::GivenRatio(_) => filter_outliers(&scores, mode)?,
        OutlierMode::AutoKMeans => filter_outliers(&degrees, mode)?,
    };
    Ok(OutlierReport {
        scores,
        degrees,
        inlier_mask,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn w(rows: usize, v: &[f64]) -> SimilarityMatrix {
        SimilarityMatrix::from_dense(&DMatrix::from_row_slice(rows, rows, v)).unwrap()
    }

    #[test]
    fn two_nodes() {
        assert_eq!(stationary_scores(&w(2, &[0.0, 1.0, 1.0, 0.0])).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn star_of_three() {
        let m = w(3, &[0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(stationary_scores(&m).unwrap(), vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn isolated_vertex() {
        let m = w(3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(stationary_scores(&m), Err(Error::IsolatedVertex { vertex: 2 })));
    }

    #[test]
    fn ratio_filters() {
        let s = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(filter_outliers(&s, OutlierMode::GivenRatio(0.0)).unwrap(), vec![true; 4]);
        assert_eq!(
            filter_outliers(&s, OutlierMode::GivenRatio(0.25)).unwrap(),
            vec![false, true, true, true]
        );
        assert!(filter_outliers(&s, OutlierMode::GivenRatio(1.0)).is_err());
    }

    #[test]
    fn ratio_ties_go_to_lower_index() {
        let s = [0.2, 0.1, 0.1, 0.6];
        assert_eq!(
            filter_outliers(&s, OutlierMode::GivenRatio(0.25)).unwrap(),
            vec![true, false, true, true]
        );
    }

    #[test]
    fn auto_mode_splits_low_degrees() {
        let d = [5.0, 5.1, 4.9, 0.2, 5.2, 0.1, 5.0];
        let mask = filter_outliers(&d, OutlierMode::AutoKMeans).unwrap();
        assert_eq!(mask, vec![true, true, true, false, true, false, true]);
    }

    #[test]
    fn auto_mode_constant_keeps_all() {
        let mask = filter_outliers(&[1.0; 5], OutlierMode::AutoKMeans).unwrap();
        assert_eq!(mask, vec![true; 5]);
    }
}
