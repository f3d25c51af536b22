//! Compound distance × curvature similarity and the curved-level diagnostics.
//!
//! For a graph edge `(i, j)` at distance `r` with bandwidths `σ_i, σ_j` and
//! tangent misalignment `θ = ‖θ(J_i, J_j)‖₂`:
//!
//! ```text
//! w1 = exp(-r² / (σ_i σ_j))
//! w2 = exp(-θ² σ_i σ_j / (r² σ_c²))
//! w  = w1 · w2
//! ```
//!
//! `w2` penalizes misaligned tangents more strongly the closer the two points
//! are, which is what lets intersecting manifolds fall apart along the
//! crossing. With `σ_c = ∞` the matrix reduces to the self-tuning kernel.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{angle_norm, principal_angle_vector, NeighborhoodGraph, PointCloud};
use crate::local_tangent::TangentFrame;

/// Symmetric, nonnegative, zero-diagonal sparse affinity.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    /// Curvature-kernel scale; `None` for matrices not built from the kernel.
    pub sigma_c: Option<f64>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SimilarityMatrix {
    /// Builds from a dense matrix, keeping only strictly positive entries.
    pub fn from_dense(w: &DMatrix<f64>) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n || n == 0 {
            return Err(Error::InvalidInput("similarity matrix must be square and non-empty".into()));
        }
        let mut rows = vec![Vec::new(); n];
        for i in 0..n {
            if w[(i, i)] != 0.0 {
                return Err(Error::InvalidInput(format!("diagonal entry {i} is nonzero")));
            }
            for j in 0..n {
                let v = w[(i, j)];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidInput(format!("entry ({i},{j}) = {v} is not finite and nonnegative")));
                }
                if v != w[(j, i)] {
                    return Err(Error::InvalidInput(format!("entry ({i},{j}) breaks symmetry")));
                }
                if v > 0.0 {
                    rows[i].push((j, v));
                }
            }
        }
        Ok(Self { sigma_c: None, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Stored entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |e| e.0)
            .map(|p| row[p].1)
            .unwrap_or(0.0)
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|e| e.1).sum()).collect()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Entrywise 1-norm.
    pub fn l1_norm(&self) -> f64 {
        self.rows.iter().flatten().map(|e| e.1.abs()).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Same sparsity, every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            sigma_c: self.sigma_c,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&(j, v)| (j, v * c)).collect())
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.len().min(other.len()) {
            for &(j, v) in self.row(i) {
                worst = worst.max((v - other.get(i, j)).abs());
            }
            for &(j, v) in other.row(i) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        worst
    }
}

/// Tangent misalignment `‖θ(J_i, J_j)‖₂` for every undirected graph edge.
///
/// Computing these once lets several `σ_c` values share the expensive part.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeAngles {
    /// `(i, j, distance, theta)` with `i < j`, in row-major edge order.
    pub edges: Vec<(usize, usize, f64, f64)>,
    pub bandwidths: Vec<f64>,
}

impl EdgeAngles {
    pub fn new(graph: &NeighborhoodGraph, frames: &[TangentFrame]) -> Result<Self> {
        check_frames(graph.len(), frames)?;
        let per_row: Vec<Vec<(usize, usize, f64, f64)>> = (0..graph.len())
            .into_par_iter()
            .map(|i| {
                graph.adjacency[i]
                    .iter()
                    .filter(|e| e.to > i)
                    .map(|e| {
                        let theta = angle_norm(&principal_angle_vector(
                            &frames[i].basis,
                            &frames[e.to].basis,
                        ));
                        (i, e.to, e.distance, theta)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            edges: per_row.into_iter().flatten().collect(),
            bandwidths: graph.bandwidths.clone(),
        })
    }

    /// Assembles `W` for one curvature scale; `f64::INFINITY` gives `w1` only.
    pub fn similarity(&self, sigma_c: f64) -> Result<SimilarityMatrix> {
        if !(sigma_c > 0.0) {
            return Err(Error::Config(format!("sigma_c must be > 0, got {sigma_c}")));
        }
        let n = self.bandwidths.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, r, theta) in &self.edges {
            if !(r > 0.0) {
                return Err(Error::DuplicatePoints { first: i, second: j });
            }
            let v = pair_similarity(r, self.bandwidths[i], self.bandwidths[j], theta, sigma_c);
            rows[i].push((j, v));
            rows[j].push((i, v));
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
        }
        Ok(SimilarityMatrix {
            sigma_c: Some(sigma_c),
            rows,
        })
    }
}

/// Distance kernel `w1` of one pair.
pub fn distance_kernel(r: f64, sigma_i: f64, sigma_j: f64) -> f64 {
    (-(r * r) / (sigma_i * sigma_j)).exp()
}

/// Curvature kernel `w2` of one pair.
pub fn curvature_kernel(r: f64, sigma_i: f64, sigma_j: f64, theta: f64, sigma_c: f64) -> f64 {
    if theta == 0.0 {
        return 1.0;
    }
    (-(theta * theta) * sigma_i * sigma_j / (r * r * sigma_c * sigma_c)).exp()
}

pub fn pair_similarity(r: f64, sigma_i: f64, sigma_j: f64, theta: f64, sigma_c: f64) -> f64 {
    distance_kernel(r, sigma_i, sigma_j) * curvature_kernel(r, sigma_i, sigma_j, theta, sigma_c)
}

fn check_frames(n: usize, frames: &[TangentFrame]) -> Result<()> {
    if frames.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: frames.len(),
        });
    }
    if let Some((i, f)) = frames.iter().enumerate().find(|(i, f)| f.point_index != *i) {
        return Err(Error::InvalidInput(format!(
            "frame at position {i} belongs to point {}",
            f.point_index
        )));
    }
    Ok(())
}

/// Curvature-aware affinity over the graph edges.
pub fn similarity_matrix(
    cloud: &PointCloud,
    graph: &NeighborhoodGraph,
    frames: &[TangentFrame],
    sigma_c: f64,
) -> Result<SimilarityMatrix> {
    if cloud.len() != graph.len() {
        return Err(Error::LengthMismatch {
            left: cloud.len(),
            right: graph.len(),
        });
    }
    EdgeAngles::new(graph, frames)?.similarity(sigma_c)
}

/// Distance-only self-tuning affinity over the same edges.
pub fn self_tuning_matrix(graph: &NeighborhoodGraph) -> SimilarityMatrix {
    let n = graph.len();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, j, r) in graph.edges() {
        let v = distance_kernel(r, graph.bandwidths[i], graph.bandwidths[j]);
        rows[i].push((j, v));
        rows[j].push((i, v));
    }
    for row in &mut rows {
        row.sort_by_key(|e| e.0);
    }
    SimilarityMatrix { sigma_c: None, rows }
}

fn edge_term(frames: &[TangentFrame], i: usize, j: usize, r: f64) -> f64 {
    angle_norm(&principal_angle_vector(&frames[i].basis, &frames[j].basis)) / r
}

/// `R(x_i)`: tangent misalignment over distance, summed over the graph neighbors.
pub fn curved_level(
    point_index: usize,
    cloud: &PointCloud,
    graph: &NeighborhoodGraph,
    frames: &[TangentFrame],
) -> Result<f64> {
    check_frames(cloud.len(), frames)?;
    let edges = graph
        .adjacency
        .get(point_index)
        .ok_or_else(|| Error::InvalidInput(format!("point {point_index} out of range")))?;
    if edges.is_empty() {
        return Err(Error::InvalidInput(format!("point {point_index} has no neighbors")));
    }
    Ok(edges
        .iter()
        .map(|e| edge_term(frames, point_index, e.to, e.distance))
        .sum())
}

/// Curved measure between two vertex sets.
///
/// For disjoint sets this sums over the edges with one end in each; for
/// identical sets it is the intra-cluster measure, each edge counted once.
pub fn curved_measure_between(
    cluster_a: &[usize],
    cluster_b: &[usize],
    cloud: &PointCloud,
    graph: &NeighborhoodGraph,
    frames: &[TangentFrame],
) -> Result<f64> {
    check_frames(cloud.len(), frames)?;
    let n = graph.len();
    let mut in_a = vec![false; n];
    let mut in_b = vec![false; n];
    for (set, mask) in [(cluster_a, &mut in_a), (cluster_b, &mut in_b)] {
        for &i in set {
            if i >= n {
                return Err(Error::InvalidInput(format!("index {i} out of range")));
            }
            mask[i] = true;
        }
    }
    let identical = in_a == in_b;
    if !identical && in_a.iter().zip(&in_b).any(|(a, b)| *a && *b) {
        return Err(Error::InvalidInput("index sets must be disjoint or identical".into()));
    }
    let mut total = 0.0;
    for (i, j, r) in graph.edges() {
        let crosses = if identical {
            in_a[i] && in_a[j]
        } else {
            (in_a[i] && in_b[j]) || (in_b[i] && in_a[j])
        };
        if crosses {
            total += edge_term(frames, i, j, r);
        }
    }
    Ok(total)
}

/// Sum over clusters of `W(cluster, complement) / W(cluster)`; lower is better.
pub fn objective_score(labels: &[usize], w: &SimilarityMatrix) -> Result<f64> {
    if labels.len() != w.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: w.len(),
        });
    }
    // cluster id -> (cut mass, intra mass)
    let mut mass: BTreeMap<usize, (f64, f64)> = labels.iter().map(|&l| (l, (0.0, 0.0))).collect();
    for (i, &li) in labels.iter().enumerate() {
        for &(j, v) in w.row(i) {
            let entry = mass.get_mut(&li).expect("label present");
            if labels[j] != li {
                entry.0 += v;
            } else if j > i {
                entry.1 += v;
            }
        }
    }
    let mut score = 0.0;
    for (cluster, (cut, intra)) in mass {
        if !(intra > 0.0) {
            return Err(Error::EmptyClusterDenominator { cluster });
        }
        score += cut / intra;
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn hand_evaluated_pair() {
        let v = pair_similarity(1.0, 1.0, 1.0, FRAC_PI_2, 1.0);
        let expected = (-1.0_f64).exp() * (-(PI * PI) / 4.0).exp();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.031198).abs() < 5e-7);
    }

    #[test]
    fn parallel_tangents_give_distance_kernel() {
        assert_eq!(pair_similarity(0.7, 0.5, 0.9, 0.0, 0.2), distance_kernel(0.7, 0.5, 0.9));
    }

    #[test]
    fn misalignment_penalty_grows_as_points_approach() {
        let far = curvature_kernel(1.0, 1.0, 1.0, FRAC_PI_4, 1.0);
        let near = curvature_kernel(0.5, 1.0, 1.0, FRAC_PI_4, 1.0);
        assert!(near < far);
    }

    #[test]
    fn objective_examples() {
        let block = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.5, 0.0],
        );
        let w = SimilarityMatrix::from_dense(&block).unwrap();
        assert_eq!(objective_score(&[0, 0, 1, 1], &w).unwrap(), 0.0);

        let clique = DMatrix::from_row_slice(3, 3, &[0.0, 0.3, 0.3, 0.3, 0.0, 0.3, 0.3, 0.3, 0.0]);
        let w = SimilarityMatrix::from_dense(&clique).unwrap();
        assert!(matches!(
            objective_score(&[0, 1, 1], &w),
            Err(Error::EmptyClusterDenominator { cluster: 0 })
        ));
    }

    #[test]
    fn objective_mixed_partition() {
        // path 0-1-2-3 with unit weights, split {0,1} | {2,3}: each side 1/1
        let mut m = DMatrix::zeros(4, 4);
        for i in 0..3 {
            m[(i, i + 1)] = 1.0;
            m[(i + 1, i)] = 1.0;
        }
        let w = SimilarityMatrix::from_dense(&m).unwrap();
        assert_eq!(objective_score(&[5, 5, 9, 9], &w).unwrap(), 2.0);
        assert_eq!(objective_score(&[9, 9, 5, 5], &w).unwrap(), 2.0);
    }

    #[test]
    fn from_dense_validates() {
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(SimilarityMatrix::from_dense(&asym).is_err());
        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        assert!(SimilarityMatrix::from_dense(&diag).is_err());
    }
}
