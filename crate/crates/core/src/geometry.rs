//! Point clouds, symmetric k-nearest-neighbor graphs with self-tuning
//! bandwidths, and principal angles between tangent subspaces.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Tolerance on `max |J^T J - I|` accepted by [`principal_angles`].
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// `n` points in `D`-dimensional ambient space, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("ambient dimension must be >= 1".into()));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "{} coordinates do not form a non-empty set of {dim}-dimensional points",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate at point {} axis {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} coordinates, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New cloud made of the listed rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        Self::new(self.dim, data)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        squared_distance(self.point(i), self.point(j)).sqrt()
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Union-symmetrized kNN graph.
///
/// `neighbors[i]` holds the `k` nearest points of `i` by ascending distance
/// (ties to the lower index); `adjacency[i]` holds the symmetrized edge set
/// sorted by neighbor index. `bandwidths[i]` is the distance from point `i`
/// to its `k_sigma`-th nearest neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodGraph {
    pub k: usize,
    pub k_sigma: usize,
    pub neighbors: Vec<Vec<usize>>,
    pub distances: Vec<Vec<f64>>,
    pub bandwidths: Vec<f64>,
    pub adjacency: Vec<Vec<Edge>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub to: usize,
    pub distance: f64,
}

impl NeighborhoodGraph {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i]
            .binary_search_by_key(&j, |e| e.to)
            .is_ok()
    }

    /// Each undirected edge once, as `(i, j, distance)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .filter(move |e| e.to > i)
                .map(move |e| (i, e.to, e.distance))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Brute-force kNN search followed by union symmetrization.
pub fn build_knn_graph(cloud: &PointCloud, k: usize, k_sigma: usize) -> Result<NeighborhoodGraph> {
    let n = cloud.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidK { k, n });
    }
    if k_sigma == 0 || k_sigma > k {
        return Err(Error::InvalidInput(format!(
            "k_sigma={k_sigma} must satisfy 1 <= k_sigma <= k={k}"
        )));
    }

    let searched: Vec<Result<(Vec<usize>, Vec<f64>)>> = (0..n)
        .into_par_iter()
        .map(|i| nearest(cloud, i, k))
        .collect();
    let mut neighbors = Vec::with_capacity(n);
    let mut distances = Vec::with_capacity(n);
    for entry in searched {
        let (idx, dist) = entry?;
        neighbors.push(idx);
        distances.push(dist);
    }

    let bandwidths = distances.iter().map(|d| d[k_sigma - 1]).collect();

    let mut adjacency: Vec<Vec<Edge>> = vec![Vec::with_capacity(k); n];
    for (i, (idx, dist)) in neighbors.iter().zip(&distances).enumerate() {
        for (&j, &d) in idx.iter().zip(dist) {
            adjacency[i].push(Edge { to: j, distance: d });
            adjacency[j].push(Edge { to: i, distance: d });
        }
    }
    for row in &mut adjacency {
        row.sort_by_key(|e| e.to);
        row.dedup_by_key(|e| e.to);
    }

    Ok(NeighborhoodGraph {
        k,
        k_sigma,
        neighbors,
        distances,
        bandwidths,
        adjacency,
    })
}

fn nearest(cloud: &PointCloud, i: usize, k: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    let center = cloud.point(i);
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(cloud.len() - 1);
    for (j, p) in cloud.points().enumerate() {
        if j == i {
            continue;
        }
        let d2 = squared_distance(center, p);
        if d2 == 0.0 {
            return Err(Error::DuplicatePoints {
                first: i.min(j),
                second: i.max(j),
            });
        }
        candidates.push((d2, j));
    }
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, by_distance);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(by_distance);
    Ok(candidates
        .into_iter()
        .map(|(d2, j)| (j, d2.sqrt()))
        .unzip())
}

/// Largest absolute deviation of `JᵀJ` from the identity.
pub fn orthonormality_error(basis: &DMatrix<f64>) -> f64 {
    let gram = basis.transpose() * basis;
    let mut worst = 0.0_f64;
    for r in 0..gram.nrows() {
        for c in 0..gram.ncols() {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((gram[(r, c)] - target).abs());
        }
    }
    worst
}

/// Euclidean norm of the principal-angle vector between two subspaces.
///
/// Both bases must be column-orthonormal. When dimensions differ only the
/// `min(d_a, d_b)` canonical angles are used.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(Error::LengthMismatch {
            left: a.nrows(),
            right: b.nrows(),
        });
    }
    if a.ncols() == 0 || b.ncols() == 0 {
        return Err(Error::InvalidInput("basis must have at least one column".into()));
    }
    for basis in [a, b] {
        let deviation = orthonormality_error(basis);
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
    }
    Ok(angle_norm(&principal_angle_vector(a, b)))
}

pub(crate) fn angle_norm(angles: &[f64]) -> f64 {
    angles.iter().map(|t| t * t).sum::<f64>().sqrt()
}

/// Canonical angles in ascending order, no validation.
///
/// Cosines come from the singular values of `AᵀB` and sines from those of the
/// residual `B - A AᵀB`; pairing them through `atan2` keeps small angles
/// accurate where `arccos` alone loses half the digits.
pub(crate) fn principal_angle_vector(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let (wide, narrow) = if a.ncols() >= b.ncols() { (a, b) } else { (b, a) };

    if narrow.ncols() == 1 && wide.ncols() == 1 {
        let u = wide.column(0);
        let v = narrow.column(0);
        let c = u.dot(&v);
        let s = (v - u * c).norm();
        return vec![s.atan2(c.abs().min(1.0))];
    }

    let projected = wide.transpose() * narrow;
    let residual = narrow - wide * &projected;
    let mut cosines: Vec<f64> = projected
        .singular_values()
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    let mut sines: Vec<f64> = residual
        .singular_values()
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    cosines.sort_by(|x, y| y.total_cmp(x));
    sines.sort_by(|x, y| x.total_cmp(y));
    cosines
        .iter()
        .zip(&sines)
        .map(|(c, s)| s.atan2(*c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn cloud(rows: &[&[f64]]) -> PointCloud {
        PointCloud::from_rows(rows).unwrap()
    }

    #[test]
    fn rejects_non_finite() {
        assert!(PointCloud::new(2, vec![0.0, f64::NAN]).is_err());
        assert!(PointCloud::new(2, vec![0.0, 1.0, 2.0]).is_err());
        assert!(PointCloud::new(0, vec![]).is_err());
    }

    #[test]
    fn collinear_k1_breaks_ties_by_index() {
        let c = cloud(&[&[0.0], &[1.0], &[2.0]]);
        let g = build_knn_graph(&c, 1, 1).unwrap();
        assert_eq!(g.neighbors[1], vec![0]);
        let edges: Vec<(usize, usize)> = g.edges().map(|(i, j, _)| (i, j)).collect();
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn unit_square_bandwidths() {
        let c = cloud(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let g = build_knn_graph(&c, 2, 2).unwrap();
        for s in &g.bandwidths {
            assert_eq!(*s, 1.0);
        }
    }

    #[test]
    fn duplicate_points_rejected() {
        let c = cloud(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0]]);
        match build_knn_graph(&c, 1, 1) {
            Err(Error::DuplicatePoints { first: 0, second: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_k() {
        let c = cloud(&[&[0.0], &[1.0]]);
        assert!(matches!(build_knn_graph(&c, 2, 1), Err(Error::InvalidK { k: 2, n: 2 })));
        assert!(matches!(build_knn_graph(&c, 0, 1), Err(Error::InvalidK { .. })));
        assert!(build_knn_graph(&c, 1, 2).is_err());
    }

    #[test]
    fn angle_examples() {
        let e12 = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(principal_angles(&e12, &e12).unwrap(), 0.0);

        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!((principal_angles(&e1, &e2).unwrap() - FRAC_PI_2).abs() < 1e-15);

        let diag = DMatrix::from_column_slice(2, 1, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
        assert!((principal_angles(&e1, &diag).unwrap() - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn unequal_dimensions_use_min_angles() {
        let plane = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let z = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert!((principal_angles(&plane, &z).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!(principal_angles(&z, &plane).unwrap() - FRAC_PI_2 < 1e-15);
        assert!(principal_angles(&plane, &x).unwrap() < 1e-15);
    }

    #[test]
    fn not_orthonormal() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert!(matches!(principal_angles(&a, &b), Err(Error::NotOrthonormal { .. })));
    }
}
