//! Spectral relaxation of the flatness-penalized normalized cut.
//!
//! `L = D − W`, the first `n_c` generalized eigenvectors of `L e = λ D e`,
//! then K-means on the rows of those eigenvectors.

mod eigen;

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::affinity::{EdgeAngles, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::geometry::{build_knn_graph, NeighborhoodGraph, PointCloud};
use crate::kmeans::kmeans;
use crate::local_tangent::{estimate_tangent_with, DimMode, TangentFrame, WeightConfig};
use crate::outlier::{detect_outliers, OutlierMode, OutlierReport};

/// Residual target for the symmetric reduced problem.
const EIGEN_TOL: f64 = 1e-10;
/// Acceptance bound `‖L e − λ D e‖ ≤ RESIDUAL_BOUND · ‖D e‖`.
pub const RESIDUAL_BOUND: f64 = 1e-6;

/// Unnormalized graph Laplacian `diag(degrees) − W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    pub degrees: Vec<f64>,
    weights: SimilarityMatrix,
}

impl Laplacian {
    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    /// `y = L x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let off: f64 = self.weights.row(i).iter().map(|&(j, w)| w * x[j]).sum();
            *yi = self.degrees[i] * x[i] - off;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = -self.weights.to_dense();
        for (i, d) in self.degrees.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }
}

pub fn laplacian(w: &SimilarityMatrix) -> Result<Laplacian> {
    let degrees = w.degrees();
    if let Some(vertex) = degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::IsolatedVertex { vertex });
    }
    Ok(Laplacian {
        degrees,
        weights: w.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// `n × n_c`; column `h` is the generalized eigenvector for `eigenvalues[h]`,
    /// scaled so that `eᵀ D e = 1`.
    pub vectors: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

impl SpectralEmbedding {
    /// Row-major copy of the embedding rows.
    pub fn rows(&self) -> Vec<f64> {
        let (n, c) = self.vectors.shape();
        let mut out = Vec::with_capacity(n * c);
        for i in 0..n {
            for h in 0..c {
                out.push(self.vectors[(i, h)]);
            }
        }
        out
    }
}

/// First `n_c` solutions of `L e = λ D e`, via `D^{-1/2} L D^{-1/2}`.
pub fn generalized_eigvecs(l: &Laplacian, n_c: usize) -> Result<SpectralEmbedding> {
    let n = l.len();
    if n_c == 0 || n_c > n {
        return Err(Error::InvalidInput(format!("n_c={n_c} must satisfy 1 <= n_c <= n={n}")));
    }
    if let Some(vertex) = l.degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::IsolatedVertex { vertex });
    }
    let inv_sqrt: Vec<f64> = l.degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let reduced = |x: &[f64], y: &mut [f64]| {
        let scaled: Vec<f64> = x.iter().zip(&inv_sqrt).map(|(v, s)| v * s).collect();
        l.apply(&scaled, y);
        for (yi, s) in y.iter_mut().zip(&inv_sqrt) {
            *yi *= s;
        }
    };
    let pairs = eigen::smallest_eigenpairs(&reduced, n, n_c, EIGEN_TOL)?;

    let mut vectors = DMatrix::zeros(n, n_c);
    let mut lx = vec![0.0; n];
    for (h, (u, &lambda)) in pairs.vectors.iter().zip(&pairs.values).enumerate() {
        let mut e: Vec<f64> = u.iter().zip(&inv_sqrt).map(|(v, s)| v * s).collect();
        crate::local_tangent::fix_sign(&mut e);
        l.apply(&e, &mut lx);
        let mut residual = 0.0;
        let mut de_norm = 0.0;
        for i in 0..n {
            let de = l.degrees[i] * e[i];
            residual += (lx[i] - lambda * de).powi(2);
            de_norm += de * de;
        }
        if residual.sqrt() > RESIDUAL_BOUND * de_norm.sqrt() {
            return Err(Error::ConvergenceFailure(format!(
                "eigenpair {h} residual {:e} exceeds bound",
                residual.sqrt() / de_norm.sqrt()
            )));
        }
        for (i, v) in e.into_iter().enumerate() {
            vectors[(i, h)] = v;
        }
    }
    Ok(SpectralEmbedding {
        vectors,
        eigenvalues: pairs.values,
    })
}

/// K-means over the embedding rows; returns `(labels, inertia)`.
pub fn kmeans_rows(
    embedding: &SpectralEmbedding,
    n_c: usize,
    replicates: usize,
    seed: u64,
) -> Result<(Vec<usize>, f64)> {
    let fit = kmeans(&embedding.rows(), embedding.vectors.ncols(), n_c, replicates, seed)?;
    Ok((fit.labels, fit.inertia))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub k: usize,
    /// Clamped to `k` when larger.
    pub k_sigma: usize,
    /// Neighbors used per tangent fit; `None` uses all `k`. Clamped to `k`.
    pub k_tangent: Option<usize>,
    pub dim: DimMode,
    pub weights: WeightConfig,
    /// `f64::INFINITY` disables the curvature kernel.
    pub sigma_c: f64,
    pub n_c: usize,
    pub outlier: Option<OutlierMode>,
    pub kmeans_replicates: usize,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 10,
            k_sigma: 7,
            k_tangent: None,
            dim: DimMode::Fixed(2),
            weights: WeightConfig::default(),
            sigma_c: 1.0,
            n_c: 2,
            outlier: None,
            kmeans_replicates: 100,
            seed: 0,
        }
    }
}

impl ClusterConfig {
    pub fn effective_k_sigma(&self) -> usize {
        self.k_sigma.min(self.k)
    }

    pub fn effective_k_tangent(&self) -> usize {
        self.k_tangent.unwrap_or(self.k).min(self.k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k_sigma == 0 || self.k_tangent == Some(0) {
            return Err(Error::Config("k, k_sigma and k_tangent must be >= 1".into()));
        }
        if self.n_c == 0 {
            return Err(Error::Config("n_c must be >= 1".into()));
        }
        if self.kmeans_replicates == 0 {
            return Err(Error::Config("kmeans_replicates must be >= 1".into()));
        }
        if !(self.sigma_c > 0.0) {
            return Err(Error::Config(format!("sigma_c must be > 0, got {}", self.sigma_c)));
        }
        if let DimMode::Fixed(0) = self.dim {
            return Err(Error::Config("intrinsic dimension must be >= 1".into()));
        }
        if let Some(OutlierMode::GivenRatio(r)) = self.outlier {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("outlier ratio {r} must lie in [0, 1)")));
            }
        }
        self.weights.validate()
    }
}

/// Graph, tangent frames and edge angles of one cloud.
///
/// Independent of `σ_c`, so a sweep over curvature scales can reuse it.
#[derive(Debug, Clone)]
pub struct LocalStructure {
    pub cloud: PointCloud,
    pub graph: NeighborhoodGraph,
    pub frames: Vec<TangentFrame>,
    pub angles: EdgeAngles,
    pub timings: Vec<(&'static str, Duration)>,
}

impl LocalStructure {
    pub fn build(cloud: PointCloud, config: &ClusterConfig) -> Result<Self> {
        let mut timings = Vec::new();
        let t = Instant::now();
        let graph = build_knn_graph(&cloud, config.k, config.effective_k_sigma())?;
        timings.push(("graph", t.elapsed()));
        let t = Instant::now();
        let frames = estimate_tangent_with(
            &cloud,
            &graph,
            &config.weights,
            config.dim,
            config.effective_k_tangent(),
        )?;
        timings.push(("tangent", t.elapsed()));
        let t = Instant::now();
        let angles = EdgeAngles::new(&graph, &frames)?;
        timings.push(("angles", t.elapsed()));
        Ok(Self {
            cloud,
            graph,
            frames,
            angles,
            timings,
        })
    }

    pub fn similarity(&self, sigma_c: f64) -> Result<SimilarityMatrix> {
        self.angles.similarity(sigma_c)
    }

    fn max_intrinsic_dim(&self) -> usize {
        self.frames.iter().map(|f| f.intrinsic_dim).max().unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    /// Cluster id per input point; `None` for filtered outliers.
    pub labels: Vec<Option<usize>>,
    pub inlier_mask: Vec<bool>,
    /// Present when outlier filtering ran.
    pub outliers: Option<OutlierReport>,
    pub embedding: SpectralEmbedding,
    pub kmeans_inertia: f64,
    pub timings: Vec<(&'static str, Duration)>,
}

impl ClusterResult {
    /// Labels with outliers mapped to `sentinel`.
    pub fn labels_or(&self, sentinel: i64) -> Vec<i64> {
        self.labels
            .iter()
            .map(|l| l.map_or(sentinel, |v| v as i64))
            .collect()
    }
}

/// End to end: graph, tangents, affinity, optional outlier filtering with a
/// rebuild on the inliers, Laplacian, embedding and K-means.
pub fn cluster(cloud: &PointCloud, config: &ClusterConfig) -> Result<ClusterResult> {
    config.validate()?;
    let local = LocalStructure::build(cloud.clone(), config)?;
    cluster_prepared(&local, config)
}

/// Same as [`cluster`] with the σ_c-independent stages already computed.
pub fn cluster_prepared(local: &LocalStructure, config: &ClusterConfig) -> Result<ClusterResult> {
    config.validate()?;
    let n = local.cloud.len();
    let mut timings = local.timings.clone();
    let t = Instant::now();
    let w = local.similarity(config.sigma_c)?;
    timings.push(("affinity", t.elapsed()));

    let mut outliers = None;
    let mut rebuilt = None;
    if let Some(mode) = config.outlier {
        let t = Instant::now();
        let report = detect_outliers(&w, mode)?;
        timings.push(("outlier", t.elapsed()));
        if report.outlier_count() > 0 {
            let keep = report.inlier_indices();
            let d = match config.dim {
                DimMode::Fixed(d) => d,
                DimMode::Auto => local.max_intrinsic_dim(),
            };
            let required = config.n_c * (d + 1);
            if keep.len() < required {
                return Err(Error::InsufficientInliers {
                    available: keep.len(),
                    required,
                });
            }
            let t = Instant::now();
            let sub = LocalStructure::build(local.cloud.subset(&keep)?, config)?;
            let w_sub = sub.similarity(config.sigma_c)?;
            timings.push(("rebuild", t.elapsed()));
            rebuilt = Some((keep, w_sub));
        }
        outliers = Some(report);
    }

    let (kept, w_final) = match rebuilt {
        Some((keep, w_sub)) => (keep, w_sub),
        None => ((0..n).collect(), w),
    };

    let t = Instant::now();
    let l = laplacian(&w_final)?;
    let embedding = generalized_eigvecs(&l, config.n_c)?;
    timings.push(("eigen", t.elapsed()));
    let t = Instant::now();
    let (sub_labels, inertia) = kmeans_rows(&embedding, config.n_c, config.kmeans_replicates, config.seed)?;
    timings.push(("kmeans", t.elapsed()));

    let mut labels = vec![None; n];
    let mut inlier_mask = vec![false; n];
    for (&i, &l) in kept.iter().zip(&sub_labels) {
        labels[i] = Some(l);
        inlier_mask[i] = true;
    }
    Ok(ClusterResult {
        labels,
        inlier_mask,
        outliers,
        embedding,
        kmeans_inertia: inertia,
        timings,
    })
}
