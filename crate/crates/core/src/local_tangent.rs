//! Local tangent estimation by curvature-weighted low-rank factorization.
//!
//! Each neighbor of a point is weighted by the inverse variance of its
//! integrated error, `1 / (σ_n² + σ²·α(r))`, where `r` is its distance to the
//! center. The tangent frame is spanned by the leading eigenvectors of the
//! weighted local structure matrix `T = X̃ S Sᵀ X̃ᵀ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NeighborhoodGraph, PointCloud};

/// Growth model of the Taylor error variance with neighbor distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alpha {
    /// `α ≡ 0`; every neighbor gets weight `1/σ_n²` (plain local PCA).
    Constant,
    /// `α(r) = r²`
    Quadratic,
    /// `α(r) = r⁴`
    Quartic,
}

impl Alpha {
    pub fn eval(self, r: f64) -> f64 {
        match self {
            Alpha::Constant => 0.0,
            Alpha::Quadratic => r * r,
            Alpha::Quartic => (r * r) * (r * r),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Alpha::Constant => "constant",
            Alpha::Quadratic => "quadratic",
            Alpha::Quartic => "quartic",
        }
    }
}

impl std::str::FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" => Ok(Alpha::Constant),
            "quadratic" => Ok(Alpha::Quadratic),
            "quartic" => Ok(Alpha::Quartic),
            other => Err(Error::Config(format!(
                "unknown alpha kernel `{other}` (expected constant, quadratic or quartic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    /// Noise scale σ_n.
    pub sigma_n: f64,
    /// Taylor-error scale σ.
    pub sigma_e: f64,
    pub alpha: Alpha,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            sigma_n: 1.0,
            sigma_e: 1.0,
            alpha: Alpha::Quadratic,
        }
    }
}

impl WeightConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma_n", self.sigma_n), ("sigma_e", self.sigma_e)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn weight(&self, r: f64) -> f64 {
        1.0 / (self.sigma_n * self.sigma_n + self.sigma_e * self.sigma_e * self.alpha.eval(r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DimMode {
    Fixed(usize),
    /// Largest eigengap of the local structure matrix.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    pub point_index: usize,
    /// `D × d` orthonormal basis.
    pub basis: DMatrix<f64>,
    /// Eigenvalues of the local structure matrix, descending, clamped at 0.
    pub spectrum: Vec<f64>,
    pub intrinsic_dim: usize,
}

/// Diagonal of `S` for one neighborhood.
pub fn taylor_weights<P: AsRef<[f64]>>(
    center: &[f64],
    neighborhood: &[P],
    cfg: &WeightConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    neighborhood
        .iter()
        .map(|p| {
            let p = p.as_ref();
            if p.len() != center.len() {
                return Err(Error::LengthMismatch {
                    left: center.len(),
                    right: p.len(),
                });
            }
            let r = crate::geometry::squared_distance(center, p).sqrt();
            let w = cfg.weight(r);
            if w.is_finite() && w > 0.0 {
                Ok(w)
            } else {
                Err(Error::InvalidInput(format!("weight {w} at distance {r} is not positive and finite")))
            }
        })
        .collect()
}

/// `T = X̃ S Sᵀ X̃ᵀ` for the center-subtracted neighborhood `X̃`.
pub fn local_structure_matrix<P: AsRef<[f64]>>(
    center: &[f64],
    neighborhood: &[P],
    weights: &[f64],
) -> Result<DMatrix<f64>> {
    if neighborhood.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: neighborhood.len(),
            right: weights.len(),
        });
    }
    let dim = center.len();
    let m = neighborhood.len();
    // Columns of X̃ S.
    let mut scaled = DMatrix::<f64>::zeros(dim, m);
    for (j, (p, w)) in neighborhood.iter().zip(weights).enumerate() {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(Error::LengthMismatch { left: dim, right: p.len() });
        }
        for r in 0..dim {
            scaled[(r, j)] = (p[r] - center[r]) * w;
        }
    }
    let t = &scaled * scaled.transpose();
    Ok((&t + t.transpose()) * 0.5)
}

/// Index of the largest drop in a descending spectrum, as a dimension.
pub fn eigengap_dimension(spectrum: &[f64]) -> usize {
    if spectrum.len() <= 1 {
        return spectrum.len().max(1);
    }
    let mut best = 1;
    let mut best_gap = f64::NEG_INFINITY;
    for g in 1..spectrum.len() {
        let gap = spectrum[g - 1] - spectrum[g];
        if gap > best_gap {
            best_gap = gap;
            best = g;
        }
    }
    best
}

/// Fits a tangent frame to one neighborhood.
pub fn fit_frame<P: AsRef<[f64]>>(
    point_index: usize,
    center: &[f64],
    neighborhood: &[P],
    cfg: &WeightConfig,
    dim_mode: DimMode,
) -> Result<TangentFrame> {
    let ambient = center.len();
    if neighborhood.is_empty() {
        return Err(Error::DegenerateNeighborhood {
            point: point_index,
            requested: match dim_mode {
                DimMode::Fixed(d) => d,
                DimMode::Auto => 1,
            },
        });
    }
    let weights = taylor_weights(center, neighborhood, cfg)?;
    let t = local_structure_matrix(center, neighborhood, &weights)?;
    let trace = t.trace();

    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..ambient).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let spectrum: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();

    let max_dim = ambient.min(neighborhood.len());
    let dim = match dim_mode {
        DimMode::Fixed(d) => d,
        DimMode::Auto => eigengap_dimension(&spectrum).min(max_dim),
    };
    if dim == 0 || dim > max_dim {
        return Err(Error::InvalidInput(format!(
            "intrinsic dimension {dim} must lie in [1, {max_dim}] at point {point_index}"
        )));
    }
    let floor = 1e-12 * trace;
    if !(trace > 0.0) || spectrum[..dim].iter().any(|&v| v <= floor) {
        return Err(Error::DegenerateNeighborhood {
            point: point_index,
            requested: dim,
        });
    }

    let mut basis = DMatrix::<f64>::zeros(ambient, dim);
    for (c, &src) in order.iter().take(dim).enumerate() {
        let mut col: DVector<f64> = eig.eigenvectors.column(src).into_owned();
        fix_sign(col.as_mut_slice());
        basis.set_column(c, &col);
    }

    Ok(TangentFrame {
        point_index,
        basis,
        spectrum,
        intrinsic_dim: dim,
    })
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut pivot = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[pivot].abs() {
            pivot = i;
        }
    }
    if v.get(pivot).is_some_and(|&p| p < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Tangent frames for every point, using its `k` nearest neighbors.
pub fn estimate_tangent(
    cloud: &PointCloud,
    graph: &NeighborhoodGraph,
    cfg: &WeightConfig,
    dim_mode: DimMode,
) -> Result<Vec<TangentFrame>> {
    estimate_tangent_with(cloud, graph, cfg, dim_mode, graph.k)
}

/// Like [`estimate_tangent`] but fits each frame to only the `m` nearest
/// entries of the point's kNN list (`1 <= m <= k`).
pub fn estimate_tangent_with(
    cloud: &PointCloud,
    graph: &NeighborhoodGraph,
    cfg: &WeightConfig,
    dim_mode: DimMode,
    m: usize,
) -> Result<Vec<TangentFrame>> {
    cfg.validate()?;
    if m == 0 || m > graph.k {
        return Err(Error::Config(format!(
            "tangent neighborhood size {m} must satisfy 1 <= m <= k = {}",
            graph.k
        )));
    }
    if graph.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            left: cloud.len(),
            right: graph.len(),
        });
    }
    if let DimMode::Fixed(d) = dim_mode {
        let limit = cloud.dim().min(m);
        if d == 0 || d > limit {
            return Err(Error::Config(format!(
                "fixed intrinsic dimension d={d} must satisfy 1 <= d <= min(D, m) = {limit}"
            )));
        }
    }
    let frames: Vec<Result<TangentFrame>> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let neighborhood: Vec<&[f64]> =
                graph.neighbors[i][..m].iter().map(|&j| cloud.point(j)).collect();
            fit_frame(i, cloud.point(i), &neighborhood, cfg, dim_mode)
        })
        .collect();
    frames.into_iter().collect()
}
