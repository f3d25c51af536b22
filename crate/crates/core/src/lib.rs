//! Robust multiple-manifold structure learning.
//!
//! Local stage: per-point tangent frames from a curvature-weighted local
//! structure matrix. Global stage: a distance × curvature affinity over a kNN
//! graph, random-walk outlier filtering, and spectral clustering of the
//! flatness-penalized normalized cut.

pub mod affinity;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod kmeans;
pub mod local_tangent;
pub mod outlier;
pub mod pipeline;
pub mod spectral;
pub mod synthetic;

pub use error::{Error, ErrorClass, Result};
pub use geometry::{build_knn_graph, principal_angles, NeighborhoodGraph, PointCloud};
pub use local_tangent::{estimate_tangent, Alpha, DimMode, TangentFrame, WeightConfig};
pub use spectral::{cluster, ClusterConfig, ClusterResult};
