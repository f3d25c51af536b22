use std::path::PathBuf;

/// Errors produced by any stage of the manifold-clustering pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("points {first} and {second} are identical")]
    DuplicatePoints { first: usize, second: usize },

    #[error("neighborhood size k={k} must satisfy 1 <= k < n={n}")]
    InvalidK { k: usize, n: usize },

    #[error("basis is not column-orthonormal (max |J^T J - I| = {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("local structure matrix at point {point} has numerical rank below the requested dimension {requested}")]
    DegenerateNeighborhood { point: usize, requested: usize },

    #[error("cluster {cluster} has zero intra-cluster similarity")]
    EmptyClusterDenominator { cluster: usize },

    #[error("vertex {vertex} has zero degree")]
    IsolatedVertex { vertex: usize },

    #[error("eigensolver did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("only {available} inliers remain, at least {required} are needed")]
    InsufficientInliers { available: usize, required: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure class, used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::InvalidK { .. } | Error::InvalidGeometry(_) => {
                ErrorClass::Config
            }
            Error::Io { .. } => ErrorClass::Io,
            _ => ErrorClass::Numeric,
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::DuplicatePoints { .. } => "DuplicatePoints",
            Error::InvalidK { .. } => "InvalidK",
            Error::NotOrthonormal { .. } => "NotOrthonormal",
            Error::DegenerateNeighborhood { .. } => "DegenerateNeighborhood",
            Error::EmptyClusterDenominator { .. } => "EmptyClusterDenominator",
            Error::IsolatedVertex { .. } => "IsolatedVertex",
            Error::ConvergenceFailure(_) => "ConvergenceFailure",
            Error::InsufficientInliers { .. } => "InsufficientInliers",
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::Config(_) => "Config",
            Error::Io { .. } => "Io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
