use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid {height}x{width} too coarse: {what} needs height >= {min_height} and width >= {min_width}")]
    InsufficientResolution {
        what: String,
        height: usize,
        width: usize,
        min_height: usize,
        min_width: usize,
    },

    #[error("grid mismatch: expected {expected:?}, got {actual:?}")]
    GridMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("bandwidth mismatch: expected {expected}, got {actual}")]
    BandwidthMismatch { expected: usize, actual: usize },

    #[error("moment order ({i},{j},{k}) exceeds table maximum {max_order}")]
    OrderOutOfRange {
        i: usize,
        j: usize,
        k: usize,
        max_order: usize,
    },

    #[error("moment ({i},{j},{k}) has imaginary residue {imag:e} against real part {real:e}")]
    ImaginaryResidue {
        i: usize,
        j: usize,
        k: usize,
        real: f64,
        imag: f64,
    },

    #[error("mask fit residual {residual:.4} at degree {degree} above tolerance {tolerance}; {}", match .adequate_degree {
        Some(d) => format!("degree {d} is the smallest adequate one"),
        None => format!("no degree up to {max_degree} is adequate"),
    })]
    MaskFit {
        residual: f64,
        tolerance: f64,
        degree: usize,
        adequate_degree: Option<usize>,
        max_degree: usize,
    },

    #[error("triplet cloud is degenerate (cross-covariance rank {rank})")]
    DegenerateCloud { rank: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("matrix is not a rotation (orthonormality error {0:e})")]
    NotRotation(f64),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },

    #[error("model has not been trained")]
    Untrained,

    #[error("unknown {kind} '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("cache format error: {0}")]
    CacheFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("data error: {0}")]
    Data(String),
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidArgument(_)
            | Error::InsufficientResolution { .. }
            | Error::GridMismatch { .. }
            | Error::BandwidthMismatch { .. }
            | Error::OrderOutOfRange { .. }
            | Error::MaskFit { .. }
            | Error::UnknownStrategy { .. }
            | Error::Untrained => ErrorCategory::Config,
            Error::Io { .. }
            | Error::Image { .. }
            | Error::Json { .. }
            | Error::CacheFormat(_)
            | Error::LengthMismatch(..)
            | Error::Data(_) => ErrorCategory::Data,
            Error::ImaginaryResidue { .. }
            | Error::DegenerateCloud { .. }
            | Error::NotRotation(_)
            | Error::NanLoss { .. } => ErrorCategory::Numerical,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
