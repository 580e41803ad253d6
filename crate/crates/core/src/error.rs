use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("malformed image data: {0}")]
    Malformed(String),

    #[error("image has zero area")]
    ZeroArea,

    #[error("expected a {expected}-channel image, got {actual} channel(s)")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("image of {width}x{height} is smaller than the {kernel}x{kernel} kernel")]
    TooSmall {
        width: usize,
        height: usize,
        kernel: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// No gradient survived, so no circle can be voted for.
    #[error("no usable gradients; nothing to detect")]
    EmptyDetection,

    /// Fewer reference descriptors than the classifier needs.
    #[error("need at least {needed} reference circles, found {found}")]
    NoReferences { needed: usize, found: usize },

    #[error("non-finite potential at {0}")]
    NonFinite(String),

    #[error("energy is not submodular: {0}")]
    NonSubmodular(String),

    #[error("{nodes} nodes exceed the exhaustive-search limit of {max}")]
    TooManyNodes { nodes: usize, max: usize },

    #[error("could not place {requested} disks without overlap after {attempts} attempts")]
    InfeasiblePacking { requested: usize, attempts: usize },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// Process exit status for this failure: 3 when classification has no
    /// reference to work from, 2 for bad input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoReferences { .. } => 3,
            Error::Unwritable { .. } | Error::NonFinite(_) | Error::NonSubmodular(_) => 1,
            _ => 2,
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Unreadable { .. } => "unreadable",
            Error::Unwritable { .. } => "unwritable",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::Malformed(_) => "malformed",
            Error::ZeroArea => "zero_area",
            Error::ChannelMismatch { .. } => "channel_mismatch",
            Error::TooSmall { .. } => "too_small",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EmptyDetection => "empty_detection",
            Error::NoReferences { .. } => "classification_unavailable",
            Error::NonFinite(_) => "non_finite",
            Error::NonSubmodular(_) => "non_submodular",
            Error::TooManyNodes { .. } => "too_many_nodes",
            Error::InfeasiblePacking { .. } => "infeasible_packing",
            Error::Config(_) => "config",
        }
    }
}
