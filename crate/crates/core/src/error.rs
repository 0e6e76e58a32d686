use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },

    #[error("tensor file {path}: expected {expected} bytes, found {found}")]
    SizeMismatch { path: PathBuf, expected: u64, found: u64 },

    #[error(
        "image {image_id}: grid {grid_rows}x{grid_cols} with patch size {patch_size_px} \
         does not tile a {image_height_px}x{image_width_px} image"
    )]
    Geometry {
        image_id: String,
        grid_rows: usize,
        grid_cols: usize,
        patch_size_px: usize,
        image_height_px: usize,
        image_width_px: usize,
    },

    #[error("image {image_id}: non-finite feature value at flat index {index}")]
    NonFinite { image_id: String, index: usize },

    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("duplicate image id {0}")]
    DuplicateImage(String),

    #[error("image {path}: {reason}")]
    Image { path: PathBuf, reason: String },

    #[error("degenerate relevance model: all descriptors are identical")]
    DegenerateModel,

    #[error("image {image_id}: zero-norm descriptor at patch {patch}")]
    ZeroNorm { image_id: String, patch: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("no non-zero generalized eigenpairs available (graph of {nodes} nodes)")]
    InsufficientSpectrum { nodes: usize },

    #[error("gamma {gamma} must be below the smallest non-zero eigenvalue {lambda2}")]
    GammaNotBelowSpectrum { gamma: f64, lambda2: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("feature packs disagree: {0}")]
    PackMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config: {0}")]
    Config(String),

    #[error("missing ground truth for: {}", .0.join(", "))]
    MissingGroundTruth(Vec<String>),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
