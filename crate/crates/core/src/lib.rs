//! Co-segmentation of image collections that share an object class.
//!
//! The engine consumes per-image patch-descriptor grids (produced offline by a
//! vision transformer) together with the RGB images, and produces one binary
//! object mask per image:
//!
//! 1. [`relevance`] fits a class-level principal direction over every patch
//!    descriptor of the class and turns it into per-image relevance heatmaps
//!    and seed vectors.
//! 2. [`spectral`] builds a two-valued cosine affinity graph per image, solves
//!    the generalized Laplacian eigensystem and thresholds the seed-biased
//!    combination of the low eigenvectors into a coarse patch mask.
//! 3. [`grabcut`] upsamples the coarse mask and refines it with iterative
//!    GMM colour models and exact s-t min-cuts.
//! 4. [`metrics`] scores masks with Jaccard, pixel accuracy, MAE, max
//!    F-measure and S-measure.
//!
//! [`pipeline`] wires these stages together per class and implements the
//! ablation, robustness and leave-one-out protocols. [`tensor_io`] owns the
//! on-disk feature-pack format and the synthetic fixtures used by the tests.

pub mod error;
pub mod grabcut;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod relevance;
pub mod spectral;
pub mod tensor_io;

pub use error::{Error, Result};
