//! Normalized-cut segmentation of one image's patch graph.
//!
//! The graph is dense and two-valued: patches whose descriptors have cosine
//! similarity at least `tau` get affinity 1, every other pair gets `epsilon`
//! so the graph stays connected. Masks come either from thresholding the
//! second generalized eigenvector (plain N-cut) or from thresholding a
//! seed-weighted combination of the lowest non-trivial eigenvectors
//! (biased N-cut).

mod affinity;
mod cut;
mod eigen;

pub use affinity::{build_affinity, AffinityGraph, DEFAULT_EPSILON, DEFAULT_TAU};
pub use cut::{
    biased_ncut_mask, biased_ncut_mask_weights, biased_vector, biased_weights, ncut_mask, ncut_mask_guided, CoarseMask,
    CutMethod, DEFAULT_GAMMA,
};
pub use eigen::{solve_generalized, EigenBasis, DEFAULT_EIGENVECTORS, DEFAULT_ZERO_TOLERANCE};
