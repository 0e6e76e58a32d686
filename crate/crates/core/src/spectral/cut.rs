use ndarray::Array2;
use serde::Serialize;

use super::{AffinityGraph, EigenBasis};
use crate::relevance::{RelevanceMap, SeedVector};
use crate::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 1e-4;

/// Seeds whose D-correlation with every retained eigenvector is below this
/// fraction of their D-norm carry no usable bias.
const MIN_SEED_CORRELATION: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CutMethod {
    /// Threshold of the seed-weighted eigenvector combination.
    Biased,
    /// Threshold of the second generalized eigenvector.
    Plain,
}

/// Patch-resolution foreground mask.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseMask {
    pub image_id: String,
    pub mask: Array2<bool>,
    /// The biased vector `x_hat` on the grid, when the biased cut ran.
    pub biased_vector: Option<Array2<f64>>,
    pub method: CutMethod,
    /// Set when the biased threshold produced a one-sided mask and the plain
    /// cut was used instead.
    pub degenerate: bool,
}

impl CoarseMask {
    pub fn shape(&self) -> (usize, usize) {
        self.mask.dim()
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

fn above_mean(values: &[f64]) -> Vec<bool> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|&v| v > mean).collect()
}

fn is_one_sided(side: &[bool]) -> bool {
    side.iter().all(|&b| b) || side.iter().all(|&b| !b)
}

fn to_grid(shape: (usize, usize), flat: Vec<bool>) -> Array2<bool> {
    Array2::from_shape_vec(shape, flat).expect("length matches grid")
}

/// Plain N-cut: threshold the first non-trivial eigenvector at its mean.
///
/// With a `guide` (one non-negative score per node) the foreground is the
/// side holding the highest-scoring node; otherwise it is the side with the
/// smaller average degree.
pub fn ncut_mask_guided(basis: &EigenBasis, guide: Option<&[f64]>) -> CoarseMask {
    let u = basis.eigenvector(0).to_vec();
    let above = above_mean(&u);
    let degenerate = is_one_sided(&above);

    let foreground_is_above = match guide {
        Some(scores) => {
            let best = scores
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc },
                )
                .0;
            above[best]
        }
        None => {
            let (mut sum_a, mut n_a, mut sum_b, mut n_b) = (0.0, 0usize, 0.0, 0usize);
            for (&side, &d) in above.iter().zip(basis.degree()) {
                if side {
                    sum_a += d;
                    n_a += 1;
                } else {
                    sum_b += d;
                    n_b += 1;
                }
            }
            let avg = |s: f64, n: usize| if n == 0 { f64::INFINITY } else { s / n as f64 };
            avg(sum_a, n_a) <= avg(sum_b, n_b)
        }
    };
    let mask = above.iter().map(|&a| a == foreground_is_above).collect();
    CoarseMask {
        image_id: basis.image_id().to_owned(),
        mask: to_grid(basis.shape(), mask),
        biased_vector: None,
        method: CutMethod::Plain,
        degenerate,
    }
}

/// Plain N-cut with the foreground side picked by a relevance map, which is
/// resampled onto the basis grid when the two differ by an integer factor.
pub fn ncut_mask(basis: &EigenBasis, relevance: Option<&RelevanceMap>) -> Result<CoarseMask> {
    match relevance {
        Some(map) => {
            let guide = map.resample(basis.shape())?;
            let guide: Vec<f64> = guide.iter().copied().collect();
            Ok(ncut_mask_guided(basis, Some(&guide)))
        }
        None => Ok(ncut_mask_guided(basis, None)),
    }
}

/// Biased N-cut weights `w_k = u_k^T (D s) / (lambda_k - gamma)`.
pub fn biased_weights(basis: &EigenBasis, graph: &AffinityGraph, seed: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let n = basis.nodes();
    if graph.len() != n || seed.len() != n {
        return Err(Error::Shape(format!(
            "basis has {n} nodes, graph {}, seed {}",
            graph.len(),
            seed.len()
        )));
    }
    let lambda2 = basis.eigenvalues()[0];
    if !(gamma < lambda2) {
        return Err(Error::GammaNotBelowSpectrum { gamma, lambda2 });
    }
    let degree_seed: Vec<f64> = seed.iter().zip(graph.degree()).map(|(s, d)| s * d).collect();
    Ok(basis
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let u = basis.eigenvector(k);
            let corr: f64 = u.iter().zip(&degree_seed).map(|(a, b)| a * b).sum();
            corr / (lambda - gamma)
        })
        .collect())
}

/// `x_hat = sum_k w_k u_k`.
pub fn biased_vector(basis: &EigenBasis, weights: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; basis.nodes()];
    for (k, &w) in weights.iter().enumerate() {
        for (xi, ui) in x.iter_mut().zip(basis.eigenvector(k)) {
            *xi += w * ui;
        }
    }
    x
}

/// Biased N-cut from raw non-negative seed weights on the basis grid.
///
/// The weights are normalized to unit sum first, so any positive rescaling
/// gives the same mask. `x_hat` is thresholded at its mean and the side
/// holding more seed mass is foreground. A one-sided result falls back to the
/// plain cut guided by the seed.
pub fn biased_ncut_mask_weights(
    basis: &EigenBasis,
    graph: &AffinityGraph,
    weights: &Array2<f64>,
    gamma: f64,
) -> Result<CoarseMask> {
    if weights.dim() != basis.shape() {
        return Err(Error::Shape(format!(
            "seed grid {:?} does not match segmentation grid {:?}",
            weights.dim(),
            basis.shape()
        )));
    }
    let total: f64 = weights.sum();
    if !(total > 0.0) || weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidArgument(
            "biased cut needs a non-empty, non-negative seed".into(),
        ));
    }
    let seed: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let w = biased_weights(basis, graph, &seed, gamma)?;
    let x_hat = biased_vector(basis, &w);
    let above = above_mean(&x_hat);
    let x_grid = Array2::from_shape_vec(basis.shape(), x_hat).expect("length matches grid");

    // |u_k^T D s| <= |s|_D since every u_k has unit D-norm.
    let seed_norm = seed
        .iter()
        .zip(graph.degree())
        .map(|(s, d)| s * s * d)
        .sum::<f64>()
        .sqrt();
    let max_corr = w
        .iter()
        .zip(basis.eigenvalues())
        .map(|(wk, lambda)| (wk * (lambda - gamma)).abs())
        .fold(0.0, f64::max);
    let uncorrelated = max_corr <= MIN_SEED_CORRELATION * seed_norm;

    if uncorrelated || is_one_sided(&above) {
        let mut fallback = ncut_mask_guided(basis, Some(&seed));
        fallback.degenerate = true;
        fallback.biased_vector = Some(x_grid);
        return Ok(fallback);
    }

    let (mut mass_above, mut mass_below) = (0.0, 0.0);
    for (&side, &s) in above.iter().zip(&seed) {
        if side {
            mass_above += s;
        } else {
            mass_below += s;
        }
    }
    let foreground_is_above = mass_above >= mass_below;
    let mask = above.iter().map(|&a| a == foreground_is_above).collect();
    Ok(CoarseMask {
        image_id: basis.image_id().to_owned(),
        mask: to_grid(basis.shape(), mask),
        biased_vector: Some(x_grid),
        method: CutMethod::Biased,
        degenerate: false,
    })
}

/// Biased N-cut for a seed vector. Empty seeds are rejected; callers use
/// [`ncut_mask`] for them.
pub fn biased_ncut_mask(
    basis: &EigenBasis,
    graph: &AffinityGraph,
    seed: &SeedVector,
    gamma: f64,
) -> Result<CoarseMask> {
    if seed.is_empty() {
        return Err(Error::InvalidArgument("empty seed".into()));
    }
    biased_ncut_mask_weights(basis, graph, seed.weights(), gamma)
}
