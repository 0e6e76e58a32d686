//! Class relevance from the dominant principal direction of a class's patch
//! descriptors, and the seed vectors derived from it.
//!
//! The direction `xi` is the top eigenvector of the scatter matrix of all
//! centered descriptors of the class. Its sign is fixed so that most image
//! border patches project negatively (border patches are assumed to be mostly
//! background). Per image, projections are clipped at zero and divided by the
//! image maximum, giving a relevance map in `[0, 1]`.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use ndarray::Array2;
use serde::Serialize;

use crate::linalg::{canonicalize_sign, symmetric_eigen};
use crate::tensor_io::{ClassFeatureSet, PatchFeatureGrid};
use crate::{Error, Result};

/// Images used to fit the class direction when the class is larger.
pub const DEFAULT_MAX_IMAGES: usize = 90;
/// Softmax temperature for seed weights.
pub const DEFAULT_BETA: f64 = 0.5;

const DEGENERATE_SPREAD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// Mean and canonicalized dominant scatter direction, before sign fixing.
#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalDirection {
    pub mu: Vec<f64>,
    pub xi: Vec<f64>,
    /// Largest eigenvalue of the scatter matrix.
    pub eigenvalue: f64,
    pub n_descriptors: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelevanceModel {
    mu: Vec<f64>,
    xi: Vec<f64>,
    sigma: Sign,
    n_descriptors: usize,
}

impl RelevanceModel {
    pub fn from_direction(direction: PrincipalDirection, sigma: Sign) -> Self {
        Self {
            mu: direction.mu,
            xi: direction.xi,
            sigma,
            n_descriptors: direction.n_descriptors,
        }
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn sigma(&self) -> Sign {
        self.sigma
    }

    pub fn n_descriptors(&self) -> usize {
        self.n_descriptors
    }

    pub fn feature_dim(&self) -> usize {
        self.mu.len()
    }

    /// Signed projection `sigma * xi^T (s - mu)` of one descriptor.
    pub fn project(&self, descriptor: impl IntoIterator<Item = f64>) -> f64 {
        self.sigma.as_f64() * unsigned_projection(&self.mu, &self.xi, descriptor)
    }
}

fn unsigned_projection(mu: &[f64], xi: &[f64], descriptor: impl IntoIterator<Item = f64>) -> f64 {
    descriptor
        .into_iter()
        .zip(mu.iter().zip(xi))
        .map(|(s, (m, x))| x * (s - m))
        .sum()
}

/// Fits mean and dominant scatter direction over every patch of `grids`.
pub fn principal_direction(grids: &[&PatchFeatureGrid]) -> Result<PrincipalDirection> {
    let first = grids.first().ok_or(Error::Empty("no images to fit"))?;
    let d = first.feature_dim();
    if let Some(bad) = grids.iter().find(|g| g.feature_dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.feature_dim(),
        });
    }

    let n: usize = grids.iter().map(|g| g.len()).sum();
    let mut mu = vec![0.0f64; d];
    for g in grids {
        for row in g.features().rows() {
            mu.iter_mut().zip(row).for_each(|(m, &v)| *m += f64::from(v));
        }
    }
    mu.iter_mut().for_each(|m| *m /= n as f64);

    let mut scatter = Mat::<f64>::zeros(d, d);
    let mut spread = 0.0f64;
    for g in grids {
        let centered = Mat::<f64>::from_fn(g.len(), d, |i, j| f64::from(g.features()[[i, j]]) - mu[j]);
        for j in 0..d {
            for i in 0..g.len() {
                spread = spread.max(centered[(i, j)].abs());
            }
        }
        matmul(
            scatter.as_mut(),
            Accum::Add,
            centered.transpose(),
            centered.as_ref(),
            1.0,
            Par::Seq,
        );
    }
    if spread <= DEGENERATE_SPREAD {
        return Err(Error::DegenerateModel);
    }

    let (values, vectors) = symmetric_eigen(&scatter)?;
    let top = d - 1;
    let mut xi: Vec<f64> = (0..d).map(|i| vectors[(i, top)]).collect();
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    xi.iter_mut().for_each(|x| *x /= norm);
    canonicalize_sign(&mut xi);

    Ok(PrincipalDirection {
        mu,
        xi,
        eigenvalue: values[top],
        n_descriptors: n,
    })
}

/// Picks the sign that makes the majority of border patches project negatively.
///
/// Border projections are counted with `sigma = +1`; strictly more
/// non-negative than negative ones flips the sign. Ties keep `+1`.
pub fn sign_fix(direction: &PrincipalDirection, grids: &[&PatchFeatureGrid]) -> Sign {
    let (mut non_negative, mut negative) = (0usize, 0usize);
    for g in grids {
        for i in g.border_indices() {
            let p = unsigned_projection(&direction.mu, &direction.xi, g.feature(i).iter().map(|&v| f64::from(v)));
            if p >= 0.0 {
                non_negative += 1;
            } else {
                negative += 1;
            }
        }
    }
    if non_negative > negative {
        Sign::Negative
    } else {
        Sign::Positive
    }
}

/// Fits the class model on the given grids (all of them).
pub fn fit_relevance_model_on(grids: &[&PatchFeatureGrid]) -> Result<RelevanceModel> {
    let direction = principal_direction(grids)?;
    let sigma = sign_fix(&direction, grids);
    Ok(RelevanceModel::from_direction(direction, sigma))
}

/// Fits the class model on the first `max_images` images of `set`, in manifest order.
pub fn fit_relevance_model(set: &ClassFeatureSet, max_images: usize) -> Result<RelevanceModel> {
    if max_images == 0 {
        return Err(Error::InvalidArgument("max_images must be at least 1".into()));
    }
    let grids: Vec<&PatchFeatureGrid> = set.grids().iter().take(max_images).collect();
    fit_relevance_model_on(&grids)
}

/// Per-image projections and normalized relevance.
#[derive(Clone, Debug, PartialEq)]
pub struct RelevanceMap {
    image_id: String,
    projections: Array2<f64>,
    relevance: Array2<f64>,
    all_nonpositive: bool,
}

impl RelevanceMap {
    /// Normalizes raw projections: clip at zero, divide by the image maximum.
    pub fn from_projections(image_id: impl Into<String>, projections: Array2<f64>) -> Self {
        let max = projections.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let all_nonpositive = !(max > 0.0);
        let relevance = if all_nonpositive {
            Array2::zeros(projections.dim())
        } else {
            projections.mapv(|p| p.max(0.0) / max)
        };
        Self {
            image_id: image_id.into(),
            projections,
            relevance,
            all_nonpositive,
        }
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn shape(&self) -> (usize, usize) {
        self.relevance.dim()
    }

    pub fn projections(&self) -> &Array2<f64> {
        &self.projections
    }

    pub fn relevance(&self) -> &Array2<f64> {
        &self.relevance
    }

    /// True when no projection is positive, in which case relevance is all zero.
    pub fn all_nonpositive(&self) -> bool {
        self.all_nonpositive
    }

    pub fn support(&self) -> Array2<bool> {
        self.relevance.mapv(|r| r > 0.0)
    }

    /// Relevance on another grid: block replication when `target` is an
    /// integer multiple of this grid, block maximum when it is an integer
    /// divisor.
    pub fn resample(&self, target: (usize, usize)) -> Result<Array2<f64>> {
        let transfer = GridTransfer::between(self.shape(), target)?;
        Ok(transfer.apply(&self.relevance, f64::max))
    }
}

/// Relevance map of one image under `model`.
pub fn relevance_map(model: &RelevanceModel, grid: &PatchFeatureGrid) -> Result<RelevanceMap> {
    if grid.feature_dim() != model.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.feature_dim(),
            found: grid.feature_dim(),
        });
    }
    let (h, w) = grid.shape();
    let projections = Array2::from_shape_fn((h, w), |(r, c)| {
        model.project(grid.feature(r * w + c).iter().map(|&v| f64::from(v)))
    });
    Ok(RelevanceMap::from_projections(grid.image_id(), projections))
}

/// 2x2 binary erosion anchored at the top-left cell.
///
/// A cell survives iff it and its right, lower and lower-right neighbours are
/// all set; the last row and column never survive.
pub fn erode_2x2(support: &Array2<bool>) -> Array2<bool> {
    let (h, w) = support.dim();
    Array2::from_shape_fn((h, w), |(r, c)| {
        r + 1 < h
            && c + 1 < w
            && support[[r, c]]
            && support[[r, c + 1]]
            && support[[r + 1, c]]
            && support[[r + 1, c + 1]]
    })
}

/// Eroded support `{R > 0}` of a relevance map.
pub fn erode_support(map: &RelevanceMap) -> Array2<bool> {
    erode_2x2(&map.support())
}

/// Integer-factor mapping between two grids.
#[derive(Clone, Copy, Debug)]
enum GridTransfer {
    Identity,
    Replicate { fr: usize, fc: usize },
    Pool { fr: usize, fc: usize },
}

impl GridTransfer {
    fn between(source: (usize, usize), target: (usize, usize)) -> Result<Self> {
        let (sr, sc) = source;
        let (tr, tc) = target;
        if source == target {
            Ok(GridTransfer::Identity)
        } else if tr >= sr && tc >= sc && tr % sr == 0 && tc % sc == 0 {
            Ok(GridTransfer::Replicate {
                fr: tr / sr,
                fc: tc / sc,
            })
        } else if tr <= sr && tc <= sc && tr > 0 && tc > 0 && sr % tr == 0 && sc % tc == 0 {
            Ok(GridTransfer::Pool {
                fr: sr / tr,
                fc: sc / tc,
            })
        } else {
            Err(Error::Shape(format!(
                "cannot transfer a {sr}x{sc} grid onto {tr}x{tc}: not an integer factor"
            )))
        }
    }

    /// Replicates cells, or folds each source block with `fold`.
    fn apply(self, src: &Array2<f64>, fold: impl Fn(f64, f64) -> f64) -> Array2<f64> {
        let (sr, sc) = src.dim();
        match self {
            GridTransfer::Identity => src.clone(),
            GridTransfer::Replicate { fr, fc } => {
                Array2::from_shape_fn((sr * fr, sc * fc), |(r, c)| src[[r / fr, c / fc]])
            }
            GridTransfer::Pool { fr, fc } => Array2::from_shape_fn((sr / fr, sc / fc), |(r, c)| {
                let mut acc: Option<f64> = None;
                for i in r * fr..(r + 1) * fr {
                    for j in c * fc..(c + 1) * fc {
                        let v = src[[i, j]];
                        acc = Some(acc.map_or(v, |a| fold(a, v)));
                    }
                }
                acc.unwrap_or(0.0)
            }),
        }
    }
}

/// Non-negative seed weights over a segmentation grid; sums to one unless empty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedVector {
    image_id: String,
    grid_rows: usize,
    grid_cols: usize,
    #[serde(serialize_with = "serialize_grid")]
    weights: Array2<f64>,
    is_empty: bool,
}

fn serialize_grid<S: serde::Serializer>(grid: &Array2<f64>, serializer: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = grid.rows().into_iter().map(|r| r.to_vec()).collect();
    rows.serialize(serializer)
}

impl SeedVector {
    pub fn empty(image_id: impl Into<String>, shape: (usize, usize)) -> Self {
        Self {
            image_id: image_id.into(),
            grid_rows: shape.0,
            grid_cols: shape.1,
            weights: Array2::zeros(shape),
            is_empty: true,
        }
    }

    /// Normalizes arbitrary non-negative weights to unit sum.
    pub fn from_weights(image_id: impl Into<String>, weights: Array2<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "seed weights must be finite and non-negative".into(),
            ));
        }
        let (grid_rows, grid_cols) = weights.dim();
        let total: f64 = weights.sum();
        if total == 0.0 {
            return Ok(Self::empty(image_id, (grid_rows, grid_cols)));
        }
        Ok(Self {
            image_id: image_id.into(),
            grid_rows,
            grid_cols,
            weights: weights.mapv(|w| w / total),
            is_empty: false,
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.grid_rows, self.grid_cols)
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn is_empty(&self) -> bool {
        self.is_empty
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Softmax with temperature `beta` over the surviving cells, transferred onto
/// `target` and renormalized.
pub fn build_seed(map: &RelevanceMap, eroded: &Array2<bool>, beta: f64, target: (usize, usize)) -> Result<SeedVector> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    if eroded.dim() != map.shape() {
        return Err(Error::Shape(format!(
            "eroded support {:?} does not match relevance grid {:?}",
            eroded.dim(),
            map.shape()
        )));
    }
    let transfer = GridTransfer::between(map.shape(), target)?;

    let relevance = map.relevance();
    let survivors: Vec<f64> = relevance
        .iter()
        .zip(eroded.iter())
        .filter_map(|(&r, &keep)| keep.then_some(r))
        .collect();
    if survivors.is_empty() {
        return Ok(SeedVector::empty(map.image_id(), target));
    }
    // Shifting by the maximum leaves the softmax unchanged.
    let shift = survivors.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / beta;
    let weights = Array2::from_shape_fn(map.shape(), |ix| {
        if eroded[ix] {
            (relevance[ix] / beta - shift).exp()
        } else {
            0.0
        }
    });
    let total: f64 = weights.sum();
    let softmax = weights.mapv(|w| w / total);
    let transferred = transfer.apply(&softmax, |a, b| a + b);
    SeedVector::from_weights(map.image_id(), transferred)
}

/// Where a seed came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SeedOrigin {
    Eroded,
    /// Erosion removed everything; the raw positive support was used.
    UnerodedSupport,
    /// No positive relevance at all.
    Empty,
}

/// Eroded seed, falling back to the un-eroded support when erosion empties it.
pub fn seed_from_relevance(map: &RelevanceMap, beta: f64, target: (usize, usize)) -> Result<(SeedVector, SeedOrigin)> {
    let seed = build_seed(map, &erode_support(map), beta, target)?;
    if !seed.is_empty() {
        return Ok((seed, SeedOrigin::Eroded));
    }
    let seed = build_seed(map, &map.support(), beta, target)?;
    if !seed.is_empty() {
        return Ok((seed, SeedOrigin::UnerodedSupport));
    }
    Ok((seed, SeedOrigin::Empty))
}
