use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use ndarray::Array2;

use crate::tensor_io::PatchFeatureGrid;
use crate::{Error, Result};

pub const DEFAULT_TAU: f64 = 0.2;
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Symmetric `{epsilon, 1}` affinity over the patches of one image.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityGraph {
    image_id: String,
    grid_rows: usize,
    grid_cols: usize,
    affinity: Array2<f64>,
    degree: Vec<f64>,
    tau: f64,
    epsilon: f64,
}

impl AffinityGraph {
    /// Wraps an explicit affinity matrix; degrees are its row sums.
    pub fn from_matrix(
        image_id: impl Into<String>,
        shape: (usize, usize),
        affinity: Array2<f64>,
        tau: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let n = shape.0 * shape.1;
        if affinity.dim() != (n, n) {
            return Err(Error::Shape(format!(
                "affinity {:?} for a {}x{} grid",
                affinity.dim(),
                shape.0,
                shape.1
            )));
        }
        for i in 0..n {
            for j in 0..i {
                if affinity[[i, j]] != affinity[[j, i]] {
                    return Err(Error::InvalidArgument(format!("affinity not symmetric at ({i}, {j})")));
                }
            }
        }
        let degree: Vec<f64> = affinity.rows().into_iter().map(|r| r.sum()).collect();
        if let Some(i) = degree.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::InvalidArgument(format!("node {i} has non-positive degree")));
        }
        Ok(Self {
            image_id: image_id.into(),
            grid_rows: shape.0,
            grid_cols: shape.1,
            affinity,
            degree,
            tau,
            epsilon,
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.grid_rows, self.grid_cols)
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.degree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degree.is_empty()
    }

    pub fn affinity(&self) -> &Array2<f64> {
        &self.affinity
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Thresholded cosine affinity between all patch descriptors of `grid`.
///
/// The diagonal is 1 and counts toward the degree.
pub fn build_affinity(grid: &PatchFeatureGrid, tau: f64, epsilon: f64) -> Result<AffinityGraph> {
    if !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("tau must be finite, got {tau}")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    let n = grid.len();
    let d = grid.feature_dim();
    let mut unit = Mat::<f64>::zeros(n, d);
    for i in 0..n {
        let row = grid.feature(i);
        let norm = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNorm {
                image_id: grid.image_id().to_owned(),
                patch: i,
            });
        }
        for (j, &v) in row.iter().enumerate() {
            unit[(i, j)] = f64::from(v) / norm;
        }
    }
    let mut cosine = Mat::<f64>::zeros(n, n);
    matmul(
        cosine.as_mut(),
        Accum::Replace,
        unit.as_ref(),
        unit.transpose(),
        1.0,
        Par::Seq,
    );

    let mut affinity = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        affinity[[i, i]] = 1.0;
        for j in 0..i {
            let v = if cosine[(i, j)] >= tau { 1.0 } else { epsilon };
            affinity[[i, j]] = v;
            affinity[[j, i]] = v;
        }
    }
    let degree = affinity.rows().into_iter().map(|r| r.sum()).collect();
    Ok(AffinityGraph {
        image_id: grid.image_id().to_owned(),
        grid_rows: grid.grid_rows(),
        grid_cols: grid.grid_cols(),
        affinity,
        degree,
        tau,
        epsilon,
    })
}
