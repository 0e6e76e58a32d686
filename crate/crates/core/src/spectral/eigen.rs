use faer::Mat;
use ndarray::{Array2, ArrayView1};

use super::AffinityGraph;
use crate::linalg::{canonicalize_sign, symmetric_eigen};
use crate::{Error, Result};

pub const DEFAULT_EIGENVECTORS: usize = 16;
pub const DEFAULT_ZERO_TOLERANCE: f64 = 1e-8;

/// The lowest non-trivial generalized eigenpairs of `(D - E) y = lambda D y`.
///
/// Eigenvectors are `D`-orthonormal and sign-canonicalized (largest-magnitude
/// component positive). Zero modes are excluded.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenBasis {
    image_id: String,
    grid_rows: usize,
    grid_cols: usize,
    eigenvalues: Vec<f64>,
    /// `n x k`; column `j` pairs with `eigenvalues[j]`.
    eigenvectors: Array2<f64>,
    degree: Vec<f64>,
    zero_modes: usize,
    requested: usize,
    zero_tolerance: f64,
}

impl EigenBasis {
    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.grid_rows, self.grid_cols)
    }

    pub fn nodes(&self) -> usize {
        self.degree.len()
    }

    /// Number of retained pairs.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, k: usize) -> ArrayView1<'_, f64> {
        self.eigenvectors.column(k)
    }

    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    /// Eigenvalues discarded as numerically zero.
    pub fn zero_modes(&self) -> usize {
        self.zero_modes
    }

    pub fn requested(&self) -> usize {
        self.requested
    }

    /// True when fewer than the requested number of pairs were available.
    pub fn is_truncated(&self) -> bool {
        self.len() < self.requested
    }

    pub fn zero_tolerance(&self) -> f64 {
        self.zero_tolerance
    }
}

/// Solves the generalized system through the symmetric normalized Laplacian
/// `D^-1/2 (D - E) D^-1/2 z = lambda z`, with `y = D^-1/2 z`.
///
/// Eigenvalues at or below `zero_tolerance * max(lambda_max, 1)` are zero
/// modes. Returns the `k` smallest remaining pairs, or all of them when fewer
/// exist (see [`EigenBasis::is_truncated`]).
pub fn solve_generalized(graph: &AffinityGraph, k: usize, zero_tolerance: f64) -> Result<EigenBasis> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one eigenvector".into()));
    }
    if !(zero_tolerance >= 0.0) {
        return Err(Error::InvalidArgument("zero_tolerance must be non-negative".into()));
    }
    let n = graph.len();
    let e = graph.affinity();
    let inv_sqrt: Vec<f64> = graph.degree().iter().map(|d| 1.0 / d.sqrt()).collect();
    let laplacian = Mat::<f64>::from_fn(n, n, |i, j| {
        let off = e[[i, j]] * inv_sqrt[i] * inv_sqrt[j];
        if i == j {
            1.0 - off
        } else {
            -off
        }
    });
    let (values, vectors) = symmetric_eigen(&laplacian)?;

    let lambda_max = values.last().copied().unwrap_or(0.0);
    let threshold = zero_tolerance * lambda_max.max(1.0);
    let zero_modes = values.iter().take_while(|&&v| v <= threshold).count();
    let keep: Vec<usize> = (zero_modes..n).take(k).collect();
    if keep.is_empty() {
        return Err(Error::InsufficientSpectrum { nodes: n });
    }

    let mut eigenvectors = Array2::<f64>::zeros((n, keep.len()));
    for (col, &idx) in keep.iter().enumerate() {
        let mut y: Vec<f64> = (0..n).map(|i| vectors[(i, idx)] * inv_sqrt[i]).collect();
        let d_norm = y.iter().zip(graph.degree()).map(|(v, d)| v * v * d).sum::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v /= d_norm);
        canonicalize_sign(&mut y);
        eigenvectors.column_mut(col).assign(&ArrayView1::from(&y));
    }

    Ok(EigenBasis {
        image_id: graph.image_id().to_owned(),
        grid_rows: graph.shape().0,
        grid_cols: graph.shape().1,
        eigenvalues: keep.iter().map(|&i| values[i]).collect(),
        eigenvectors,
        degree: graph.degree().to_vec(),
        zero_modes,
        requested: k,
        zero_tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_node_closed_form() {
        let g = AffinityGraph::from_matrix("g", (1, 2), array![[1.0, 1.0], [1.0, 1.0]], 0.2, 1e-5).unwrap();
        let basis = solve_generalized(&g, 1, 1e-8).unwrap();
        assert_eq!(basis.zero_modes(), 1);
        assert!((basis.eigenvalues()[0] - 1.0).abs() < 1e-14);
        // D = 2I, so the D-normalized vector is (1, -1) / 2.
        let u = basis.eigenvector(0);
        assert!((u[0] - 0.5).abs() < 1e-14 && (u[1] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn truncates_on_tiny_graphs() {
        let g = AffinityGraph::from_matrix(
            "g",
            (1, 3),
            array![[1.0, 1e-5, 1e-5], [1e-5, 1.0, 1.0], [1e-5, 1.0, 1.0]],
            0.2,
            1e-5,
        )
        .unwrap();
        let basis = solve_generalized(&g, 16, 1e-8).unwrap();
        assert_eq!(basis.len(), 2);
        assert!(basis.is_truncated());
    }

    #[test]
    fn single_node_has_no_spectrum() {
        let g = AffinityGraph::from_matrix("g", (1, 1), array![[1.0]], 0.2, 1e-5).unwrap();
        assert!(matches!(
            solve_generalized(&g, 1, 1e-8),
            Err(Error::InsufficientSpectrum { nodes: 1 })
        ));
    }
}
