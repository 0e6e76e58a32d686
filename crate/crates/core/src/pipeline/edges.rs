use ndarray::Array2;

use crate::tensor_io::resize_bool_nearest;

/// Drops edges outside `mask`; the mask is resized by nearest neighbour if
/// its size differs.
pub fn mask_edgemap(edgemap: &Array2<f64>, mask: &Array2<bool>) -> Array2<f64> {
    let (h, w) = edgemap.dim();
    let mask = resize_bool_nearest(mask, h, w);
    Array2::from_shape_fn((h, w), |ix| if mask[ix] { edgemap[ix] } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_and_annihilation() {
        let e = array![[0.1, 0.9], [0.5, 0.0]];
        assert_eq!(mask_edgemap(&e, &Array2::from_elem((2, 2), true)), e);
        assert_eq!(
            mask_edgemap(&e, &Array2::from_elem((2, 2), false)),
            Array2::<f64>::zeros((2, 2))
        );
    }

    #[test]
    fn mask_is_resized() {
        let e = Array2::from_elem((4, 4), 1.0);
        let m = array![[true, false], [false, false]];
        let out = mask_edgemap(&e, &m);
        assert_eq!(out.sum(), 4.0);
        assert_eq!(out[[1, 1]], 1.0);
    }
}
