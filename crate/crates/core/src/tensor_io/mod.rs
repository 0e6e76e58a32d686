//! Feature packs, images, ground-truth masks and synthetic fixtures.
//!
//! A feature pack is a directory holding `manifest.json` plus one raw
//! little-endian `f32` tensor per image, laid out `(row, col, channel)`.

mod images;
mod pack;
mod synthetic;

use std::collections::HashSet;

use ndarray::{Array2, ArrayView1};

use crate::{Error, Result};

pub use images::{
    find_image_file, load_gray_png, load_mask_png, load_rgb, resize_bool_nearest, resize_gray_bilinear, write_gray_png,
    write_mask_png, ClassImage, GroundTruthMask,
};
pub use pack::{pack_digest, read_feature_pack, write_feature_pack, ImageEntry, PackManifest};
pub use synthetic::{
    make_synthetic_class, make_synthetic_class_with_means, random_rects, render_images, PatchRect, PlantedMeans,
    SyntheticClass, SyntheticClassSpec,
};

pub const FORMAT_VERSION: u32 = 1;

/// One image's `h x w` grid of `d`-dimensional patch descriptors.
///
/// Row `r`, column `c` of the grid lives at feature row `r * w + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchFeatureGrid {
    image_id: String,
    grid_rows: usize,
    grid_cols: usize,
    patch_size_px: usize,
    image_height_px: usize,
    image_width_px: usize,
    features: Array2<f32>,
}

impl PatchFeatureGrid {
    /// Builds a grid whose image size is exactly `grid * patch_size_px`.
    pub fn new(
        image_id: impl Into<String>,
        grid_rows: usize,
        grid_cols: usize,
        patch_size_px: usize,
        features: Array2<f32>,
    ) -> Result<Self> {
        Self::with_geometry(
            image_id,
            grid_rows,
            grid_cols,
            patch_size_px,
            grid_rows * patch_size_px,
            grid_cols * patch_size_px,
            features,
        )
    }

    pub fn with_geometry(
        image_id: impl Into<String>,
        grid_rows: usize,
        grid_cols: usize,
        patch_size_px: usize,
        image_height_px: usize,
        image_width_px: usize,
        features: Array2<f32>,
    ) -> Result<Self> {
        let image_id = image_id.into();
        if grid_rows == 0
            || grid_cols == 0
            || patch_size_px == 0
            || image_height_px != grid_rows * patch_size_px
            || image_width_px != grid_cols * patch_size_px
        {
            return Err(Error::Geometry {
                image_id,
                grid_rows,
                grid_cols,
                patch_size_px,
                image_height_px,
                image_width_px,
            });
        }
        if features.nrows() != grid_rows * grid_cols {
            return Err(Error::Shape(format!(
                "image {image_id}: {} feature rows for a {grid_rows}x{grid_cols} grid",
                features.nrows()
            )));
        }
        if features.ncols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "image {image_id}: feature_dim must be positive"
            )));
        }
        if let Some(index) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { image_id, index });
        }
        Ok(Self {
            image_id,
            grid_rows,
            grid_cols,
            patch_size_px,
            image_height_px,
            image_width_px,
            features,
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn grid_rows(&self) -> usize {
        self.grid_rows
    }

    pub fn grid_cols(&self) -> usize {
        self.grid_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.grid_rows, self.grid_cols)
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn patch_size_px(&self) -> usize {
        self.patch_size_px
    }

    pub fn image_height_px(&self) -> usize {
        self.image_height_px
    }

    pub fn image_width_px(&self) -> usize {
        self.image_width_px
    }

    /// Number of patches, `h * w`.
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn features(&self) -> &Array2<f32> {
        &self.features
    }

    pub fn feature(&self, patch: usize) -> ArrayView1<'_, f32> {
        self.features.row(patch)
    }

    /// Flat indices of the patches on the outer ring of the grid, each once.
    pub fn border_indices(&self) -> Vec<usize> {
        let (h, w) = self.shape();
        (0..h * w)
            .filter(|&i| {
                let (r, c) = (i / w, i % w);
                r == 0 || c == 0 || r == h - 1 || c == w - 1
            })
            .collect()
    }
}

/// The descriptor grids of every image of one class, in manifest order.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassFeatureSet {
    class_id: String,
    source_model_tag: String,
    grids: Vec<PatchFeatureGrid>,
}

impl ClassFeatureSet {
    pub fn new(
        class_id: impl Into<String>,
        source_model_tag: impl Into<String>,
        grids: Vec<PatchFeatureGrid>,
    ) -> Result<Self> {
        if let Some(first) = grids.first() {
            let dim = first.feature_dim();
            if let Some(bad) = grids.iter().find(|g| g.feature_dim() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: bad.feature_dim(),
                });
            }
        }
        let mut seen = HashSet::new();
        for g in &grids {
            if !seen.insert(g.image_id()) {
                return Err(Error::DuplicateImage(g.image_id().to_owned()));
            }
        }
        Ok(Self {
            class_id: class_id.into(),
            source_model_tag: source_model_tag.into(),
            grids,
        })
    }

    pub fn class_id(&self) -> &str {
        &self.class_id
    }

    pub fn source_model_tag(&self) -> &str {
        &self.source_model_tag
    }

    pub fn grids(&self) -> &[PatchFeatureGrid] {
        &self.grids
    }

    pub fn len(&self) -> usize {
        self.grids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grids.is_empty()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.grids.first().map(PatchFeatureGrid::feature_dim)
    }

    pub fn get(&self, image_id: &str) -> Option<&PatchFeatureGrid> {
        self.grids.iter().find(|g| g.image_id() == image_id)
    }

    pub fn image_ids(&self) -> impl Iterator<Item = &str> {
        self.grids.iter().map(PatchFeatureGrid::image_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeros(id: &str, h: usize, w: usize, d: usize) -> PatchFeatureGrid {
        PatchFeatureGrid::new(id, h, w, 8, Array2::from_elem((h * w, d), 0.5)).unwrap()
    }

    #[test]
    fn geometry_must_tile_the_image() {
        let err = PatchFeatureGrid::with_geometry("a", 4, 4, 16, 256, 256, Array2::zeros((16, 3))).unwrap_err();
        assert!(matches!(err, Error::Geometry { .. }));
    }

    #[test]
    fn rejects_nan() {
        let mut f = Array2::zeros((4, 2));
        f[[3, 1]] = f32::NAN;
        let err = PatchFeatureGrid::new("a", 2, 2, 8, f).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 7, .. }));
    }

    #[test]
    fn border_ring() {
        let g = zeros("a", 4, 5, 1);
        let border = g.border_indices();
        assert_eq!(border.len(), 2 * 5 + 2 * 2);
        assert!(!border.contains(&6));
        let one = zeros("b", 1, 1, 1);
        assert_eq!(one.border_indices(), vec![0]);
    }

    #[test]
    fn set_rejects_mixed_dims_and_duplicates() {
        let err = ClassFeatureSet::new("c", "t", vec![zeros("a", 2, 2, 3), zeros("b", 2, 2, 4)]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, found: 4 }));
        let err = ClassFeatureSet::new("c", "t", vec![zeros("a", 2, 2, 3), zeros("a", 2, 2, 3)]).unwrap_err();
        assert!(matches!(err, Error::DuplicateImage(_)));
    }
}
