use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Serialize;

use super::ablation::{AblationClassSpec, AblationSpec};
use crate::tensor_io::{
    make_synthetic_class, render_images, resize_bool_nearest, write_feature_pack, write_mask_png, ClassFeatureSet,
    PatchFeatureGrid, SyntheticClassSpec,
};
use crate::{Error, Result};

/// Tags used for the two packs written per synthetic class.
pub const AFFINITY_TAG: &str = "dino-s8";
pub const RELEVANCE_TAG: &str = "imagenet-s16";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SynthOptions {
    pub classes: usize,
    pub images_per_class: usize,
    pub grid: usize,
    pub feature_dim: usize,
    pub separation: f64,
    pub noise: f64,
    /// Per-channel uniform noise of the rendered RGB images, 8-bit units.
    pub image_noise: u8,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            classes: 2,
            images_per_class: 8,
            grid: 32,
            feature_dim: 32,
            separation: 10.0,
            noise: 0.1,
            image_noise: 20,
            seed: 0,
        }
    }
}

/// Averages `factor x factor` blocks of patches into one coarser patch.
pub fn pool_grid(grid: &PatchFeatureGrid, factor: usize) -> Result<PatchFeatureGrid> {
    let (h, w) = grid.shape();
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot pool a {h}x{w} grid by {factor}"
        )));
    }
    let (ph, pw, d) = (h / factor, w / factor, grid.feature_dim());
    let scale = 1.0 / (factor * factor) as f32;
    let mut out = Array2::<f32>::zeros((ph * pw, d));
    for r in 0..h {
        for c in 0..w {
            let dst = (r / factor) * pw + c / factor;
            let mut row = out.row_mut(dst);
            row.scaled_add(scale, &grid.feature(r * w + c));
        }
    }
    PatchFeatureGrid::with_geometry(
        grid.image_id(),
        ph,
        pw,
        grid.patch_size_px() * factor,
        grid.image_height_px(),
        grid.image_width_px(),
        out,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthClassPaths {
    pub class_id: String,
    pub affinity_pack: PathBuf,
    pub relevance_pack: PathBuf,
    pub images: PathBuf,
    pub gt: PathBuf,
}

/// Writes planted classes as packs, rendered images and pixel masks, plus an
/// `ablation.json` over the two pack tags.
///
/// Layout per class: `{class}/affinity`, `{class}/relevance` (2x2-pooled
/// when the grid is even), `{class}/images`, `{class}/gt`.
pub fn synthesize_dataset(opts: &SynthOptions, out: &Path) -> Result<Vec<SynthClassPaths>> {
    let mut written = Vec::new();
    for k in 0..opts.classes {
        let class_id = format!("class{k:02}");
        let seed = opts.seed.wrapping_add(1000 * k as u64);
        let spec = SyntheticClassSpec::planted(
            &class_id,
            opts.images_per_class,
            (opts.grid, opts.grid),
            opts.feature_dim,
            opts.separation,
            opts.noise,
            seed,
        );
        let class = make_synthetic_class(&spec)?;
        let dir = out.join(&class_id);
        let paths = SynthClassPaths {
            class_id: class_id.clone(),
            affinity_pack: dir.join("affinity"),
            relevance_pack: dir.join("relevance"),
            images: dir.join("images"),
            gt: dir.join("gt"),
        };

        let affinity = ClassFeatureSet::new(&class_id, AFFINITY_TAG, class.features.grids().to_vec())?;
        write_feature_pack(&affinity, &paths.affinity_pack)?;
        let pooled = if opts.grid.is_multiple_of(2) {
            class
                .features
                .grids()
                .iter()
                .map(|g| pool_grid(g, 2))
                .collect::<Result<Vec<_>>>()?
        } else {
            class.features.grids().to_vec()
        };
        write_feature_pack(
            &ClassFeatureSet::new(&class_id, RELEVANCE_TAG, pooled)?,
            &paths.relevance_pack,
        )?;

        for img in render_images(&class, opts.image_noise, seed ^ 0xabcd) {
            let path = paths.images.join(format!("{}.png", img.image_id));
            std::fs::create_dir_all(&paths.images).map_err(|e| Error::io(&paths.images, e))?;
            img.pixels.save(&path).map_err(|e| Error::Image {
                path: path.clone(),
                reason: e.to_string(),
            })?;
        }
        for (gt, grid) in class.truth.iter().zip(class.features.grids()) {
            let px = resize_bool_nearest(&gt.mask, grid.image_height_px(), grid.image_width_px());
            write_mask_png(paths.gt.join(format!("{}.png", gt.image_id)), &px)?;
        }
        written.push(paths);
    }

    let spec = AblationSpec {
        classes: written
            .iter()
            .map(|p| AblationClassSpec {
                class_id: p.class_id.clone(),
                packs: BTreeMap::from([
                    (AFFINITY_TAG.to_owned(), PathBuf::from(&p.class_id).join("affinity")),
                    (RELEVANCE_TAG.to_owned(), PathBuf::from(&p.class_id).join("relevance")),
                ]),
                images: Some(PathBuf::from(&p.class_id).join("images")),
                gt: PathBuf::from(&p.class_id).join("gt"),
            })
            .collect(),
        relevance_sources: vec![AFFINITY_TAG.into(), RELEVANCE_TAG.into()],
        affinity_sources: vec![AFFINITY_TAG.into(), RELEVANCE_TAG.into()],
    };
    let path = out.join("ablation.json");
    let mut text = serde_json::to_string_pretty(&spec)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(written)
}
