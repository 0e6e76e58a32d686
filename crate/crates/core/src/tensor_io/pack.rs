use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ClassFeatureSet, PatchFeatureGrid, FORMAT_VERSION};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackManifest {
    pub format_version: u32,
    pub class_id: String,
    pub source_model_tag: String,
    pub images: Vec<ImageEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub image_id: String,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub feature_dim: usize,
    pub patch_size_px: usize,
    pub image_height_px: usize,
    pub image_width_px: usize,
    pub tensor_file: String,
}

fn tensor_file_name(index: usize) -> String {
    format!("{index:05}.f32")
}

/// Writes `set` as a feature pack rooted at `dir`, creating it if needed.
pub fn write_feature_pack(set: &ClassFeatureSet, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut images = Vec::with_capacity(set.len());
    for (index, grid) in set.grids().iter().enumerate() {
        let tensor_file = tensor_file_name(index);
        let mut bytes = Vec::with_capacity(grid.features().len() * 4);
        for v in grid.features().iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let path = dir.join(&tensor_file);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        images.push(ImageEntry {
            image_id: grid.image_id().to_owned(),
            grid_rows: grid.grid_rows(),
            grid_cols: grid.grid_cols(),
            feature_dim: grid.feature_dim(),
            patch_size_px: grid.patch_size_px(),
            image_height_px: grid.image_height_px(),
            image_width_px: grid.image_width_px(),
            tensor_file,
        });
    }

    let manifest = PackManifest {
        format_version: FORMAT_VERSION,
        class_id: set.class_id().to_owned(),
        source_model_tag: set.source_model_tag().to_owned(),
        images,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn read_manifest(dir: &Path) -> Result<PackManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: PackManifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Manifest {
            path,
            reason: format!("unsupported format_version {}", manifest.format_version),
        });
    }
    Ok(manifest)
}

/// Reads and validates a feature pack.
pub fn read_feature_pack(dir: impl AsRef<Path>) -> Result<ClassFeatureSet> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;

    let mut grids = Vec::with_capacity(manifest.images.len());
    for entry in &manifest.images {
        let path = dir.join(&entry.tensor_file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let count = entry.grid_rows * entry.grid_cols * entry.feature_dim;
        let expected = count as u64 * 4;
        if bytes.len() as u64 != expected {
            return Err(Error::SizeMismatch {
                path,
                expected,
                found: bytes.len() as u64,
            });
        }
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let features = Array2::from_shape_vec((entry.grid_rows * entry.grid_cols, entry.feature_dim), values)
            .map_err(|e| Error::Shape(e.to_string()))?;
        grids.push(PatchFeatureGrid::with_geometry(
            entry.image_id.clone(),
            entry.grid_rows,
            entry.grid_cols,
            entry.patch_size_px,
            entry.image_height_px,
            entry.image_width_px,
            features,
        )?);
    }
    ClassFeatureSet::new(manifest.class_id, manifest.source_model_tag, grids)
}

/// SHA-256 over the manifest and every tensor file, in manifest order.
pub fn pack_digest(dir: impl AsRef<Path>) -> Result<String> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let mut hasher = Sha256::new();
    let mut files: Vec<PathBuf> = vec![dir.join(MANIFEST_FILE)];
    files.extend(manifest.images.iter().map(|e| dir.join(&e.tensor_file)));
    for path in files {
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}
