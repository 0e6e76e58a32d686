use std::path::{Path, PathBuf};

use image::{GrayImage, RgbImage};
use ndarray::Array2;

use crate::{Error, Result};

/// Extensions probed, in order, when looking an image up by id.
const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

/// Mask pixels at or above this 8-bit value are foreground.
pub const MASK_THRESHOLD: u8 = 128;

#[derive(Clone, Debug)]
pub struct ClassImage {
    pub image_id: String,
    pub pixels: RgbImage,
}

impl ClassImage {
    pub fn height_px(&self) -> usize {
        self.pixels.height() as usize
    }

    pub fn width_px(&self) -> usize {
        self.pixels.width() as usize
    }

    /// Bilinear resize to `height x width`; a no-op when the size already matches.
    pub fn resized(&self, height: usize, width: usize) -> ClassImage {
        if self.height_px() == height && self.width_px() == width {
            return self.clone();
        }
        let pixels = image::imageops::resize(
            &self.pixels,
            width as u32,
            height as u32,
            image::imageops::FilterType::Triangle,
        );
        ClassImage {
            image_id: self.image_id.clone(),
            pixels,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthMask {
    pub image_id: String,
    pub mask: Array2<bool>,
}

fn image_error(path: &Path, e: impl ToString) -> Error {
    Error::Image {
        path: path.to_owned(),
        reason: e.to_string(),
    }
}

pub fn find_image_file(dir: &Path, image_id: &str) -> Option<PathBuf> {
    IMAGE_EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{image_id}.{ext}")))
        .find(|p| p.is_file())
}

pub fn load_rgb(path: impl AsRef<Path>, image_id: impl Into<String>) -> Result<ClassImage> {
    let path = path.as_ref();
    let pixels = image::open(path).map_err(|e| image_error(path, e))?.to_rgb8();
    if pixels.width() == 0 || pixels.height() == 0 {
        return Err(image_error(path, "empty image"));
    }
    Ok(ClassImage {
        image_id: image_id.into(),
        pixels,
    })
}

/// Loads any image as 8-bit luma and binarizes it at [`MASK_THRESHOLD`].
pub fn load_mask_png(path: impl AsRef<Path>) -> Result<Array2<bool>> {
    let gray = load_luma(path.as_ref())?;
    Ok(gray.mapv(|v| v >= MASK_THRESHOLD))
}

/// Loads any image as 8-bit luma scaled to `[0, 1]`.
pub fn load_gray_png(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let gray = load_luma(path.as_ref())?;
    Ok(gray.mapv(|v| f64::from(v) / 255.0))
}

fn load_luma(path: &Path) -> Result<Array2<u8>> {
    let img = image::open(path).map_err(|e| image_error(path, e))?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Array2::from_shape_vec((h, w), img.into_raw()).map_err(|e| image_error(path, e))
}

fn save_luma(path: &Path, rows: usize, cols: usize, data: Vec<u8>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let img: GrayImage =
        GrayImage::from_raw(cols as u32, rows as u32, data).ok_or_else(|| image_error(path, "buffer size mismatch"))?;
    img.save(path).map_err(|e| image_error(path, e))
}

/// Writes a mask as an 8-bit PNG with values {0, 255}.
pub fn write_mask_png(path: impl AsRef<Path>, mask: &Array2<bool>) -> Result<()> {
    let (rows, cols) = mask.dim();
    let data = mask.iter().map(|&b| if b { 255 } else { 0 }).collect();
    save_luma(path.as_ref(), rows, cols, data)
}

/// Writes values in `[0, 1]` (clamped) as 8-bit grayscale.
pub fn write_gray_png(path: impl AsRef<Path>, map: &Array2<f64>) -> Result<()> {
    let (rows, cols) = map.dim();
    let data = map.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    save_luma(path.as_ref(), rows, cols, data)
}

fn nearest_index(dst: usize, dst_len: usize, src_len: usize) -> usize {
    (((dst as f64 + 0.5) * src_len as f64 / dst_len as f64) as usize).min(src_len - 1)
}

/// Nearest-neighbour resize; integer upscaling replicates each cell into a block.
pub fn resize_bool_nearest(src: &Array2<bool>, rows: usize, cols: usize) -> Array2<bool> {
    let (h, w) = src.dim();
    if (h, w) == (rows, cols) {
        return src.clone();
    }
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        src[[nearest_index(r, rows, h), nearest_index(c, cols, w)]]
    })
}

/// Bilinear resize with pixel-centre alignment and edge clamping.
pub fn resize_gray_bilinear(src: &Array2<f64>, rows: usize, cols: usize) -> Array2<f64> {
    let (h, w) = src.dim();
    if (h, w) == (rows, cols) {
        return src.clone();
    }
    let coord = |dst: usize, dst_len: usize, src_len: usize| -> (usize, usize, f64) {
        let x = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5).clamp(0.0, (src_len - 1) as f64);
        let lo = x.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, x - lo as f64)
    };
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let (r0, r1, fr) = coord(r, rows, h);
        let (c0, c1, fc) = coord(c, cols, w);
        let top = src[[r0, c0]] * (1.0 - fc) + src[[r0, c1]] * fc;
        let bottom = src[[r1, c0]] * (1.0 - fc) + src[[r1, c1]] * fc;
        top * (1.0 - fr) + bottom * fr
    })
}
