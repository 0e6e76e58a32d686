//! Planted-rectangle classes with known ground truth.
//!
//! Foreground patches are drawn from `N(m_f, noise^2 I)` and background patches
//! from `N(m_b, noise^2 I)`. The two means are orthogonal with equal norm, so
//! cross-region cosine similarity is near zero and `|m_f - m_b| = separation`.

use image::{Rgb, RgbImage};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ClassFeatureSet, ClassImage, GroundTruthMask, PatchFeatureGrid};
use crate::{Error, Result};

/// A rectangle of patches, `rows x cols` starting at `(row, col)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchRect {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
}

impl PatchRect {
    pub fn new(row: usize, col: usize, rows: usize, cols: usize) -> Self {
        Self { row, col, rows, cols }
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        r >= self.row && r < self.row + self.rows && c >= self.col && c < self.col + self.cols
    }

    pub fn area(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticClassSpec {
    pub class_id: String,
    pub n_images: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub feature_dim: usize,
    pub patch_size_px: usize,
    /// One rectangle per image.
    pub fg_rects: Vec<PatchRect>,
    pub separation: f64,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticClassSpec {
    /// A class with one random interior rectangle per image.
    pub fn planted(
        class_id: impl Into<String>,
        n_images: usize,
        grid: (usize, usize),
        feature_dim: usize,
        separation: f64,
        noise: f64,
        seed: u64,
    ) -> Self {
        Self {
            class_id: class_id.into(),
            n_images,
            grid_rows: grid.0,
            grid_cols: grid.1,
            feature_dim,
            patch_size_px: 8,
            fg_rects: random_rects(n_images, grid.0, grid.1, seed ^ 0x5eed),
            separation,
            noise,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedMeans {
    pub foreground: Vec<f64>,
    pub background: Vec<f64>,
}

fn gaussian_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Gram-Schmidt of a fresh Gaussian draw against `basis` (assumed orthonormal).
fn orthonormal_draw(dim: usize, basis: &[&[f64]], rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut v = gaussian_vector(dim, rng);
        for b in basis {
            let dot: f64 = v.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b.iter()).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

impl PlantedMeans {
    /// Orthogonal foreground/background means of norm `separation / sqrt(2)`.
    pub fn random(dim: usize, separation: f64, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument("planted means need feature_dim >= 2".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = orthonormal_draw(dim, &[], &mut rng);
        let b = orthonormal_draw(dim, &[&a], &mut rng);
        let norm = separation / std::f64::consts::SQRT_2;
        Ok(Self {
            foreground: scaled(&b, norm),
            background: scaled(&a, norm),
        })
    }

    /// Same background, new foreground direction orthogonal to both of `self`'s means.
    pub fn sharing_background(&self, seed: u64) -> Result<Self> {
        let dim = self.background.len();
        if dim < 3 {
            return Err(Error::InvalidArgument(
                "a second planted direction needs feature_dim >= 3".into(),
            ));
        }
        let a = unit(&self.background);
        let b = unit(&self.foreground);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = orthonormal_draw(dim, &[&a, &b], &mut rng);
        let norm = self.background.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(Self {
            foreground: scaled(&c, norm),
            background: self.background.clone(),
        })
    }

    pub fn separation(&self) -> f64 {
        self.foreground
            .iter()
            .zip(&self.background)
            .map(|(f, b)| (f - b) * (f - b))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticClass {
    pub features: ClassFeatureSet,
    /// Patch-resolution ground truth, one per image.
    pub truth: Vec<GroundTruthMask>,
    pub means: PlantedMeans,
}

pub fn make_synthetic_class(spec: &SyntheticClassSpec) -> Result<SyntheticClass> {
    if spec.separation <= 0.0 || !spec.separation.is_finite() {
        return Err(Error::InvalidArgument("separation must be positive".into()));
    }
    let means = PlantedMeans::random(spec.feature_dim, spec.separation, spec.seed)?;
    make_synthetic_class_with_means(spec, &means)
}

pub fn make_synthetic_class_with_means(spec: &SyntheticClassSpec, means: &PlantedMeans) -> Result<SyntheticClass> {
    if spec.fg_rects.len() != spec.n_images {
        return Err(Error::InvalidArgument(format!(
            "{} foreground rectangles for {} images",
            spec.fg_rects.len(),
            spec.n_images
        )));
    }
    if means.foreground.len() != spec.feature_dim || means.background.len() != spec.feature_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.feature_dim,
            found: means.foreground.len(),
        });
    }
    if !(spec.noise >= 0.0) {
        return Err(Error::InvalidArgument("noise must be non-negative".into()));
    }
    for rect in &spec.fg_rects {
        if rect.area() == 0 {
            return Err(Error::InvalidArgument("empty foreground rectangle".into()));
        }
        if rect.row + rect.rows > spec.grid_rows || rect.col + rect.cols > spec.grid_cols {
            return Err(Error::InvalidArgument(format!(
                "foreground rectangle {rect:?} exceeds the {}x{} grid",
                spec.grid_rows, spec.grid_cols
            )));
        }
    }

    let (h, w, d) = (spec.grid_rows, spec.grid_cols, spec.feature_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut grids = Vec::with_capacity(spec.n_images);
    let mut truth = Vec::with_capacity(spec.n_images);
    for (i, rect) in spec.fg_rects.iter().enumerate() {
        let image_id = format!("{}_{i:03}", spec.class_id);
        let mask = Array2::from_shape_fn((h, w), |(r, c)| rect.contains(r, c));
        let mut features = Array2::<f32>::zeros((h * w, d));
        for (patch, mut row) in features.rows_mut().into_iter().enumerate() {
            let mean = if mask[[patch / w, patch % w]] {
                &means.foreground
            } else {
                &means.background
            };
            for (v, m) in row.iter_mut().zip(mean) {
                let z: f64 = if spec.noise > 0.0 {
                    rng.sample(StandardNormal)
                } else {
                    0.0
                };
                *v = (m + spec.noise * z) as f32;
            }
        }
        grids.push(PatchFeatureGrid::new(
            image_id.clone(),
            h,
            w,
            spec.patch_size_px,
            features,
        )?);
        truth.push(GroundTruthMask { image_id, mask });
    }
    Ok(SyntheticClass {
        features: ClassFeatureSet::new(spec.class_id.clone(), "synthetic", grids)?,
        truth,
        means: means.clone(),
    })
}

/// Random interior rectangles covering roughly a quarter of the grid each.
///
/// Rectangles stay off the outer ring so border patches are background.
pub fn random_rects(n: usize, rows: usize, cols: usize, seed: u64) -> Vec<PatchRect> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |len: usize, rng: &mut ChaCha8Rng| -> (usize, usize) {
        if len < 4 {
            return (0, len.min(1));
        }
        let max_size = len - 2;
        let lo = (len / 4).max(2).min(max_size);
        let hi = (len / 2).max(lo).min(max_size);
        let size = rng.random_range(lo..=hi);
        let start = rng.random_range(1..=len - 1 - size);
        (start, size)
    };
    (0..n)
        .map(|_| {
            let (row, rr) = pick(rows, &mut rng);
            let (col, cc) = pick(cols, &mut rng);
            PatchRect::new(row, col, rr, cc)
        })
        .collect()
}

/// Two-colour RGB renderings of a synthetic class at `grid * patch_size_px` pixels.
///
/// Each channel gets independent uniform noise of amplitude `noise` (8-bit units).
pub fn render_images(class: &SyntheticClass, noise: u8, seed: u64) -> Vec<ClassImage> {
    const FG: [u8; 3] = [200, 70, 40];
    const BG: [u8; 3] = [40, 110, 190];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    class
        .features
        .grids()
        .iter()
        .zip(&class.truth)
        .map(|(grid, gt)| {
            let k = grid.patch_size_px();
            let (hp, wp) = (grid.image_height_px() as u32, grid.image_width_px() as u32);
            let mut pixels = RgbImage::new(wp, hp);
            for (x, y, px) in pixels.enumerate_pixels_mut() {
                let base = if gt.mask[[y as usize / k, x as usize / k]] {
                    FG
                } else {
                    BG
                };
                let mut out = [0u8; 3];
                for ch in 0..3 {
                    let jitter = if noise > 0 {
                        rng.random_range(-(noise as i32)..=noise as i32)
                    } else {
                        0
                    };
                    out[ch] = (base[ch] as i32 + jitter).clamp(0, 255) as u8;
                }
                *px = Rgb(out);
            }
            ClassImage {
                image_id: grid.image_id().to_owned(),
                pixels,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(noise: f64, seed: u64) -> SyntheticClassSpec {
        SyntheticClassSpec::planted("cls", 3, (8, 8), 16, 10.0, noise, seed)
    }

    #[test]
    fn zero_noise_is_exactly_the_means() {
        let class = make_synthetic_class(&spec(0.0, 4)).unwrap();
        for (grid, gt) in class.features.grids().iter().zip(&class.truth) {
            for (patch, row) in grid.features().rows().into_iter().enumerate() {
                let mean = if gt.mask[[patch / 8, patch % 8]] {
                    &class.means.foreground
                } else {
                    &class.means.background
                };
                for (v, m) in row.iter().zip(mean) {
                    assert_eq!(*v, *m as f32);
                }
            }
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let a = make_synthetic_class(&spec(0.1, 9)).unwrap();
        let b = make_synthetic_class(&spec(0.1, 9)).unwrap();
        let c = make_synthetic_class(&spec(0.1, 10)).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.truth, b.truth);
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn means_have_requested_separation() {
        let m = PlantedMeans::random(16, 10.0, 1).unwrap();
        assert!((m.separation() - 10.0).abs() < 1e-12);
        let dot: f64 = m.foreground.iter().zip(&m.background).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-12);
        let other = m.sharing_background(2).unwrap();
        assert!((other.separation() - 10.0).abs() < 1e-12);
        let cross: f64 = other.foreground.iter().zip(&m.foreground).map(|(a, b)| a * b).sum();
        assert!(cross.abs() < 1e-12);
    }

    #[test]
    fn rects_stay_inside_and_off_the_border() {
        for seed in 0..50 {
            for r in random_rects(5, 16, 12, seed) {
                assert!(r.row >= 1 && r.col >= 1);
                assert!(r.row + r.rows <= 15 && r.col + r.cols <= 11);
                assert!(r.rows >= 2 && r.cols >= 2);
            }
        }
    }

    #[test]
    fn empty_rectangle_is_an_error() {
        let mut s = spec(0.1, 1);
        s.fg_rects[1] = PatchRect::new(2, 2, 0, 3);
        assert!(matches!(
            make_synthetic_class(&s).unwrap_err(),
            Error::InvalidArgument(_)
        ));
    }

    #[test]
    fn rendered_images_follow_the_truth() {
        let class = make_synthetic_class(&spec(0.1, 2)).unwrap();
        let images = render_images(&class, 0, 0);
        let img = &images[0];
        assert_eq!(img.height_px(), 64);
        let gt = &class.truth[0].mask;
        let r = class.features.grids()[0].patch_size_px();
        for (x, y, px) in img.pixels.enumerate_pixels() {
            let fg = gt[[y as usize / r, x as usize / r]];
            assert_eq!(px.0[0] == 200, fg);
        }
    }
}
