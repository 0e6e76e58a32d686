//! Pixel-level refinement of the coarse patch mask.
//!
//! The coarse mask is replicated to pixel resolution and used as a soft
//! trimap for iterated colour-model graph cuts. Each iteration reassigns
//! pixels to mixture components, refits both colour models and solves an
//! exact s-t min-cut, so the total energy never increases.

mod gmm;
mod maxflow;

use image::RgbImage;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use gmm::{symmetric_eigenvalues3, Color, Gaussian, Gmm, MIN_COVARIANCE_EIGENVALUE};
pub use maxflow::MaxFlowGraph;

use crate::spectral::CoarseMask;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrimapLabel {
    ProbableForeground,
    ProbableBackground,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trimap {
    pub image_id: String,
    pub labels: Array2<TrimapLabel>,
    /// One of the two labels is absent.
    pub degenerate: bool,
}

impl Trimap {
    pub fn from_mask(image_id: impl Into<String>, mask: &Array2<bool>) -> Self {
        let labels = mask.mapv(|fg| {
            if fg {
                TrimapLabel::ProbableForeground
            } else {
                TrimapLabel::ProbableBackground
            }
        });
        let fg = mask.iter().filter(|&&b| b).count();
        Self {
            image_id: image_id.into(),
            labels,
            degenerate: fg == 0 || fg == mask.len(),
        }
    }

    pub fn height_px(&self) -> usize {
        self.labels.nrows()
    }

    pub fn width_px(&self) -> usize {
        self.labels.ncols()
    }

    pub fn foreground(&self) -> Array2<bool> {
        self.labels.mapv(|l| l == TrimapLabel::ProbableForeground)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PixelMask {
    pub image_id: String,
    pub mask: Array2<bool>,
}

impl PixelMask {
    pub fn height_px(&self) -> usize {
        self.mask.nrows()
    }

    pub fn width_px(&self) -> usize {
        self.mask.ncols()
    }
}

/// Replicates every patch cell into a `patch_size_px` square block.
pub fn upscale_mask(coarse: &CoarseMask, patch_size_px: usize) -> Trimap {
    let (rows, cols) = coarse.shape();
    let p = patch_size_px.max(1);
    let mask = Array2::from_shape_fn((rows * p, cols * p), |(y, x)| coarse.mask[[y / p, x / p]]);
    Trimap::from_mask(coarse.image_id.clone(), &mask)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            4 => Ok(Self::Four),
            8 => Ok(Self::Eight),
            _ => Err(Error::InvalidArgument(format!("connectivity must be 4 or 8, got {n}"))),
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Self::Four => 4,
            Self::Eight => 8,
        }
    }

    /// Forward neighbour offsets `(dy, dx)`; each undirected pair appears once.
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Self::Four => &[(0, 1), (1, 0)],
            Self::Eight => &[(0, 1), (1, 0), (1, 1), (1, -1)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrabCutParams {
    pub iterations: usize,
    pub components: usize,
    pub pairwise_gamma: f64,
    pub connectivity: Connectivity,
    pub seed: u64,
}

impl Default for GrabCutParams {
    fn default() -> Self {
        Self {
            iterations: 5,
            components: 5,
            pairwise_gamma: 50.0,
            connectivity: Connectivity::Eight,
            seed: 0,
        }
    }
}

/// A binary labelling problem with submodular Potts pairwise terms.
///
/// `true` is foreground. A node labelled foreground pays `unary_fg[i]`, a
/// background one `unary_bg[i]`, and every edge whose ends disagree pays its
/// weight.
#[derive(Clone, Debug, PartialEq)]
pub struct CutProblem {
    pub unary_fg: Vec<f64>,
    pub unary_bg: Vec<f64>,
    pub edges: Vec<(usize, usize, f64)>,
}

impl CutProblem {
    pub fn len(&self) -> usize {
        self.unary_fg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unary_fg.is_empty()
    }

    pub fn energy(&self, labels: &[bool]) -> f64 {
        let unary: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &fg)| if fg { self.unary_fg[i] } else { self.unary_bg[i] })
            .sum();
        let pairwise: f64 = self
            .edges
            .iter()
            .filter(|&&(i, j, _)| labels[i] != labels[j])
            .map(|&(_, _, w)| w)
            .sum();
        unary + pairwise
    }

    /// Exact minimizer via max-flow (source side is foreground).
    pub fn solve(&self) -> Vec<bool> {
        let n = self.len();
        let mut g = MaxFlowGraph::new(n, self.edges.len());
        for i in 0..n {
            // Cutting the sink arc puts i on the source side.
            g.add_terminal_weights(i, self.unary_bg[i], self.unary_fg[i]);
        }
        for &(i, j, w) in &self.edges {
            g.add_edge(i, j, w, w);
        }
        g.solve();
        (0..n).map(|i| g.is_source_side(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Refinement {
    pub mask: PixelMask,
    /// Total energy after each iteration.
    pub energy_trace: Vec<f64>,
}

fn colors(image: &RgbImage) -> Vec<Color> {
    image
        .pixels()
        .map(|p| {
            [
                f64::from(p[0]) / 255.0,
                f64::from(p[1]) / 255.0,
                f64::from(p[2]) / 255.0,
            ]
        })
        .collect()
}

/// Contrast-sensitive neighbour weights `gamma * exp(-beta |dz|^2) / dist`.
pub fn pairwise_edges(image: &RgbImage, connectivity: Connectivity, gamma: f64) -> Vec<(usize, usize, f64)> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let z = colors(image);
    let mut pairs = Vec::new();
    for y in 0..h {
        for x in 0..w {
            for &(dy, dx) in connectivity.offsets() {
                let (ny, nx) = (y as isize + dy, x as isize + dx);
                if ny < 0 || nx < 0 || ny as usize >= h || nx as usize >= w {
                    continue;
                }
                let (i, j) = (y * w + x, ny as usize * w + nx as usize);
                let d2: f64 = (0..3).map(|c| (z[i][c] - z[j][c]).powi(2)).sum();
                let dist = ((dy * dy + dx * dx) as f64).sqrt();
                pairs.push((i, j, d2, dist));
            }
        }
    }
    let mean = if pairs.is_empty() {
        0.0
    } else {
        pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len() as f64
    };
    let beta = if mean > 0.0 { 1.0 / (2.0 * mean) } else { 0.0 };
    pairs
        .into_iter()
        .map(|(i, j, d2, dist)| (i, j, gamma * (-beta * d2).exp() / dist))
        .collect()
}

fn side_samples(z: &[Color], labels: &[bool], fg: bool) -> Vec<Color> {
    z.iter()
        .zip(labels)
        .filter(|&(_, &l)| l == fg)
        .map(|(c, _)| *c)
        .collect()
}

/// Keeps the refit model only if it does not raise this side's data energy.
fn guarded_refit(model: Gmm, samples: &[Color]) -> Gmm {
    if samples.is_empty() {
        return model;
    }
    let candidate = model.refit(samples);
    if candidate.total_cost(samples) <= model.total_cost(samples) {
        candidate
    } else {
        model
    }
}

fn cut_problem(z: &[Color], fg: &Gmm, bg: &Gmm, edges: &[(usize, usize, f64)]) -> CutProblem {
    CutProblem {
        unary_fg: z.iter().map(|c| fg.cost(c)).collect(),
        unary_bg: z.iter().map(|c| bg.cost(c)).collect(),
        edges: edges.to_vec(),
    }
}

/// Iterated colour-model graph cut initialized from `trimap`.
pub fn refine(image: &RgbImage, trimap: &Trimap, params: &GrabCutParams) -> Result<Refinement> {
    refine_observed(image, trimap, params, |_, _| {})
}

/// [`refine`], calling `observe` with every min-cut subproblem and the
/// labelling its solver returned.
pub fn refine_observed(
    image: &RgbImage,
    trimap: &Trimap,
    params: &GrabCutParams,
    mut observe: impl FnMut(&CutProblem, &[bool]),
) -> Result<Refinement> {
    let (h, w) = (trimap.height_px(), trimap.width_px());
    if image.height() as usize != h || image.width() as usize != w {
        return Err(Error::Shape(format!(
            "image is {}x{} but trimap is {h}x{w}",
            image.height(),
            image.width()
        )));
    }
    if params.components == 0 {
        return Err(Error::InvalidArgument("need at least one mixture component".into()));
    }
    let mut labels: Vec<bool> = trimap.foreground().iter().copied().collect();
    let has_fg = labels.iter().any(|&b| b);
    let has_bg = labels.iter().any(|&b| !b);
    if trimap.degenerate || !has_fg || !has_bg {
        return Ok(Refinement {
            mask: PixelMask {
                image_id: trimap.image_id.clone(),
                mask: trimap.foreground(),
            },
            energy_trace: Vec::new(),
        });
    }

    let z = colors(image);
    let edges = pairwise_edges(image, params.connectivity, params.pairwise_gamma);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut fg = Gmm::fit_kmeans(&side_samples(&z, &labels, true), params.components, &mut rng);
    let mut bg = Gmm::fit_kmeans(&side_samples(&z, &labels, false), params.components, &mut rng);

    let mut trace = Vec::with_capacity(params.iterations);
    for t in 0..params.iterations {
        if t > 0 {
            fg = guarded_refit(fg, &side_samples(&z, &labels, true));
            bg = guarded_refit(bg, &side_samples(&z, &labels, false));
        }
        let problem = cut_problem(&z, &fg, &bg, &edges);
        let next = problem.solve();
        observe(&problem, &next);
        // Guard against rounding in the flow: never accept a worse labelling.
        if t == 0 || problem.energy(&next) <= problem.energy(&labels) {
            labels = next;
        }
        trace.push(problem.energy(&labels));
    }

    Ok(Refinement {
        mask: PixelMask {
            image_id: trimap.image_id.clone(),
            mask: Array2::from_shape_vec((h, w), labels).expect("length matches image"),
        },
        energy_trace: trace,
    })
}
