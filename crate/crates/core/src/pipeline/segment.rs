use std::collections::HashMap;

use log::{debug, warn};
use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use super::PipelineConfig;
use crate::grabcut::{refine, upscale_mask, Trimap};
use crate::relevance::{
    fit_relevance_model_on, relevance_map, seed_from_relevance, RelevanceMap, RelevanceModel, SeedOrigin, SeedVector,
};
use crate::spectral::{biased_ncut_mask, build_affinity, ncut_mask, solve_generalized, CoarseMask, CutMethod};
use crate::tensor_io::{resize_bool_nearest, ClassFeatureSet, ClassImage, PatchFeatureGrid};
use crate::{Error, Result};

/// Which images the relevance model is fitted on.
#[derive(Clone, Debug)]
pub enum ExperimentMode {
    Standard,
    /// Adds `count` images from the donor sets, taken round-robin across
    /// donors in manifest order, to the fit only.
    OutlierInjection {
        count: usize,
        donors: Vec<ClassFeatureSet>,
    },
    /// Each image is segmented with a model fitted without it.
    LeaveOneOut,
}

impl ExperimentMode {
    pub fn label(&self) -> String {
        match self {
            Self::Standard => "standard".into(),
            Self::OutlierInjection { count, .. } => format!("outlier-injection({count})"),
            Self::LeaveOneOut => "leave-one-out".into(),
        }
    }
}

/// Fallbacks and notable conditions for one image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageFlag {
    /// The class-level relevance model could not be fitted.
    NoRelevanceModel,
    /// No patch had positive relevance; the plain cut was used.
    EmptySeed,
    /// Erosion emptied the seed; the un-eroded support was used.
    UnerodedSeed,
    /// `gamma` was not below the second eigenvalue; the plain cut was used.
    GammaNotBelowSpectrum,
    /// The seeded cut was one-sided or uncorrelated; the plain cut was used.
    DegenerateBiasedCut,
    /// Fewer eigenpairs than requested were available.
    TruncatedSpectrum,
    /// The coarse mask had only one label; refinement was skipped.
    DegenerateTrimap,
    /// Refinement was requested but no RGB image was found.
    MissingImage,
}

#[derive(Clone, Debug)]
pub struct ImageResult {
    pub image_id: String,
    pub relevance: Option<RelevanceMap>,
    pub seed: Option<SeedVector>,
    pub coarse: CoarseMask,
    /// Final mask at working resolution.
    pub mask: Array2<bool>,
    pub energy_trace: Vec<f64>,
    pub flags: Vec<ImageFlag>,
}

#[derive(Clone, Debug)]
pub struct ClassOutcome {
    pub class_id: String,
    /// In relevance-pack order.
    pub results: Vec<ImageResult>,
    /// `(image_id, error)` for images that failed outright.
    pub failures: Vec<(String, String)>,
    /// Image ids the shared model was fitted on (empty in leave-one-out mode,
    /// where each fit is every other image up to the cap).
    pub fit_order: Vec<String>,
}

/// Fit set under the image cap, in manifest order.
fn capped<'a>(grids: impl Iterator<Item = &'a PatchFeatureGrid>, cap: usize) -> Vec<&'a PatchFeatureGrid> {
    grids.take(cap).collect()
}

fn fit_grids<'a>(relevance: &'a ClassFeatureSet, mode: &'a ExperimentMode, cap: usize) -> Vec<&'a PatchFeatureGrid> {
    let mut grids = capped(relevance.grids().iter(), cap);
    if let ExperimentMode::OutlierInjection { count, donors } = mode {
        let mut cursors = vec![0usize; donors.len()];
        let mut added = 0;
        let mut stalled = 0;
        let mut d = 0;
        while added < *count && !donors.is_empty() && stalled < donors.len() {
            let donor = &donors[d % donors.len()];
            let cur = &mut cursors[d % donors.len()];
            if let Some(g) = donor.grids().get(*cur) {
                grids.push(g);
                *cur += 1;
                added += 1;
                stalled = 0;
            } else {
                stalled += 1;
            }
            d += 1;
        }
        if added < *count {
            warn!("only {added} of {count} outlier images available");
        }
    }
    grids
}

fn check_packs(relevance: &ClassFeatureSet, affinity: &ClassFeatureSet) -> Result<()> {
    if relevance.len() != affinity.len() {
        return Err(Error::PackMismatch(format!(
            "relevance pack has {} images, affinity pack {}",
            relevance.len(),
            affinity.len()
        )));
    }
    for id in relevance.image_ids() {
        if affinity.get(id).is_none() {
            return Err(Error::PackMismatch(format!(
                "image {id} missing from the affinity pack"
            )));
        }
    }
    Ok(())
}

/// Output size for one image: the working resolution, or the grid's native size.
fn working_size(cfg: &PipelineConfig, grid: &PatchFeatureGrid) -> (usize, usize) {
    if cfg.working_resolution == 0 {
        (
            grid.grid_rows() * grid.patch_size_px(),
            grid.grid_cols() * grid.patch_size_px(),
        )
    } else {
        (cfg.working_resolution, cfg.working_resolution)
    }
}

/// Coarse cut for one image.
pub fn coarse_mask(
    model: Option<&RelevanceModel>,
    relevance_grid: &PatchFeatureGrid,
    affinity_grid: &PatchFeatureGrid,
    cfg: &PipelineConfig,
    flags: &mut Vec<ImageFlag>,
) -> Result<(CoarseMask, Option<RelevanceMap>, Option<SeedVector>)> {
    let graph = build_affinity(affinity_grid, cfg.tau, cfg.epsilon)?;
    let basis = solve_generalized(&graph, cfg.num_eigenvectors, cfg.zero_tolerance)?;
    if basis.is_truncated() {
        flags.push(ImageFlag::TruncatedSpectrum);
    }
    let Some(model) = model else {
        flags.push(ImageFlag::NoRelevanceModel);
        return Ok((ncut_mask(&basis, None)?, None, None));
    };

    let map = relevance_map(model, relevance_grid)?;
    let (seed, origin) = seed_from_relevance(&map, cfg.beta, affinity_grid.shape())?;
    let coarse = match origin {
        SeedOrigin::Empty => {
            flags.push(ImageFlag::EmptySeed);
            ncut_mask(&basis, Some(&map))?
        }
        SeedOrigin::Eroded | SeedOrigin::UnerodedSupport => {
            if origin == SeedOrigin::UnerodedSupport {
                flags.push(ImageFlag::UnerodedSeed);
            }
            match biased_ncut_mask(&basis, &graph, &seed, cfg.gamma) {
                Ok(m) => {
                    if m.degenerate {
                        flags.push(ImageFlag::DegenerateBiasedCut);
                    }
                    m
                }
                Err(Error::GammaNotBelowSpectrum { gamma, lambda2 }) => {
                    debug!("{}: gamma {gamma} >= lambda2 {lambda2}, plain cut", map.image_id());
                    flags.push(ImageFlag::GammaNotBelowSpectrum);
                    ncut_mask(&basis, Some(&map))?
                }
                Err(e) => return Err(e),
            }
        }
    };
    Ok((coarse, Some(map), Some(seed)))
}

fn segment_image(
    model: Option<&RelevanceModel>,
    relevance_grid: &PatchFeatureGrid,
    affinity_grid: &PatchFeatureGrid,
    image: Option<&ClassImage>,
    cfg: &PipelineConfig,
) -> Result<ImageResult> {
    let mut flags = Vec::new();
    let (coarse, relevance, seed) = coarse_mask(model, relevance_grid, affinity_grid, cfg, &mut flags)?;
    let (h, w) = working_size(cfg, affinity_grid);
    let trimap = upscale_mask(&coarse, affinity_grid.patch_size_px());
    let prior = resize_bool_nearest(&trimap.foreground(), h, w);

    let mut energy_trace = Vec::new();
    let mask = match (cfg.refine, image) {
        (false, _) => prior,
        (true, None) => {
            flags.push(ImageFlag::MissingImage);
            prior
        }
        (true, Some(img)) => {
            let trimap = Trimap::from_mask(coarse.image_id.clone(), &prior);
            if trimap.degenerate {
                flags.push(ImageFlag::DegenerateTrimap);
                prior
            } else {
                let pixels = img.resized(h, w).pixels;
                let out = refine(&pixels, &trimap, &cfg.grabcut_params()?)?;
                energy_trace = out.energy_trace;
                out.mask.mask
            }
        }
    };

    Ok(ImageResult {
        image_id: relevance_grid.image_id().to_owned(),
        relevance,
        seed,
        coarse,
        mask,
        energy_trace,
        flags,
    })
}

fn fit(grids: &[&PatchFeatureGrid], class_id: &str) -> Option<RelevanceModel> {
    match fit_relevance_model_on(grids) {
        Ok(m) => Some(m),
        Err(e) => {
            warn!("{class_id}: relevance model unavailable ({e}); using plain cuts");
            None
        }
    }
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs the full method on one class held in memory.
///
/// `images` may be empty when `cfg.refine` is false. Per-image errors are
/// collected in the outcome rather than aborting the class.
pub fn segment_class(
    relevance: &ClassFeatureSet,
    affinity: &ClassFeatureSet,
    images: &[ClassImage],
    mode: &ExperimentMode,
    cfg: &PipelineConfig,
) -> Result<ClassOutcome> {
    cfg.validate()?;
    check_packs(relevance, affinity)?;
    let by_id: HashMap<&str, &ClassImage> = images.iter().map(|i| (i.image_id.as_str(), i)).collect();
    let class_id = relevance.class_id();
    let cap = cfg.max_images_for_relevance;

    let (shared, fit_order) = match mode {
        ExperimentMode::LeaveOneOut => (None, Vec::new()),
        _ => {
            let grids = fit_grids(relevance, mode, cap);
            let order = grids.iter().map(|g| g.image_id().to_owned()).collect();
            (fit(&grids, class_id), order)
        }
    };

    let run = |rel: &PatchFeatureGrid| -> Result<ImageResult> {
        let aff = affinity.get(rel.image_id()).expect("checked above");
        let loo;
        let model = match mode {
            ExperimentMode::LeaveOneOut => {
                let others = capped(relevance.grids().iter().filter(|g| g.image_id() != rel.image_id()), cap);
                loo = fit(&others, class_id);
                loo.as_ref()
            }
            _ => shared.as_ref(),
        };
        segment_image(model, rel, aff, by_id.get(rel.image_id()).copied(), cfg)
    };

    let outcomes: Vec<(String, Result<ImageResult>)> = with_pool(cfg.workers, || {
        relevance
            .grids()
            .par_iter()
            .map(|g| (g.image_id().to_owned(), run(g)))
            .collect()
    })?;

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in outcomes {
        match r {
            Ok(res) => results.push(res),
            Err(e) => {
                warn!("{class_id}/{id}: {e}");
                failures.push((id, e.to_string()));
            }
        }
    }
    Ok(ClassOutcome {
        class_id: class_id.to_owned(),
        results,
        failures,
        fit_order,
    })
}

impl ImageResult {
    pub fn method(&self) -> CutMethod {
        self.coarse.method
    }
}
