use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::metrics::{aggregate, evaluate_image, EvalMode, MetricReport, SaliencyPrediction};
use crate::tensor_io::{load_gray_png, load_mask_png, resize_bool_nearest, resize_gray_bilinear};
use crate::{Error, Result};

/// One prediction file found under a prediction directory.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionFile {
    pub class_id: String,
    pub image_id: String,
    pub path: PathBuf,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    Ok(entries)
}

fn pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn class_files(class_id: &str, dir: &Path) -> Result<Vec<PredictionFile>> {
    // A run output directory keeps its final masks under `masks/`.
    let dir = if dir.join("masks").is_dir() {
        dir.join("masks")
    } else {
        dir.to_owned()
    };
    Ok(pngs(&dir)?
        .into_iter()
        .map(|path| PredictionFile {
            class_id: class_id.to_owned(),
            image_id: stem(&path),
            path,
        })
        .collect())
}

/// Predictions under `dir`: PNGs directly (or in `masks/`) form one class
/// named after the directory; otherwise each subdirectory is a class.
pub fn collect_predictions(dir: &Path) -> Result<Vec<PredictionFile>> {
    let own = stem(dir);
    let direct = class_files(&own, dir)?;
    if !direct.is_empty() {
        return Ok(direct);
    }
    let mut all = Vec::new();
    for sub in sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()) {
        all.extend(class_files(&stem(&sub), &sub)?);
    }
    Ok(all)
}

fn find_gt(gt_dir: &Path, class_id: &str, image_id: &str) -> Option<PathBuf> {
    [gt_dir.join(class_id), gt_dir.to_owned()]
        .into_iter()
        .map(|d| d.join(format!("{image_id}.png")))
        .find(|p| p.is_file())
}

/// Brings a prediction to ground-truth resolution: nearest neighbour for
/// binary maps, bilinear for soft ones.
pub fn align_prediction(image_id: &str, map: Array2<f64>, shape: (usize, usize)) -> Result<SaliencyPrediction> {
    let pred = SaliencyPrediction::new(image_id, map)?;
    if pred.map().dim() == shape {
        return Ok(pred);
    }
    let resized = if pred.is_binary() {
        resize_bool_nearest(&pred.binarize(), shape.0, shape.1).mapv(|b| if b { 1.0 } else { 0.0 })
    } else {
        resize_gray_bilinear(pred.map(), shape.0, shape.1).mapv(|v| v.clamp(0.0, 1.0))
    };
    SaliencyPrediction::new(image_id, resized)
}

/// Scores every prediction under `pred_dir` against masks in `gt_dir`.
///
/// The mode only selects the leading columns of the report's table; every
/// measure is computed.
pub fn evaluate(pred_dir: &Path, gt_dir: &Path, _mode: EvalMode) -> Result<MetricReport> {
    let preds = collect_predictions(pred_dir)?;
    if preds.is_empty() {
        return Err(Error::Empty("prediction directory"));
    }
    let mut missing = Vec::new();
    let mut pairs = Vec::new();
    for p in preds {
        match find_gt(gt_dir, &p.class_id, &p.image_id) {
            Some(gt) => pairs.push((p, gt)),
            None => missing.push(p.image_id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingGroundTruth(missing));
    }
    let mut per_image = Vec::with_capacity(pairs.len());
    for (p, gt_path) in pairs {
        let gt = load_mask_png(&gt_path)?;
        let pred = align_prediction(&p.image_id, load_gray_png(&p.path)?, gt.dim())?;
        per_image.push(evaluate_image(&p.class_id, &pred, &gt)?);
    }
    aggregate(per_image)
}
