use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use ndarray::Array2;
use serde::Serialize;

use super::segment::{ClassOutcome, ExperimentMode, ImageFlag, ImageResult};
use super::{segment_class, PipelineConfig};
use crate::spectral::CutMethod;
use crate::tensor_io::{
    find_image_file, load_rgb, pack_digest, read_feature_pack, write_gray_png, write_mask_png, ClassImage,
};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Experiment mode as given on disk; donor packs are loaded by [`run_class`].
#[derive(Clone, Debug, PartialEq)]
pub enum JobMode {
    Standard,
    OutlierInjection { count: usize, donor_packs: Vec<PathBuf> },
    LeaveOneOut,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassJob {
    pub relevance_pack: PathBuf,
    pub affinity_pack: PathBuf,
    pub images: Option<PathBuf>,
    pub out: PathBuf,
    pub mode: JobMode,
}

#[derive(Debug, Serialize)]
struct PackRecord {
    path: String,
    sha256: String,
    source_model_tag: String,
    images: usize,
}

#[derive(Debug, Serialize)]
struct ImageRecord<'a> {
    image_id: &'a str,
    method: CutMethod,
    coarse_foreground: usize,
    flags: &'a [ImageFlag],
    energy_trace: &'a [f64],
}

#[derive(Debug, Serialize)]
struct FailureRecord<'a> {
    image_id: &'a str,
    error: &'a str,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    class_id: &'a str,
    mode: String,
    config: &'a PipelineConfig,
    config_sha256: String,
    relevance_pack: PackRecord,
    affinity_pack: PackRecord,
    donor_packs: Vec<PackRecord>,
    fit_order: &'a [String],
    images: Vec<ImageRecord<'a>>,
    failures: Vec<FailureRecord<'a>>,
}

/// Summary of a finished job.
#[derive(Clone, Debug)]
pub struct ClassRun {
    pub outcome: ClassOutcome,
    pub manifest_path: PathBuf,
}

impl ClassRun {
    pub fn has_failures(&self) -> bool {
        !self.outcome.failures.is_empty()
    }
}

fn pack_record(path: &Path, tag: &str, images: usize) -> Result<PackRecord> {
    Ok(PackRecord {
        path: path.display().to_string(),
        sha256: pack_digest(path)?,
        source_model_tag: tag.to_owned(),
        images,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads the RGB images for `ids` that exist in `dir`.
pub fn load_class_images<'a>(dir: &Path, ids: impl Iterator<Item = &'a str>) -> Result<Vec<ClassImage>> {
    let mut out = Vec::new();
    for id in ids {
        if let Some(path) = find_image_file(dir, id) {
            out.push(load_rgb(&path, id)?);
        }
    }
    Ok(out)
}

/// Min-max scaling to `[0, 1]` for visual exports.
fn normalized(v: &Array2<f64>) -> Array2<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        v.mapv(|x| (x - lo) / (hi - lo))
    } else {
        Array2::zeros(v.dim())
    }
}

fn export_debug(dir: &Path, r: &ImageResult) -> Result<()> {
    let id = &r.image_id;
    if let Some(map) = &r.relevance {
        write_gray_png(dir.join(format!("{id}_relevance.png")), map.relevance())?;
    }
    if let Some(seed) = &r.seed {
        write_text(&dir.join(format!("{id}_seed.json")), &seed.to_json()?)?;
    }
    if let Some(x) = &r.coarse.biased_vector {
        write_gray_png(dir.join(format!("{id}_xhat.png")), &normalized(x))?;
    }
    write_text(
        &dir.join(format!("{id}_energy.json")),
        &serde_json::to_string(&r.energy_trace)?,
    )
}

/// Writes masks, coarse masks, optional debug files and the run manifest.
fn write_outputs(
    outcome: &ClassOutcome,
    out: &Path,
    cfg: &PipelineConfig,
    mode_label: String,
    packs: (PackRecord, PackRecord, Vec<PackRecord>),
) -> Result<PathBuf> {
    let masks = out.join("masks");
    let coarse = out.join("coarse");
    create_dir(&masks)?;
    create_dir(&coarse)?;
    let debug = out.join("debug");
    if cfg.export_debug {
        create_dir(&debug)?;
    }
    for r in &outcome.results {
        write_mask_png(masks.join(format!("{}.png", r.image_id)), &r.mask)?;
        write_mask_png(coarse.join(format!("{}.png", r.image_id)), &r.coarse.mask)?;
        if cfg.export_debug {
            export_debug(&debug, r)?;
        }
    }

    let manifest = RunManifest {
        class_id: &outcome.class_id,
        mode: mode_label,
        config: cfg,
        config_sha256: cfg.digest(),
        relevance_pack: packs.0,
        affinity_pack: packs.1,
        donor_packs: packs.2,
        fit_order: &outcome.fit_order,
        images: outcome
            .results
            .iter()
            .map(|r| ImageRecord {
                image_id: &r.image_id,
                method: r.coarse.method,
                coarse_foreground: r.coarse.foreground_count(),
                flags: &r.flags,
                energy_trace: &r.energy_trace,
            })
            .collect(),
        failures: outcome
            .failures
            .iter()
            .map(|(id, e)| FailureRecord { image_id: id, error: e })
            .collect(),
    };
    let path = out.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_text(&path, &text)?;
    Ok(path)
}

/// Reads the job's packs and images, segments the class and writes results.
pub fn run_class(job: &ClassJob, cfg: &PipelineConfig) -> Result<ClassRun> {
    let relevance = read_feature_pack(&job.relevance_pack)?;
    let affinity = if job.affinity_pack == job.relevance_pack {
        relevance.clone()
    } else {
        read_feature_pack(&job.affinity_pack)?
    };
    let images = match &job.images {
        Some(dir) => load_class_images(dir, relevance.image_ids())?,
        None => Vec::new(),
    };

    let mut donor_records = Vec::new();
    let mode = match &job.mode {
        JobMode::Standard => ExperimentMode::Standard,
        JobMode::LeaveOneOut => ExperimentMode::LeaveOneOut,
        JobMode::OutlierInjection { count, donor_packs } => {
            let mut donors = Vec::new();
            for p in donor_packs {
                let set = read_feature_pack(p)?;
                donor_records.push(pack_record(p, set.source_model_tag(), set.len())?);
                donors.push(set);
            }
            ExperimentMode::OutlierInjection { count: *count, donors }
        }
    };

    info!(
        "{}: {} images, mode {}",
        relevance.class_id(),
        relevance.len(),
        mode.label()
    );
    let outcome = segment_class(&relevance, &affinity, &images, &mode, cfg)?;
    let packs = (
        pack_record(&job.relevance_pack, relevance.source_model_tag(), relevance.len())?,
        pack_record(&job.affinity_pack, affinity.source_model_tag(), affinity.len())?,
        donor_records,
    );
    let manifest_path = write_outputs(&outcome, &job.out, cfg, mode.label(), packs)?;
    Ok(ClassRun { outcome, manifest_path })
}
