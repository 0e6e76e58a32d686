use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::evaluate::align_prediction;
use super::run::load_class_images;
use super::segment::{segment_class, ExperimentMode};
use super::PipelineConfig;
use crate::metrics::{aggregate, evaluate_image, MetricMeans, SaliencyPrediction};
use crate::tensor_io::{find_image_file, load_mask_png, read_feature_pack, ClassFeatureSet, ClassImage};
use crate::{Error, Result};

/// One class of an ablation: a feature pack per source tag plus images and
/// ground truth.
#[derive(Clone, Debug)]
pub struct AblationClass {
    pub class_id: String,
    pub packs: BTreeMap<String, ClassFeatureSet>,
    pub images: Vec<ClassImage>,
    pub truth: BTreeMap<String, ndarray::Array2<bool>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub relevance_source: String,
    pub affinity_source: String,
    pub images: usize,
    pub failures: usize,
    pub means: MetricMeans,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    /// Sorted by (relevance source, affinity source).
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let w0 = self
            .rows
            .iter()
            .map(|r| r.relevance_source.len())
            .chain([9])
            .max()
            .unwrap_or(9);
        let w1 = self
            .rows
            .iter()
            .map(|r| r.affinity_source.len())
            .chain([8])
            .max()
            .unwrap_or(8);
        let _ = writeln!(
            out,
            "{:<w0$}  {:<w1$}  {:>5}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}",
            "relevance", "affinity", "n", "J_m", "P_m", "MAE", "Fmax", "S"
        );
        for r in &self.rows {
            let m = &r.means;
            let _ = writeln!(
                out,
                "{:<w0$}  {:<w1$}  {:>5}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}",
                r.relevance_source,
                r.affinity_source,
                r.images,
                m.jaccard,
                m.precision,
                m.mae,
                m.f_beta_max,
                m.s_measure
            );
        }
        out
    }
}

fn sorted_unique(tags: &[String]) -> Vec<String> {
    let mut v = tags.to_vec();
    v.sort();
    v.dedup();
    v
}

/// Runs every (relevance source, affinity source) combination over all
/// classes and scores the final masks against ground truth.
pub fn run_ablation_matrix(
    classes: &[AblationClass],
    relevance_sources: &[String],
    affinity_sources: &[String],
    cfg: &PipelineConfig,
) -> Result<AblationTable> {
    let mut rows = Vec::new();
    for rel in sorted_unique(relevance_sources) {
        for aff in sorted_unique(affinity_sources) {
            let mut per_image = Vec::new();
            let mut failures = 0;
            for class in classes {
                let pack = |tag: &str| {
                    class
                        .packs
                        .get(tag)
                        .ok_or_else(|| Error::InvalidArgument(format!("class {} has no `{tag}` pack", class.class_id)))
                };
                let mut run_cfg = cfg.clone();
                run_cfg.relevance_source = rel.clone();
                run_cfg.affinity_source = aff.clone();
                let outcome = segment_class(
                    pack(&rel)?,
                    pack(&aff)?,
                    &class.images,
                    &ExperimentMode::Standard,
                    &run_cfg,
                )?;
                failures += outcome.failures.len();
                for r in &outcome.results {
                    let gt = class
                        .truth
                        .get(&r.image_id)
                        .ok_or_else(|| Error::MissingGroundTruth(vec![r.image_id.clone()]))?;
                    let pred = SaliencyPrediction::from_mask(r.image_id.clone(), &r.mask);
                    let pred = align_prediction(&r.image_id, pred.map().clone(), gt.dim())?;
                    per_image.push(evaluate_image(&class.class_id, &pred, gt)?);
                }
            }
            let report = aggregate(per_image)?;
            rows.push(AblationRow {
                relevance_source: rel.clone(),
                affinity_source: aff.clone(),
                images: report.count,
                failures,
                means: report.overall,
            });
        }
    }
    Ok(AblationTable { rows })
}

/// On-disk description of an ablation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub classes: Vec<AblationClassSpec>,
    pub relevance_sources: Vec<String>,
    pub affinity_sources: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationClassSpec {
    pub class_id: String,
    /// Source tag to pack directory.
    pub packs: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub images: Option<PathBuf>,
    pub gt: PathBuf,
}

impl AblationSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: AblationSpec = serde_json::from_str(&text)?;
        // Relative paths are taken from the spec file's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        for c in &mut spec.classes {
            for p in c.packs.values_mut() {
                *p = base.join(&*p);
            }
            c.images = c.images.as_ref().map(|p| base.join(p));
            c.gt = base.join(&c.gt);
        }
        Ok(spec)
    }

    /// Reads only the packs named by the requested sources.
    pub fn load_classes(&self) -> Result<Vec<AblationClass>> {
        let wanted: Vec<&String> = self.relevance_sources.iter().chain(&self.affinity_sources).collect();
        let mut out = Vec::new();
        for c in &self.classes {
            let mut packs = BTreeMap::new();
            for tag in &wanted {
                if packs.contains_key(*tag) {
                    continue;
                }
                let path = c
                    .packs
                    .get(*tag)
                    .ok_or_else(|| Error::InvalidArgument(format!("class {} has no `{tag}` pack", c.class_id)))?;
                packs.insert((*tag).clone(), read_feature_pack(path)?);
            }
            let ids: Vec<String> = packs
                .values()
                .next()
                .map(|p| p.image_ids().map(str::to_owned).collect())
                .unwrap_or_default();
            let images = match &c.images {
                Some(dir) => load_class_images(dir, ids.iter().map(String::as_str))?,
                None => Vec::new(),
            };
            let mut truth = BTreeMap::new();
            let mut missing = Vec::new();
            for id in &ids {
                match find_image_file(&c.gt, id) {
                    Some(p) => {
                        truth.insert(id.clone(), load_mask_png(&p)?);
                    }
                    None => missing.push(id.clone()),
                }
            }
            if !missing.is_empty() {
                return Err(Error::MissingGroundTruth(missing));
            }
            out.push(AblationClass {
                class_id: c.class_id.clone(),
                packs,
                images,
                truth,
            });
        }
        Ok(out)
    }
}
