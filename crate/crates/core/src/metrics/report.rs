use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{f_beta_max, jaccard, mae, precision, s_measure, SaliencyPrediction};
use super::{DEFAULT_ALPHA, DEFAULT_BETA_SQ, DEFAULT_THRESHOLDS};
use crate::{Error, Result};

/// Which measures a report leads with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// MAE, max F-measure and S-measure.
    Cosal,
    /// Jaccard and pixel accuracy.
    Coseg,
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosal" => Ok(Self::Cosal),
            "coseg" => Ok(Self::Coseg),
            _ => Err(Error::InvalidArgument(format!(
                "unknown eval mode `{s}` (cosal | coseg)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub class_id: String,
    pub image_id: String,
    pub jaccard: f64,
    pub precision: f64,
    pub mae: f64,
    pub f_beta_max: f64,
    pub s_measure: f64,
    /// Ground truth had no foreground; `f_beta_max` is 0 by convention.
    pub f_undefined: bool,
}

/// Scores one prediction. Jaccard and accuracy use the prediction
/// binarized at 0.5.
pub fn evaluate_image(class_id: &str, pred: &SaliencyPrediction, gt: &Array2<bool>) -> Result<ImageMetrics> {
    let map = pred.map();
    let binary = pred.binarize();
    let f = f_beta_max(map, gt, DEFAULT_BETA_SQ, DEFAULT_THRESHOLDS)?;
    Ok(ImageMetrics {
        class_id: class_id.to_owned(),
        image_id: pred.image_id.clone(),
        jaccard: jaccard(&binary, gt)?,
        precision: precision(&binary, gt)?,
        mae: mae(map, gt)?,
        f_beta_max: f.value,
        s_measure: s_measure(map, gt, DEFAULT_ALPHA)?,
        f_undefined: f.undefined,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub jaccard: f64,
    pub precision: f64,
    pub mae: f64,
    pub f_beta_max: f64,
    pub s_measure: f64,
}

impl MetricMeans {
    fn of<'a>(items: impl IntoIterator<Item = &'a ImageMetrics>) -> (Self, usize) {
        let mut m = MetricMeans::default();
        let mut n = 0usize;
        for it in items {
            m.jaccard += it.jaccard;
            m.precision += it.precision;
            m.mae += it.mae;
            m.f_beta_max += it.f_beta_max;
            m.s_measure += it.s_measure;
            n += 1;
        }
        let k = n.max(1) as f64;
        m.jaccard /= k;
        m.precision /= k;
        m.mae /= k;
        m.f_beta_max /= k;
        m.s_measure /= k;
        (m, n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class_id: String,
    pub count: usize,
    pub means: MetricMeans,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_image: Vec<ImageMetrics>,
    /// Sorted by class id.
    pub per_class: Vec<ClassSummary>,
    /// Unweighted mean over all images.
    pub overall: MetricMeans,
    pub count: usize,
    pub f_undefined_count: usize,
}

/// Unweighted means per class and over every image.
pub fn aggregate(per_image: Vec<ImageMetrics>) -> Result<MetricReport> {
    if per_image.is_empty() {
        return Err(Error::Empty("metric list"));
    }
    let mut groups: BTreeMap<&str, Vec<&ImageMetrics>> = BTreeMap::new();
    for m in &per_image {
        groups.entry(&m.class_id).or_default().push(m);
    }
    let per_class = groups
        .into_iter()
        .map(|(class_id, items)| {
            let (means, count) = MetricMeans::of(items);
            ClassSummary {
                class_id: class_id.to_owned(),
                count,
                means,
            }
        })
        .collect();
    let (overall, count) = MetricMeans::of(&per_image);
    let f_undefined_count = per_image.iter().filter(|m| m.f_undefined).count();
    Ok(MetricReport {
        per_class,
        overall,
        count,
        f_undefined_count,
        per_image,
    })
}

impl MetricReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned text table, one row per class plus an overall row.
    pub fn to_table(&self, mode: EvalMode) -> String {
        let headers: &[&str] = match mode {
            EvalMode::Cosal => &["class", "n", "MAE↓", "Fmax↑", "S↑"],
            EvalMode::Coseg => &["class", "n", "J_m↑", "P_m↑"],
        };
        let cells = |name: &str, n: usize, m: &MetricMeans| -> Vec<String> {
            let mut row = vec![name.to_owned(), n.to_string()];
            match mode {
                EvalMode::Cosal => {
                    row.push(format!("{:.3}", m.mae));
                    row.push(format!("{:.3}", m.f_beta_max));
                    row.push(format!("{:.3}", m.s_measure));
                }
                EvalMode::Coseg => {
                    row.push(format!("{:.1}", 100.0 * m.jaccard));
                    row.push(format!("{:.1}", 100.0 * m.precision));
                }
            }
            row
        };
        let mut rows: Vec<Vec<String>> = vec![headers.iter().map(|s| s.to_string()).collect()];
        for c in &self.per_class {
            rows.push(cells(&c.class_id, c.count, &c.means));
        }
        rows.push(cells("overall", self.count, &self.overall));

        let widths: Vec<usize> = (0..headers.len())
            .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            let mut line = String::new();
            for (i, cell) in row.iter().enumerate() {
                if i == 0 {
                    let _ = write!(line, "{cell:<w$}", w = widths[i]);
                } else {
                    let _ = write!(line, "  {cell:>w$}", w = widths[i]);
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}
