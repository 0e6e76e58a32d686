//! Mask and saliency-map evaluation.
//!
//! Binary co-segmentation masks are scored with Jaccard and pixel accuracy;
//! soft co-saliency maps with MAE, maximum F-measure and S-measure.

mod report;
mod structure;

use ndarray::Array2;

use crate::{Error, Result};

pub use report::{aggregate, evaluate_image, ClassSummary, EvalMode, ImageMetrics, MetricMeans, MetricReport};
pub use structure::{s_measure, DEFAULT_ALPHA};

pub const DEFAULT_BETA_SQ: f64 = 0.3;
pub const DEFAULT_THRESHOLDS: usize = 256;

/// A soft prediction in `[0, 1]`; binary masks are the `{0, 1}` special case.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyPrediction {
    pub image_id: String,
    map: Array2<f64>,
}

impl SaliencyPrediction {
    pub fn new(image_id: impl Into<String>, map: Array2<f64>) -> Result<Self> {
        if let Some(v) = map.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("prediction value {v} outside [0, 1]")));
        }
        Ok(Self {
            image_id: image_id.into(),
            map,
        })
    }

    pub fn from_mask(image_id: impl Into<String>, mask: &Array2<bool>) -> Self {
        Self {
            image_id: image_id.into(),
            map: mask.mapv(|b| if b { 1.0 } else { 0.0 }),
        }
    }

    pub fn map(&self) -> &Array2<f64> {
        &self.map
    }

    /// True when every value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.map.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Foreground where the value is at least one half.
    pub fn binarize(&self) -> Array2<bool> {
        self.map.mapv(|v| v >= 0.5)
    }
}

pub(crate) fn check_dims<A, B>(pred: &Array2<A>, gt: &Array2<B>) -> Result<()> {
    if pred.dim() != gt.dim() {
        return Err(Error::Shape(format!(
            "prediction is {:?} but ground truth is {:?}",
            pred.dim(),
            gt.dim()
        )));
    }
    Ok(())
}

/// `|P & G| / |P | G|`, or 1 when both masks are empty.
pub fn jaccard(pred: &Array2<bool>, gt: &Array2<bool>) -> Result<f64> {
    check_dims(pred, gt)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.iter().zip(gt) {
        inter += usize::from(p && g);
        union += usize::from(p || g);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Per-pixel labelling accuracy.
pub fn precision(pred: &Array2<bool>, gt: &Array2<bool>) -> Result<f64> {
    check_dims(pred, gt)?;
    if gt.is_empty() {
        return Err(Error::Empty("mask"));
    }
    let agree = pred.iter().zip(gt).filter(|(p, g)| p == g).count();
    Ok(agree as f64 / gt.len() as f64)
}

pub fn mae(pred: &Array2<f64>, gt: &Array2<bool>) -> Result<f64> {
    check_dims(pred, gt)?;
    if gt.is_empty() {
        return Err(Error::Empty("mask"));
    }
    let sum: f64 = pred
        .iter()
        .zip(gt)
        .map(|(&p, &g)| (p - if g { 1.0 } else { 0.0 }).abs())
        .sum();
    Ok(sum / gt.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FMeasure {
    pub value: f64,
    /// The ground truth has no foreground, so recall is undefined and the
    /// value is reported as 0.
    pub undefined: bool,
}

/// Maximum F-measure over `n_thresholds` evenly spaced thresholds in `[0, 1]`.
pub fn f_beta_max(pred: &Array2<f64>, gt: &Array2<bool>, beta_sq: f64, n_thresholds: usize) -> Result<FMeasure> {
    if n_thresholds < 2 {
        return Err(Error::InvalidArgument("need at least two thresholds".into()));
    }
    let steps = (n_thresholds - 1) as f64;
    let thresholds: Vec<f64> = (0..n_thresholds).map(|k| k as f64 / steps).collect();
    f_beta_max_at(pred, gt, beta_sq, &thresholds)
}

/// Maximum F-measure over an explicit threshold list; a pixel is predicted
/// foreground at `t` when its value is `>= t`.
pub fn f_beta_max_at(pred: &Array2<f64>, gt: &Array2<bool>, beta_sq: f64, thresholds: &[f64]) -> Result<FMeasure> {
    check_dims(pred, gt)?;
    let positives = gt.iter().filter(|&&g| g).count();
    if positives == 0 {
        return Ok(FMeasure {
            value: 0.0,
            undefined: true,
        });
    }
    // Descending by value; prefix counts give the hits for every threshold.
    let mut scored: Vec<(f64, bool)> = pred.iter().copied().zip(gt.iter().copied()).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut hits = Vec::with_capacity(scored.len() + 1);
    hits.push(0usize);
    for &(_, g) in &scored {
        hits.push(hits.last().unwrap() + usize::from(g));
    }

    let mut best = 0.0f64;
    for &t in thresholds {
        let predicted = scored.partition_point(|&(v, _)| v >= t);
        let tp = hits[predicted] as f64;
        let p = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let r = tp / positives as f64;
        let denom = beta_sq * p + r;
        let f = if denom > 0.0 {
            (1.0 + beta_sq) * p * r / denom
        } else {
            0.0
        };
        best = best.max(f);
    }
    Ok(FMeasure {
        value: best,
        undefined: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn jaccard_cases() {
        let a = array![[true, false], [true, true]];
        let b = array![[false, true], [false, false]];
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard(&a, &b).unwrap(), 0.0);
        let e = Array2::from_elem((2, 2), false);
        assert_eq!(jaccard(&e, &e).unwrap(), 1.0);
        assert!(jaccard(&a, &Array2::from_elem((1, 2), false)).is_err());
    }

    #[test]
    fn accuracy_cases() {
        let a = array![[true, false], [true, true]];
        assert_eq!(precision(&a, &a).unwrap(), 1.0);
        assert_eq!(precision(&a.mapv(|v| !v), &a).unwrap(), 0.0);
    }

    #[test]
    fn mae_cases() {
        let g = array![[true, false], [false, false]];
        assert_eq!(mae(&g.mapv(f64::from), &g).unwrap(), 0.0);
        assert_eq!(mae(&Array2::from_elem((2, 2), 0.5), &g).unwrap(), 0.5);
    }

    #[test]
    fn f_measure_cases() {
        let g = array![[true, false], [false, true]];
        let f = f_beta_max(&g.mapv(f64::from), &g, DEFAULT_BETA_SQ, 256).unwrap();
        assert_eq!(f.value, 1.0);
        // t = 0 marks every pixel foreground: p = 1/2, r = 1.
        let z = Array2::zeros((2, 2));
        let zero = f_beta_max(&z, &g, DEFAULT_BETA_SQ, 256).unwrap();
        assert!((zero.value - 1.3 * 0.5 / (0.3 * 0.5 + 1.0)).abs() < 1e-15);
        let positive: Vec<f64> = (1..256).map(|k| k as f64 / 255.0).collect();
        assert_eq!(f_beta_max_at(&z, &g, DEFAULT_BETA_SQ, &positive).unwrap().value, 0.0);
        let undefined = f_beta_max(&g.mapv(f64::from), &Array2::from_elem((2, 2), false), 0.3, 256).unwrap();
        assert!(undefined.undefined && undefined.value == 0.0);
    }

    #[test]
    fn prediction_range_is_checked() {
        assert!(SaliencyPrediction::new("x", array![[1.5]]).is_err());
        assert!(!SaliencyPrediction::new("x", array![[0.25]]).unwrap().binarize()[[0, 0]]);
    }
}
