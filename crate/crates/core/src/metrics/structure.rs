//! Structure measure: object-aware plus region-aware similarity between a
//! soft map and a binary ground truth.

use ndarray::{s, Array2, ArrayView2};

use super::check_dims;
use crate::Result;

pub const DEFAULT_ALPHA: f64 = 0.5;

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Similarity of the values inside one region to a flat 1.
fn object_score(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let (x, sigma) = mean_std(values);
    2.0 * x / (x * x + 1.0 + sigma + f64::EPSILON)
}

fn s_object(pred: &Array2<f64>, gt: &Array2<bool>) -> f64 {
    let fg: Vec<f64> = pred.iter().zip(gt).filter(|(_, &g)| g).map(|(&p, _)| p).collect();
    let bg: Vec<f64> = pred
        .iter()
        .zip(gt)
        .filter(|(_, &g)| !g)
        .map(|(&p, _)| 1.0 - p)
        .collect();
    let u = fg.len() as f64 / gt.len() as f64;
    u * object_score(&fg) + (1.0 - u) * object_score(&bg)
}

/// SSIM-style similarity of one region, without the luminance constants.
fn region_ssim(pred: ArrayView2<f64>, gt: ArrayView2<bool>) -> f64 {
    let n = pred.len() as f64;
    let x = pred.sum() / n;
    let y = gt.iter().filter(|&&g| g).count() as f64 / n;
    let denom = n - 1.0 + f64::EPSILON;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&p, &g) in pred.iter().zip(gt) {
        let dx = p - x;
        let dy = if g { 1.0 } else { 0.0 } - y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let (sxx, syy, sxy) = (sxx / denom, syy / denom, sxy / denom);
    let alpha = 4.0 * x * y * sxy;
    let beta = (x * x + y * y) * (sxx + syy);
    if alpha != 0.0 {
        alpha / (beta + f64::EPSILON)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn round_half_away(v: f64) -> usize {
    v.round() as usize
}

/// Ground-truth centroid as 1-based `(col, row)` split indices.
fn centroid(gt: &Array2<bool>) -> (usize, usize) {
    let (rows, cols) = gt.dim();
    let total = gt.iter().filter(|&&g| g).count();
    if total == 0 {
        return (round_half_away(cols as f64 / 2.0), round_half_away(rows as f64 / 2.0));
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for ((r, c), &g) in gt.indexed_iter() {
        if g {
            sx += (c + 1) as f64;
            sy += (r + 1) as f64;
        }
    }
    (round_half_away(sx / total as f64), round_half_away(sy / total as f64))
}

fn s_region(pred: &Array2<f64>, gt: &Array2<bool>) -> f64 {
    let (rows, cols) = gt.dim();
    let (x, y) = centroid(gt);
    let area = (rows * cols) as f64;
    let quadrants = [(0..y, 0..x), (0..y, x..cols), (y..rows, 0..x), (y..rows, x..cols)];
    quadrants
        .into_iter()
        .map(|(r, c)| {
            let weight = (r.len() * c.len()) as f64 / area;
            if weight == 0.0 {
                return 0.0;
            }
            let p = pred.slice(s![r.clone(), c.clone()]);
            let g = gt.slice(s![r, c]);
            weight * region_ssim(p, g)
        })
        .sum()
}

/// `alpha * S_object + (1 - alpha) * S_region`, clamped to `[0, 1]`.
///
/// An all-background ground truth scores `1 - mean(pred)` and an
/// all-foreground one `mean(pred)`.
pub fn s_measure(pred: &Array2<f64>, gt: &Array2<bool>, alpha: f64) -> Result<f64> {
    check_dims(pred, gt)?;
    if gt.is_empty() {
        return Err(crate::Error::Empty("mask"));
    }
    let fg = gt.iter().filter(|&&g| g).count();
    let mean_pred = pred.mean().unwrap_or(0.0);
    let q = if fg == 0 {
        1.0 - mean_pred
    } else if fg == gt.len() {
        mean_pred
    } else {
        alpha * s_object(pred, gt) + (1.0 - alpha) * s_region(pred, gt)
    };
    Ok(q.clamp(0.0, 1.0))
}
