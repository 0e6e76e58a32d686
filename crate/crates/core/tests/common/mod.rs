//! Independent reference implementations used as test oracles.
//!
//! Everything here is written with plain loops over `Vec`s so it shares no
//! code path with the library beyond the input types.
#![allow(dead_code)]

use coseg_core::grabcut::CutProblem;
use coseg_core::spectral::AffinityGraph;
use coseg_core::tensor_io::PatchFeatureGrid;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns ascending eigenvalues and column eigenvectors `v[row][col]`.
pub fn jacobi_eigen(a: &Dense) -> (Vec<f64>, Dense) {
    let n = a.len();
    let mut m = a.clone();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].total_cmp(&m[j][j]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    (values, vectors)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(b: &Dense) -> Dense {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = b[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = if i == j { s.sqrt() } else { s / l[j][j] };
        }
    }
    l
}

/// Generalized symmetric-definite solve `A y = lambda B y` through a dense
/// Cholesky reduction. Vectors are B-orthonormal columns.
pub fn generalized_eigen(a: &Dense, b: &Dense) -> (Vec<f64>, Dense) {
    let n = a.len();
    let l = cholesky(b);
    // Tinv = L^-1 by forward substitution on each unit vector.
    let mut linv = vec![vec![0.0; n]; n];
    for col in 0..n {
        for i in 0..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i][k] * linv[k][col];
            }
            linv[i][col] = s / l[i][i];
        }
    }
    // C = L^-1 A L^-T.
    let mut tmp = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            tmp[i][j] = (0..n).map(|k| linv[i][k] * a[k][j]).sum();
        }
    }
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            c[i][j] = (0..n).map(|k| tmp[i][k] * linv[j][k]).sum();
        }
    }
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (c[i][j] + c[j][i]);
            c[i][j] = avg;
            c[j][i] = avg;
        }
    }
    let (values, z) = jacobi_eigen(&c);
    // y = L^-T z.
    let mut y = vec![vec![0.0; n]; n];
    for col in 0..n {
        for i in 0..n {
            y[i][col] = (0..n).map(|k| linv[k][i] * z[k][col]).sum();
        }
    }
    (values, y)
}

/// Flips `v` so its largest-magnitude entry (lowest index on ties) is positive.
pub fn canonical_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(i) = v.iter().position(|x| x.abs() >= max * (1.0 - 1e-9)) {
        if v[i] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Random symmetric {epsilon, 1} affinity with unit diagonal.
pub fn random_two_valued(n: usize, p: f64, eps: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut e = Array2::from_elem((n, n), eps);
    for i in 0..n {
        e[[i, i]] = 1.0;
        for j in i + 1..n {
            if rng.random_bool(p) {
                e[[i, j]] = 1.0;
                e[[j, i]] = 1.0;
            }
        }
    }
    e
}

pub fn graph_from(e: Array2<f64>, eps: f64) -> AffinityGraph {
    let n = e.nrows();
    AffinityGraph::from_matrix("oracle", (1, n), e, 0.2, eps).unwrap()
}

/// Laplacian and degree matrices of an affinity.
pub fn laplacian_pair(e: &Array2<f64>) -> (Dense, Dense) {
    let n = e.nrows();
    let deg: Vec<f64> = (0..n).map(|i| (0..n).map(|j| e[[i, j]]).sum()).collect();
    let a = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { deg[i] - e[[i, j]] } else { -e[[i, j]] })
                .collect()
        })
        .collect();
    let b = (0..n)
        .map(|i| (0..n).map(|j| if i == j { deg[i] } else { 0.0 }).collect())
        .collect();
    (a, b)
}

/// Mean, top scatter eigenvector (canonical sign) and its eigenvalue over
/// every descriptor of `grids`.
pub fn ddt_oracle(grids: &[&PatchFeatureGrid]) -> (Vec<f64>, Vec<f64>, f64) {
    let d = grids[0].feature_dim();
    let mut mu = vec![0.0; d];
    let mut count = 0.0;
    for g in grids {
        for p in 0..g.len() {
            for k in 0..d {
                mu[k] += f64::from(g.features()[[p, k]]);
            }
            count += 1.0;
        }
    }
    mu.iter_mut().for_each(|m| *m /= count);
    let mut scatter = vec![vec![0.0; d]; d];
    for g in grids {
        for p in 0..g.len() {
            let x: Vec<f64> = (0..d).map(|k| f64::from(g.features()[[p, k]]) - mu[k]).collect();
            for i in 0..d {
                for j in 0..d {
                    scatter[i][j] += x[i] * x[j];
                }
            }
        }
    }
    let (values, vectors) = jacobi_eigen(&scatter);
    let mut xi: Vec<f64> = (0..d).map(|r| vectors[r][d - 1]).collect();
    canonical_sign(&mut xi);
    (mu, xi, values[d - 1])
}

/// Border-majority sign: -1 when non-negative border projections strictly
/// outnumber negative ones.
pub fn sign_oracle(mu: &[f64], xi: &[f64], grids: &[&PatchFeatureGrid]) -> f64 {
    let (mut nonneg, mut neg) = (0usize, 0usize);
    for g in grids {
        let (h, w) = g.shape();
        for r in 0..h {
            for c in 0..w {
                if r != 0 && c != 0 && r != h - 1 && c != w - 1 {
                    continue;
                }
                let p: f64 = (0..xi.len())
                    .map(|k| xi[k] * (f64::from(g.features()[[r * w + c, k]]) - mu[k]))
                    .sum();
                if p >= 0.0 {
                    nonneg += 1;
                } else {
                    neg += 1;
                }
            }
        }
    }
    if nonneg > neg {
        -1.0
    } else {
        1.0
    }
}

/// Relevance `max(0, P) / max P` from explicit model parameters.
pub fn relevance_oracle(mu: &[f64], xi: &[f64], sigma: f64, g: &PatchFeatureGrid) -> Vec<f64> {
    let p: Vec<f64> = (0..g.len())
        .map(|i| {
            let mut s = 0.0;
            for k in 0..xi.len() {
                s += xi[k] * (f64::from(g.features()[[i, k]]) - mu[k]);
            }
            sigma * s
        })
        .collect();
    let max = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        return vec![0.0; p.len()];
    }
    p.iter().map(|&v| if v > 0.0 { v / max } else { 0.0 }).collect()
}

/// Minimum energy over all labellings of a small cut problem.
pub fn brute_force_min_energy(problem: &CutProblem) -> f64 {
    let n = problem.len();
    assert!(n <= 20);
    let mut best = f64::INFINITY;
    let mut labels = vec![false; n];
    for bits in 0u32..(1 << n) {
        for (i, l) in labels.iter_mut().enumerate() {
            *l = bits >> i & 1 == 1;
        }
        let e = problem.energy(&labels);
        best = best.min(e);
    }
    best
}

/// Energy of a labelling computed without `CutProblem::energy`.
pub fn cut_energy_oracle(problem: &CutProblem, labels: &[bool]) -> f64 {
    let mut e = 0.0;
    for i in 0..labels.len() {
        e += if labels[i] {
            problem.unary_fg[i]
        } else {
            problem.unary_bg[i]
        };
    }
    for &(i, j, w) in &problem.edges {
        if labels[i] ^ labels[j] {
            e += w;
        }
    }
    e
}

pub mod metrics {
    //! Pixel-loop metric references.

    use ndarray::Array2;

    pub fn jaccard(p: &Array2<bool>, g: &Array2<bool>) -> f64 {
        let (mut i, mut u) = (0.0, 0.0);
        for r in 0..p.nrows() {
            for c in 0..p.ncols() {
                if p[[r, c]] && g[[r, c]] {
                    i += 1.0;
                }
                if p[[r, c]] || g[[r, c]] {
                    u += 1.0;
                }
            }
        }
        if u == 0.0 {
            1.0
        } else {
            i / u
        }
    }

    pub fn accuracy(p: &Array2<bool>, g: &Array2<bool>) -> f64 {
        let mut ok = 0.0;
        for r in 0..p.nrows() {
            for c in 0..p.ncols() {
                if p[[r, c]] == g[[r, c]] {
                    ok += 1.0;
                }
            }
        }
        ok / p.len() as f64
    }

    pub fn mae(p: &Array2<f64>, g: &Array2<bool>) -> f64 {
        let mut s = 0.0;
        for r in 0..p.nrows() {
            for c in 0..p.ncols() {
                let t = if g[[r, c]] { 1.0 } else { 0.0 };
                s += (p[[r, c]] - t).abs();
            }
        }
        s / p.len() as f64
    }

    /// Loops all 256 thresholds and recounts pixels at each.
    pub fn f_beta_max(p: &Array2<f64>, g: &Array2<bool>, beta_sq: f64) -> f64 {
        let positives = g.iter().filter(|&&x| x).count() as f64;
        if positives == 0.0 {
            return 0.0;
        }
        let mut best = 0.0f64;
        for k in 0..256 {
            let t = k as f64 / 255.0;
            let (mut tp, mut pp) = (0.0, 0.0);
            for (v, &gt) in p.iter().zip(g.iter()) {
                if *v >= t {
                    pp += 1.0;
                    if gt {
                        tp += 1.0;
                    }
                }
            }
            let prec = if pp > 0.0 { tp / pp } else { 0.0 };
            let rec = tp / positives;
            let den = beta_sq * prec + rec;
            let f = if den > 0.0 {
                (1.0 + beta_sq) * prec * rec / den
            } else {
                0.0
            };
            if f > best {
                best = f;
            }
        }
        best
    }

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn sample_std(v: &[f64]) -> f64 {
        if v.len() <= 1 {
            return 0.0;
        }
        let m = mean(v);
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    }

    fn object(v: &[f64]) -> f64 {
        if v.is_empty() {
            return 0.0;
        }
        let x = mean(v);
        2.0 * x / (x * x + 1.0 + sample_std(v) + f64::EPSILON)
    }

    /// Block similarity over the rectangle `[r0, r1) x [c0, c1)`.
    fn ssim(p: &Array2<f64>, g: &Array2<bool>, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for r in r0..r1 {
            for c in c0..c1 {
                xs.push(p[[r, c]]);
                ys.push(if g[[r, c]] { 1.0 } else { 0.0 });
            }
        }
        let n = xs.len() as f64;
        let (x, y) = (mean(&xs), mean(&ys));
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut sxy = 0.0;
        for k in 0..xs.len() {
            sx += (xs[k] - x).powi(2);
            sy += (ys[k] - y).powi(2);
            sxy += (xs[k] - x) * (ys[k] - y);
        }
        let d = n - 1.0 + f64::EPSILON;
        let (sx, sy, sxy) = (sx / d, sy / d, sxy / d);
        let a = 4.0 * x * y * sxy;
        let b = (x * x + y * y) * (sx + sy);
        if a != 0.0 {
            a / (b + f64::EPSILON)
        } else if b == 0.0 {
            1.0
        } else {
            0.0
        }
    }

    pub fn s_measure(p: &Array2<f64>, g: &Array2<bool>) -> f64 {
        let (rows, cols) = p.dim();
        let y = g.iter().filter(|&&v| v).count() as f64 / g.len() as f64;
        if y == 0.0 {
            return (1.0 - mean(&p.iter().copied().collect::<Vec<_>>())).clamp(0.0, 1.0);
        }
        if y == 1.0 {
            return mean(&p.iter().copied().collect::<Vec<_>>()).clamp(0.0, 1.0);
        }
        let mut fg = Vec::new();
        let mut bg = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if g[[r, c]] {
                    fg.push(p[[r, c]]);
                } else {
                    bg.push(1.0 - p[[r, c]]);
                }
            }
        }
        let so = y * object(&fg) + (1.0 - y) * object(&bg);

        // Centroid with 1-based coordinates, rounded half away from zero.
        let (mut sr, mut sc, mut n) = (0.0, 0.0, 0.0);
        for r in 0..rows {
            for c in 0..cols {
                if g[[r, c]] {
                    sr += (r + 1) as f64;
                    sc += (c + 1) as f64;
                    n += 1.0;
                }
            }
        }
        let yc = (sr / n).round() as usize;
        let xc = (sc / n).round() as usize;
        let area = (rows * cols) as f64;
        let mut sr_total = 0.0;
        for (r0, r1, c0, c1) in [
            (0, yc, 0, xc),
            (0, yc, xc, cols),
            (yc, rows, 0, xc),
            (yc, rows, xc, cols),
        ] {
            let wgt = ((r1 - r0) * (c1 - c0)) as f64 / area;
            if wgt > 0.0 {
                sr_total += wgt * ssim(p, g, r0, r1, c0, c1);
            }
        }
        (0.5 * so + 0.5 * sr_total).clamp(0.0, 1.0)
    }
}
