//! Full-covariance Gaussian mixtures over RGB colours.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Color = [f64; 3];

/// Smallest eigenvalue a component covariance may have after jitter.
pub const MIN_COVARIANCE_EIGENVALUE: f64 = 1e-6;

const KMEANS_ITERATIONS: usize = 10;
const LOG_2PI: f64 = 1.837_877_066_409_345_3;

type Mat3 = [[f64; 3]; 3];

#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub weight: f64,
    pub mean: Color,
    pub covariance: Mat3,
    inverse: Mat3,
    /// `-ln weight + ln det / 2 + 3 ln(2 pi) / 2`.
    offset: f64,
}

impl Gaussian {
    fn new(weight: f64, mean: Color, covariance: Mat3) -> Self {
        let covariance = regularize(covariance);
        let det = det3(&covariance);
        let inverse = inverse3(&covariance, det);
        Self {
            weight,
            mean,
            covariance,
            inverse,
            offset: -weight.ln() + 0.5 * det.ln() + 1.5 * LOG_2PI,
        }
    }

    /// `-ln(weight * N(z; mean, cov))`.
    pub fn cost(&self, z: &Color) -> f64 {
        let d = [z[0] - self.mean[0], z[1] - self.mean[1], z[2] - self.mean[2]];
        let mut m = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                m += d[r] * self.inverse[r][c] * d[c];
            }
        }
        self.offset + 0.5 * m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gmm {
    components: Vec<Gaussian>,
}

impl Gmm {
    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Best component for `z` and its cost; ties go to the lower index.
    pub fn assign(&self, z: &Color) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (k, g) in self.components.iter().enumerate() {
            let c = g.cost(z);
            if c < best.1 {
                best = (k, c);
            }
        }
        best
    }

    /// Hard-assignment data cost `min_k -ln(pi_k N_k(z))`.
    pub fn cost(&self, z: &Color) -> f64 {
        self.assign(z).1
    }

    /// Posterior component probabilities for `z`.
    pub fn responsibilities(&self, z: &Color) -> Vec<f64> {
        let costs: Vec<f64> = self.components.iter().map(|g| g.cost(z)).collect();
        let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let p: Vec<f64> = costs.iter().map(|c| (best - c).exp()).collect();
        let total: f64 = p.iter().sum();
        p.into_iter().map(|v| v / total).collect()
    }

    /// Maximum-likelihood fit of one Gaussian per label in `assignment`.
    /// Labels with no samples are dropped.
    pub fn fit_assigned(samples: &[Color], assignment: &[usize], k: usize) -> Gmm {
        assert_eq!(samples.len(), assignment.len());
        let mut count = vec![0usize; k];
        let mut sum = vec![[0.0; 3]; k];
        for (z, &a) in samples.iter().zip(assignment) {
            count[a] += 1;
            for c in 0..3 {
                sum[a][c] += z[c];
            }
        }
        let means: Vec<Color> = (0..k)
            .map(|a| {
                let n = count[a].max(1) as f64;
                [sum[a][0] / n, sum[a][1] / n, sum[a][2] / n]
            })
            .collect();
        let mut cov = vec![[[0.0; 3]; 3]; k];
        for (z, &a) in samples.iter().zip(assignment) {
            let d = [z[0] - means[a][0], z[1] - means[a][1], z[2] - means[a][2]];
            for r in 0..3 {
                for c in 0..3 {
                    cov[a][r][c] += d[r] * d[c];
                }
            }
        }
        let total = samples.len() as f64;
        let components = (0..k)
            .filter(|&a| count[a] > 0)
            .map(|a| {
                let n = count[a] as f64;
                let mut s = cov[a];
                s.iter_mut().flatten().for_each(|v| *v /= n);
                Gaussian::new(n / total, means[a], s)
            })
            .collect();
        Gmm { components }
    }

    /// k-means++ seeding followed by Lloyd iterations, then a per-cluster fit.
    pub fn fit_kmeans(samples: &[Color], k: usize, rng: &mut ChaCha8Rng) -> Gmm {
        assert!(!samples.is_empty() && k > 0);
        let centers = kmeans(samples, k, rng);
        let assignment: Vec<usize> = samples.iter().map(|z| nearest(&centers, z).0).collect();
        Gmm::fit_assigned(samples, &assignment, centers.len())
    }

    /// Reassigns every sample to its best component and refits.
    pub fn refit(&self, samples: &[Color]) -> Gmm {
        let assignment: Vec<usize> = samples.iter().map(|z| self.assign(z).0).collect();
        Gmm::fit_assigned(samples, &assignment, self.len())
    }

    /// Total hard-assignment cost of `samples`.
    pub fn total_cost(&self, samples: &[Color]) -> f64 {
        samples.iter().map(|z| self.cost(z)).sum()
    }
}

fn dist2(a: &Color, b: &Color) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn nearest(centers: &[Color], z: &Color) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = dist2(c, z);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn kmeans(samples: &[Color], k: usize, rng: &mut ChaCha8Rng) -> Vec<Color> {
    let mut centers = vec![samples[rng.random_range(0..samples.len())]];
    let mut d2: Vec<f64> = samples.iter().map(|z| dist2(z, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            // Fewer distinct colours than components.
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = samples.len() - 1;
        for (i, &d) in d2.iter().enumerate() {
            if target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        let c = samples[pick];
        centers.push(c);
        for (di, z) in d2.iter_mut().zip(samples) {
            *di = di.min(dist2(z, &c));
        }
    }

    for _ in 0..KMEANS_ITERATIONS {
        let mut sum = vec![[0.0; 3]; centers.len()];
        let mut count = vec![0usize; centers.len()];
        for z in samples {
            let (a, _) = nearest(&centers, z);
            count[a] += 1;
            for c in 0..3 {
                sum[a][c] += z[c];
            }
        }
        let mut moved = false;
        for (a, center) in centers.iter_mut().enumerate() {
            if count[a] == 0 {
                continue;
            }
            let n = count[a] as f64;
            let next = [sum[a][0] / n, sum[a][1] / n, sum[a][2] / n];
            moved |= next != *center;
            *center = next;
        }
        if !moved {
            break;
        }
    }
    centers
}

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inverse3(m: &Mat3, det: f64) -> Mat3 {
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            // Cofactor of (c, r).
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            inv[r][c] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    inv
}

/// Eigenvalues of a symmetric 3x3 matrix, ascending.
pub fn symmetric_eigenvalues3(m: &Mat3) -> [f64; 3] {
    let p1 = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut e = [m[0][0], m[1][1], m[2][2]];
        e.sort_by(f64::total_cmp);
        return e;
    }
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = *m;
    for (i, row) in b.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - if i == j { q } else { 0.0 }) / p;
        }
    }
    let r = (det3(&b) / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [lo, 3.0 * q - hi - lo, hi]
}

/// Adds diagonal jitter so the smallest eigenvalue is at least
/// [`MIN_COVARIANCE_EIGENVALUE`].
fn regularize(mut m: Mat3) -> Mat3 {
    let lo = symmetric_eigenvalues3(&m)[0];
    if lo < MIN_COVARIANCE_EIGENVALUE {
        // A hair of slack absorbs rounding in the closed-form eigenvalues.
        let jitter = (MIN_COVARIANCE_EIGENVALUE - lo) * (1.0 + 1e-6) + 1e-15;
        for (i, row) in m.iter_mut().enumerate() {
            row[i] += jitter;
        }
    }
    m
}
