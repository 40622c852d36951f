//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's factorization code.
#![allow(dead_code)]

use mahabo::{BoxDomain, Dataset};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn uniform_points(n: usize, domain: &BoxDomain, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| domain.sample_uniform(rng)).collect()
}

/// Smooth synthetic responses.
pub fn random_dataset(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let domain = BoxDomain::unit(dim);
    let pts = uniform_points(n, &domain, rng);
    let w = normal_matrix(1, dim, rng);
    let ys = pts
        .iter()
        .map(|x| {
            let s: f64 = x.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
            s.sin() + 0.3 * s * s
        })
        .collect();
    Dataset::from_parts(&domain, pts, ys).unwrap()
}

/// `gamma^2 exp(-|M (a - b)|^2)` written out directly.
pub fn se_kernel(gamma: f64, m: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let diff = DVector::from_iterator(a.len(), a.iter().zip(b).map(|(x, y)| x - y));
    gamma * gamma * (-(m * diff).norm_squared()).exp()
}

/// Dense GP posterior through an LU solve of `K + s I`.
pub struct DenseGp {
    pub points: Vec<Vec<f64>>,
    pub gamma: f64,
    pub metric: DMatrix<f64>,
    pub weights: DVector<f64>,
    pub c_inv: DMatrix<f64>,
}

impl DenseGp {
    pub fn new(points: &[Vec<f64>], y: &[f64], gamma: f64, metric: &DMatrix<f64>, noise: f64) -> Self {
        let n = points.len();
        let mut c = DMatrix::from_fn(n, n, |i, j| se_kernel(gamma, metric, &points[i], &points[j]));
        for i in 0..n {
            c[(i, i)] += noise;
        }
        let lu = c.clone().lu();
        let weights = lu.solve(&DVector::from_column_slice(y)).expect("nonsingular");
        let c_inv = lu.try_inverse().expect("nonsingular");
        Self { points: points.to_vec(), gamma, metric: metric.clone(), weights, c_inv }
    }

    fn kvec(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|p| se_kernel(self.gamma, &self.metric, x, p)),
        )
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        self.kvec(x).dot(&self.weights)
    }

    pub fn cov(&self, a: &[f64], b: &[f64]) -> f64 {
        let ka = self.kvec(a);
        let kb = self.kvec(b);
        se_kernel(self.gamma, &self.metric, a, b) - ka.dot(&(&self.c_inv * kb))
    }
}

/// Projects each point through `b`.
pub fn project_all(b: &DMatrix<f64>, pts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    pts.iter()
        .map(|x| (b * DVector::from_column_slice(x)).as_slice().to_vec())
        .collect()
}

/// Relative error of `got` against `want`, floored so near-zero references
/// compare absolutely.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-3)
}

/// Total-variation distance between two probability vectors.
pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Kolmogorov-Smirnov statistic of `sample` against Uniform[lo, hi].
pub fn ks_uniform(sample: &[f64], lo: f64, hi: f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, v)| {
            let f = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value `sqrt(-ln(alpha / 2) / 2) / sqrt(n)`.
pub fn ks_critical(alpha: f64, n: usize) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}
