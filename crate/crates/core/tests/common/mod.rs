#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use terminal_embed::PointSet;

pub fn gaussian_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect()
}

pub fn random_points(n: usize, d: usize, seed: u64) -> PointSet {
    PointSet::new(gaussian_rows(n, d, seed)).unwrap()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Brute-force nearest terminal, lowest index on ties.
pub fn argmin(points: &PointSet, u: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for i in 0..points.len() {
        let d = dist(points.point(i), u);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Random orthogonal `d x d` matrix, row-major, from Gram-Schmidt on Gaussian rows.
pub fn random_orthogonal(d: usize, seed: u64) -> Vec<f64> {
    let mut rows = gaussian_rows(d, d, seed);
    for i in 0..d {
        for _ in 0..2 {
            for j in 0..i {
                let c: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                let rj = rows[j].clone();
                rows[i].iter_mut().zip(&rj).for_each(|(a, b)| *a -= c * b);
            }
        }
        let n = rows[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        rows[i].iter_mut().for_each(|v| *v /= n);
    }
    rows.concat()
}

/// `max / min` over the ratios `|f(u) - f(x_i)| / |u - x_i|` with `|u - x_i| > 0`,
/// plus the largest `|ratio - 1|`.
pub fn ratio_extremes(points: &PointSet, images: &[Vec<f64>], queries: &[Vec<f64>], outputs: &[Vec<f64>]) -> (f64, f64) {
    let (mut lo, mut hi, mut dev) = (f64::INFINITY, 0.0f64, 0.0f64);
    for (u, fu) in queries.iter().zip(outputs) {
        for (x, fx) in points.iter().zip(images) {
            let d = dist(u, x);
            if d > 0.0 {
                let r = dist(fu, fx) / d;
                lo = lo.min(r);
                hi = hi.max(r);
                dev = dev.max((r - 1.0).abs());
            }
        }
    }
    (hi / lo, dev)
}
