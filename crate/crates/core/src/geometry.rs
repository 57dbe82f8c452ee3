//! Terminal point sets, nearest-point lookup and the unit direction set.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Pairs closer than this are reported by [`PointSet::close_pairs`].
pub const CLOSE_PAIR_THRESHOLD: f64 = 1e-9;

/// The terminal set: `n >= 1` pairwise distinct points of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl PointSet {
    /// Validates and wraps `raw`, keeping the input order.
    pub fn new(raw: Vec<Vec<f64>>) -> Result<Self> {
        let first = raw.first().ok_or(Error::EmptyInput)?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("points must have dimension >= 1".into()));
        }
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(raw.len());
        for (i, p) in raw.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::dim(dim, p.len()));
            }
            if let Some(bad) = p.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "point {i} has a non-finite coordinate at position {bad}"
                )));
            }
            // -0.0 == 0.0 under exact comparison, so hash the canonical bits.
            let key: Vec<u64> = p.iter().map(|&v| if v == 0.0 { 0 } else { v.to_bits() }).collect();
            if let Some(&first) = seen.get(&key) {
                return Err(Error::DuplicatePoint { first, second: i });
            }
            seen.insert(key, i);
        }
        Ok(Self { points: raw, dim })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(Vec::as_slice)
    }

    /// Index of the closest point to `u`; exact ties resolve to the lowest index.
    pub fn nearest(&self, u: &[f64]) -> Result<(usize, f64)> {
        if u.len() != self.dim {
            return Err(Error::dim(self.dim, u.len()));
        }
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d2 = linalg::dist_sq(u, p);
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        Ok((best.0, best.1.sqrt()))
    }

    /// Index of `u` in the set under exact coordinate equality.
    pub fn position(&self, u: &[f64]) -> Option<usize> {
        self.points.iter().position(|p| p.as_slice() == u)
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for p in &self.points {
            linalg::axpy(1.0, p, &mut c);
        }
        linalg::scale(1.0 / self.len() as f64, &mut c);
        c
    }

    /// Largest pairwise distance (0 for a single point).
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                best = best.max(linalg::dist_sq(&self.points[i], &self.points[j]));
            }
        }
        best.sqrt()
    }

    /// Distance from point `i` to its nearest other point, `None` when `n == 1`.
    pub fn neighbor_distance(&self, i: usize) -> Option<f64> {
        let p = &self.points[i];
        self.points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| linalg::dist_sq(p, q))
            .min_by(f64::total_cmp)
            .map(f64::sqrt)
    }

    /// Axis-aligned bounding box as `(lower, upper)` corners.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.points[0].clone();
        let mut hi = self.points[0].clone();
        for p in &self.points[1..] {
            for (k, &v) in p.iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        (lo, hi)
    }

    /// Pairs `(i, j, distance)` with `i < j` closer than [`CLOSE_PAIR_THRESHOLD`].
    /// Such pairs are legal but make their directions poorly conditioned.
    pub fn close_pairs(&self) -> Vec<ClosePair> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                let d = linalg::dist(&self.points[i], &self.points[j]);
                if d < CLOSE_PAIR_THRESHOLD {
                    out.push(ClosePair { i, j, distance: d });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosePair {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

/// Free-function form of [`PointSet::nearest`], returning only the index.
pub fn nearest_point(u: &[f64], points: &PointSet) -> Result<usize> {
    points.nearest(u).map(|(k, _)| k)
}

/// All normalized ordered differences `(x_i - x_j) / |x_i - x_j|`, `i != j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    directions: Vec<Vec<f64>>,
    pairs: Vec<(usize, usize)>,
    n: usize,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    /// The ordered pair `(i, j)` a direction was formed from.
    pub fn pair(&self, idx: usize) -> (usize, usize) {
        self.pairs[idx]
    }

    /// Index of the direction built from `(i, j)`.
    pub fn index_of(&self, i: usize, j: usize) -> usize {
        assert!(i != j && i < self.n && j < self.n, "invalid pair ({i}, {j})");
        // Row i holds the n - 1 partners j != i in increasing order.
        i * (self.n - 1) + if j < i { j } else { j - 1 }
    }

    /// Index of the negated direction, i.e. the one built from `(j, i)`.
    pub fn negation_of(&self, idx: usize) -> usize {
        let (i, j) = self.pairs[idx];
        self.index_of(j, i)
    }
}

pub fn direction_set(points: &PointSet) -> DirectionSet {
    let n = points.len();
    let mut directions = Vec::with_capacity(n * n.saturating_sub(1));
    let mut pairs = Vec::with_capacity(directions.capacity());
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut v = linalg::sub(points.point(i), points.point(j));
            let len = linalg::norm(&v);
            linalg::scale(1.0 / len, &mut v);
            directions.push(v);
            pairs.push((i, j));
        }
    }
    DirectionSet { directions, pairs, n }
}
