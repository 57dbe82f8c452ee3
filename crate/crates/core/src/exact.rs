//! Zero-distortion terminal embedding for small point sets.
//!
//! With `E = span{x_i - x_1}` of rank `r <= n - 1`, the map
//! `u -> (B^T (u - x_1), |proj_{E^perp}(u - x_1)|)` into `R^{r+1}` preserves
//! every distance `|u - x_i|` exactly, since each `x_i - x_1` lies in `E`.

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::linalg;
use crate::sketch::SketchMatrix;

/// Relative residual below which a difference vector is treated as dependent.
pub const RANK_DROP_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactEmbedding {
    origin: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl ExactEmbedding {
    pub fn from_parts(origin: Vec<f64>, basis: Vec<Vec<f64>>) -> Result<Self> {
        let d = origin.len();
        if let Some(bad) = basis.iter().find(|b| b.len() != d) {
            return Err(Error::dim(d, bad.len()));
        }
        Ok(Self { origin, basis })
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    /// Orthonormal basis of the span of the translated points.
    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn input_dim(&self) -> usize {
        self.origin.len()
    }

    pub fn output_dim(&self) -> usize {
        self.rank() + 1
    }

    pub fn map(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.input_dim() {
            return Err(Error::dim(self.input_dim(), u.len()));
        }
        let mut residual = linalg::sub(u, &self.origin);
        let mut out = Vec::with_capacity(self.output_dim());
        for b in &self.basis {
            out.push(linalg::dot(b, &residual));
        }
        for (b, &c) in self.basis.iter().zip(&out) {
            linalg::axpy(-c, b, &mut residual);
        }
        // Second sweep removes what rounding left in E.
        for (k, b) in self.basis.iter().enumerate() {
            let c = linalg::dot(b, &residual);
            out[k] += c;
            linalg::axpy(-c, b, &mut residual);
        }
        out.push(linalg::norm(&residual));
        Ok(out)
    }

    /// The linear part `B^T` as an `r x d` matrix, or `None` when `r = 0`.
    pub fn linear_part(&self) -> Option<SketchMatrix> {
        if self.basis.is_empty() {
            return None;
        }
        let entries = self.basis.iter().flatten().copied().collect();
        SketchMatrix::from_rows(self.rank(), self.input_dim(), entries).ok()
    }
}

/// Builds the exact embedding by Gram-Schmidt with re-orthogonalization over
/// `x_i - x_1`, dropping vectors whose residual falls below
/// [`RANK_DROP_TOLERANCE`] times their original norm.
pub fn exact_small_embedding(points: &PointSet) -> ExactEmbedding {
    let origin = points.point(0).to_vec();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for p in points.iter().skip(1) {
        let mut v = linalg::sub(p, &origin);
        let original = linalg::norm(&v);
        for _ in 0..2 {
            for b in &basis {
                let c = linalg::dot(b, &v);
                linalg::axpy(-c, b, &mut v);
            }
        }
        let len = linalg::norm(&v);
        if len > RANK_DROP_TOLERANCE * original {
            linalg::scale(1.0 / len, &mut v);
            basis.push(v);
        }
    }
    ExactEmbedding { origin, basis }
}
