//! Target-dimension selection and scaled subgaussian sketch matrices.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;

pub const DEFAULT_CONSTANT: f64 = 4.0;
pub const SKETCH_MAGIC: &str = "TESK";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// Entries `±1/sqrt(m)` with equal probability.
    #[default]
    Rademacher,
    /// Entries `N(0, 1)/sqrt(m)`.
    Gaussian,
    /// Caller-supplied matrix; no generating distribution.
    Explicit,
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rademacher" => Ok(Distribution::Rademacher),
            "gaussian" => Ok(Distribution::Gaussian),
            other => Err(Error::InvalidParameter(format!("unknown distribution {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    Sketch,
    ExactSmall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionPlan {
    pub mode: PlanMode,
    /// Rows given by the dimension formula. In `ExactSmall` mode the actual
    /// output dimension is fixed later by the rank of the point set.
    pub m: usize,
    pub constant: f64,
    pub epsilon: f64,
    /// `n (n - 1)`, the size of the direction set the union bound runs over.
    pub direction_count: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta: Option<f64>,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(epsilon))
    }
}

/// Chooses between the sketch and the exact small-`n` embedding.
///
/// `m = ceil(C * eps^-2 * ln(max(n (n - 1), 2)))`; when `m >= n` an exact
/// embedding into at most `n` dimensions is available and wins.
pub fn plan_dimension(n: usize, epsilon: f64, constant: f64) -> Result<DimensionPlan> {
    plan_dimension_with_failure(n, epsilon, constant, None)
}

/// As [`plan_dimension`], optionally folding a failure probability `delta`
/// into the logarithm: `ln(max(|Y|, 2) / (eps * delta))`.
pub fn plan_dimension_with_failure(
    n: usize,
    epsilon: f64,
    constant: f64,
    delta: Option<f64>,
) -> Result<DimensionPlan> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    check_epsilon(epsilon)?;
    if !(constant > 0.0 && constant.is_finite()) {
        return Err(Error::InvalidConstant(constant));
    }
    if let Some(delta) = delta {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
        }
    }
    let direction_count = n as f64 * (n as f64 - 1.0);
    let mut log_term = direction_count.max(2.0).ln();
    if let Some(delta) = delta {
        log_term -= (epsilon * delta).ln();
    }
    let m = (constant * log_term / (epsilon * epsilon)).ceil() as usize;
    let mode = if m >= n { PlanMode::ExactSmall } else { PlanMode::Sketch };
    Ok(DimensionPlan { mode, m, constant, epsilon, direction_count, delta })
}

/// Dense `m x d` matrix, row-major, with the `1/sqrt(m)` scale already applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchMatrix {
    m: usize,
    d: usize,
    entries: Vec<f64>,
    distribution: Distribution,
    seed: u64,
}

impl SketchMatrix {
    /// Wraps an explicit row-major matrix (used for oracles and tests).
    pub fn from_rows(m: usize, d: usize, entries: Vec<f64>) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::InvalidParameter("sketch dimensions must be >= 1".into()));
        }
        if entries.len() != m * d {
            return Err(Error::dim(m * d, entries.len()));
        }
        Ok(Self { m, d, entries, distribution: Distribution::Explicit, seed: 0 })
    }

    pub fn identity(d: usize) -> Self {
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            entries[i * d + i] = 1.0;
        }
        Self::from_rows(d, d, entries).expect("identity has consistent shape")
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.d
    }

    pub fn distribution(&self) -> Distribution {
        self.distribution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.d..(i + 1) * self.d]
    }

    /// `Pi x`
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::dim(self.d, x.len()));
        }
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.entries.chunks_exact(self.d).map(|row| linalg::dot(row, x)).collect()
    }

    /// Applies the sketch to many vectors; output order matches input order.
    pub fn apply_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if let Some(bad) = xs.iter().find(|x| x.len() != self.d) {
            return Err(Error::dim(self.d, bad.len()));
        }
        Ok(xs.par_iter().map(|x| self.apply_unchecked(x)).collect())
    }

    /// Returns `c * Pi`, keeping provenance.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        linalg::scale(c, &mut out.entries);
        out
    }

    /// Writes the sketch as a one-line JSON header followed by the raw
    /// little-endian doubles (row-major).
    pub fn write_to<W: Write>(&self, mut writer: W, constant: Option<f64>) -> Result<()> {
        let header = SketchHeader {
            magic: SKETCH_MAGIC.to_owned(),
            m: self.m,
            d: self.d,
            distribution: self.distribution,
            seed: self.seed,
            constant,
        };
        let mut buf = serde_json::to_vec(&header)?;
        buf.push(b'\n');
        buf.reserve(self.entries.len() * 8);
        for v in &self.entries {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        writer.write_all(&buf)?;
        writer.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut reader: R, source_name: &str) -> Result<(Self, SketchHeader)> {
        let mut line = Vec::new();
        reader.read_until(b'\n', &mut line)?;
        if line.last() != Some(&b'\n') {
            return Err(Error::format(source_name, "missing sketch header line"));
        }
        let header: SketchHeader = serde_json::from_slice(&line[..line.len() - 1])
            .map_err(|e| Error::format(source_name, format!("bad sketch header: {e}")))?;
        if header.magic != SKETCH_MAGIC {
            return Err(Error::format(source_name, format!("bad magic {:?}", header.magic)));
        }
        let mut body = Vec::new();
        reader.read_to_end(&mut body)?;
        let expected = header.m * header.d * 8;
        if body.len() != expected {
            return Err(Error::format(
                source_name,
                format!("offset {}: payload has {} bytes, expected {expected}", line.len(), body.len()),
            ));
        }
        let entries = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let mut sketch = Self::from_rows(header.m, header.d, entries)?;
        sketch.distribution = header.distribution;
        sketch.seed = header.seed;
        Ok((sketch, header))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchHeader {
    pub magic: String,
    pub m: usize,
    pub d: usize,
    pub distribution: Distribution,
    pub seed: u64,
    #[serde(rename = "C")]
    pub constant: Option<f64>,
}

/// Draws an `m x d` sketch, entries row-major from a ChaCha stream keyed by `seed`.
pub fn generate_sketch(m: usize, d: usize, distribution: Distribution, seed: u64) -> Result<SketchMatrix> {
    if m == 0 || d == 0 {
        return Err(Error::InvalidParameter("sketch dimensions must be >= 1".into()));
    }
    let scale = 1.0 / (m as f64).sqrt();
    let mut rng = seed::rng(seed);
    let entries: Vec<f64> = match distribution {
        Distribution::Rademacher => {
            (0..m * d).map(|_| if rng.random::<bool>() { scale } else { -scale }).collect()
        }
        Distribution::Gaussian => {
            (0..m * d).map(|_| rng.sample::<f64, _>(StandardNormal) * scale).collect()
        }
        Distribution::Explicit => {
            return Err(Error::InvalidParameter("explicit matrices are not generated".into()))
        }
    };
    Ok(SketchMatrix { m, d, entries, distribution, seed })
}

pub fn apply_sketch(sketch: &SketchMatrix, x: &[f64]) -> Result<Vec<f64>> {
    sketch.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_small_n_goes_exact() {
        let plan = plan_dimension(16, 0.5, 4.0).unwrap();
        assert_eq!(plan.direction_count, 240.0);
        assert_eq!(plan.m, 88);
        assert_eq!(plan.mode, PlanMode::ExactSmall);
    }

    #[test]
    fn plan_large_n_sketches() {
        let plan = plan_dimension(1_000_000, 0.25, 4.0).unwrap();
        // 64 * ln(10^6 * (10^6 - 1)) = 64 * 27.631... = 1768.4
        assert_eq!(plan.m, 1769);
        assert_eq!(plan.mode, PlanMode::Sketch);
    }

    #[test]
    fn plan_rejects_bad_parameters() {
        assert!(matches!(plan_dimension(4, 1.5, 4.0), Err(Error::InvalidEpsilon(_))));
        assert!(matches!(plan_dimension(4, 0.0, 4.0), Err(Error::InvalidEpsilon(_))));
        assert!(matches!(plan_dimension(4, 0.5, 0.0), Err(Error::InvalidConstant(_))));
        assert!(plan_dimension_with_failure(4, 0.5, 4.0, Some(1.0)).is_err());
    }

    #[test]
    fn plan_delta_variant_grows_m() {
        let base = plan_dimension(10_000, 0.2, 1.0).unwrap();
        let with = plan_dimension_with_failure(10_000, 0.2, 1.0, Some(0.01)).unwrap();
        assert!(with.m > base.m);
        let expected = (25.0 * (1e4f64 * 9999.0 / (0.2 * 0.01)).ln()).ceil() as usize;
        assert_eq!(with.m, expected);
    }

    #[test]
    fn single_point_plan_is_exact() {
        assert_eq!(plan_dimension(1, 0.9, 0.01).unwrap().mode, PlanMode::ExactSmall);
    }

    #[test]
    fn rademacher_magnitudes() {
        let s = generate_sketch(4, 1, Distribution::Rademacher, 7).unwrap();
        assert!(s.entries().iter().all(|&v| v == 0.5 || v == -0.5));
    }

    #[test]
    fn deterministic_per_seed() {
        for dist in [Distribution::Rademacher, Distribution::Gaussian] {
            let a = generate_sketch(5, 3, dist, 11).unwrap();
            let b = generate_sketch(5, 3, dist, 11).unwrap();
            let c = generate_sketch(5, 3, dist, 12).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn gaussian_moments() {
        let m = 1000;
        let s = generate_sketch(m, 1, Distribution::Gaussian, 3).unwrap();
        let raw: Vec<f64> = s.entries().iter().map(|v| v * (m as f64).sqrt()).collect();
        let mean = raw.iter().sum::<f64>() / m as f64;
        let var = raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn apply_identity_and_zero() {
        let id = SketchMatrix::identity(2);
        assert_eq!(id.apply(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        let s = generate_sketch(6, 3, Distribution::Rademacher, 1).unwrap();
        assert_eq!(s.apply(&[0.0; 3]).unwrap(), vec![0.0; 6]);
        assert!(matches!(s.apply(&[0.0; 2]), Err(Error::DimensionMismatch { expected: 3, found: 2 })));
    }

    #[test]
    fn serialization_reproduces_apply_bit_exactly() {
        let s = generate_sketch(7, 5, Distribution::Gaussian, 99).unwrap();
        let mut buf = Vec::new();
        s.write_to(&mut buf, Some(4.0)).unwrap();
        let (back, header) = SketchMatrix::read_from(buf.as_slice(), "mem").unwrap();
        assert_eq!(header.constant, Some(4.0));
        assert_eq!(back, s);
        let x = [0.3, -1.0, 2.5, 1e-3, 7.0];
        let (a, b) = (s.apply(&x).unwrap(), back.apply(&x).unwrap());
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        assert!(SketchMatrix::read_from(&buf[..buf.len() - 1], "mem").is_err());
    }
}
