//! Convex hull distortion of a matrix over a set of directions `T`:
//! `sup_{p in conv(T)} | |Pi p| - |p| |`.
//!
//! Three estimators of the supremum:
//! * [`certify_grid`] enumerates a simplex grid and adds a Lipschitz margin,
//!   giving a certified upper bound. Only feasible for tiny `|T|`.
//! * [`estimate_sampled`] evaluates every vertex, every pairwise midpoint and a
//!   seeded batch of Dirichlet(1) points (dense and sparse support).
//! * [`refine_local`] sharpens a witness by moving mass between pairs of
//!   coordinates, never decreasing the violation.

use std::cmp::Ordering;

use rand::seq::index;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;
use crate::sketch::SketchMatrix;

/// Largest `|T|` accepted by [`certify_grid`].
pub const MAX_GRID_DIRECTIONS: usize = 6;
const SAMPLE_BATCH: usize = 512;
const TOP_CANDIDATES: usize = 8;

/// A convex combination `sum_i weights[i] * t_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HullPoint {
    weights: Vec<f64>,
    vector: Vec<f64>,
}

impl HullPoint {
    /// Validates the weights (nonnegative, summing to 1 within 1e-12) and
    /// forms the combination.
    pub fn new(directions: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        if weights.len() != directions.len() {
            return Err(Error::dim(directions.len(), weights.len()));
        }
        let d = directions.first().map(Vec::len).ok_or(Error::EmptyInput)?;
        if weights.iter().any(|&w| w.is_nan() || w < 0.0) {
            return Err(Error::InvalidParameter("hull weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("hull weights sum to {total}, expected 1")));
        }
        let mut vector = vec![0.0; d];
        for (w, t) in weights.iter().zip(directions) {
            if *w != 0.0 {
                linalg::axpy(*w, t, &mut vector);
            }
        }
        Ok(Self { weights, vector })
    }

    pub fn vertex(directions: &[Vec<f64>], i: usize) -> Result<Self> {
        let mut w = vec![0.0; directions.len()];
        *w.get_mut(i).ok_or_else(|| Error::InvalidParameter(format!("vertex {i} out of range")))? = 1.0;
        Self::new(directions, w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChdMethod {
    GridCertified,
    Sampled,
    LocalAscent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChdEstimate {
    pub max_violation: f64,
    pub witness: HullPoint,
    pub method: ChdMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified_bound: Option<f64>,
    /// Number of hull points evaluated.
    pub evaluations: u64,
}

/// `| |Pi p| - |p| |` for the hull point `p`.
pub fn violation(sketch: &SketchMatrix, p: &HullPoint) -> Result<f64> {
    let image = sketch.apply(p.vector())?;
    Ok((linalg::norm(&image) - linalg::norm(p.vector())).abs())
}

/// Precomputed images `Pi t_i` shared by all estimators.
struct Evaluator<'a> {
    sketch: &'a SketchMatrix,
    directions: &'a [Vec<f64>],
    images: Vec<Vec<f64>>,
}

impl<'a> Evaluator<'a> {
    fn new(sketch: &'a SketchMatrix, directions: &'a [Vec<f64>]) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::InvalidParameter("direction set is empty".into()));
        }
        let d = sketch.cols();
        if let Some(bad) = directions.iter().find(|t| t.len() != d) {
            return Err(Error::dim(d, bad.len()));
        }
        let images = sketch.apply_batch(directions)?;
        Ok(Self { sketch, directions, images })
    }

    fn d(&self) -> usize {
        self.sketch.cols()
    }

    fn m(&self) -> usize {
        self.sketch.rows()
    }

    /// Lipschitz constant of `lambda -> violation` in the l1 norm.
    fn lipschitz(&self) -> f64 {
        let img = self.images.iter().map(|w| linalg::norm(w)).fold(0.0, f64::max);
        let dir = self.directions.iter().map(|t| linalg::norm(t)).fold(0.0, f64::max);
        img + dir
    }

    /// Violation at the combination given by `(index, weight)` pairs, in order.
    fn eval_sparse(&self, support: &[(usize, f64)]) -> f64 {
        let mut p = vec![0.0; self.d()];
        if support.len() > self.d() {
            for &(i, w) in support {
                linalg::axpy(w, &self.directions[i], &mut p);
            }
            let q = self.sketch.apply_unchecked(&p);
            return (linalg::norm(&q) - linalg::norm(&p)).abs();
        }
        let mut q = vec![0.0; self.m()];
        for &(i, w) in support {
            linalg::axpy(w, &self.directions[i], &mut p);
            linalg::axpy(w, &self.images[i], &mut q);
        }
        (linalg::norm(&q) - linalg::norm(&p)).abs()
    }

    /// Same arithmetic as [`violation`].
    fn value_at(&self, p: &HullPoint) -> f64 {
        let image = self.sketch.apply_unchecked(&p.vector);
        (linalg::norm(&image) - linalg::norm(&p.vector)).abs()
    }

    fn hull_point(&self, support: &[(usize, f64)]) -> HullPoint {
        let mut w = vec![0.0; self.directions.len()];
        for &(i, x) in support {
            w[i] += x;
        }
        let mut vector = vec![0.0; self.d()];
        for &(i, x) in support {
            linalg::axpy(x, &self.directions[i], &mut vector);
        }
        HullPoint { weights: w, vector }
    }
}

fn support_of(weights: &[f64]) -> Vec<(usize, f64)> {
    weights.iter().copied().enumerate().filter(|&(_, w)| w != 0.0).collect()
}

/// A scored hull point. Ordered by value (descending) then by `rank`
/// (ascending), which makes reductions independent of evaluation order.
#[derive(Debug, Clone)]
struct Candidate {
    value: f64,
    rank: u64,
    support: Vec<(usize, f64)>,
}

fn better(a: &Candidate, b: &Candidate) -> Ordering {
    b.value.total_cmp(&a.value).then(a.rank.cmp(&b.rank))
}

#[derive(Debug, Clone, Default)]
struct TopK {
    items: Vec<Candidate>,
}

impl TopK {
    fn push(&mut self, c: Candidate) {
        if self.items.len() == TOP_CANDIDATES
            && better(&c, self.items.last().unwrap()) != Ordering::Less
        {
            return;
        }
        let pos = self.items.partition_point(|x| better(x, &c) == Ordering::Less);
        self.items.insert(pos, c);
        self.items.truncate(TOP_CANDIDATES);
    }

    fn merge(mut self, other: TopK) -> TopK {
        for c in other.items {
            self.push(c);
        }
        self
    }
}

/// Exhaustive evaluation over the simplex grid `{lambda : lambda_i in h Z}`.
///
/// `h` is rounded down to `1/N` with `N = ceil(1/h)`. The certified bound adds
/// `kappa * L * h` to the grid maximum, where `L` bounds the l1-Lipschitz
/// constant of the violation and `kappa = 2 floor(s/2) ceil(s/2) / s` is the
/// l1 covering radius of the grid in units of `h` (`kappa = 1` for `s = 2`).
pub fn certify_grid(sketch: &SketchMatrix, directions: &[Vec<f64>], step: f64) -> Result<ChdEstimate> {
    let s = directions.len();
    if s > MAX_GRID_DIRECTIONS {
        return Err(Error::TooManyDirections { found: s, max: MAX_GRID_DIRECTIONS });
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidParameter(format!("grid step must lie in (0, 1], got {step}")));
    }
    let eval = Evaluator::new(sketch, directions)?;
    let n = (1.0 / step - 1e-9).ceil().max(1.0) as u64;
    let h = 1.0 / n as f64;

    // Parallel over the first coordinate; each worker walks the remaining
    // compositions in lexicographic order.
    let first_values: Vec<u64> = if s == 1 { vec![n] } else { (0..=n).collect() };
    let results: Vec<(Candidate, u64)> = first_values
        .par_iter()
        .map(|&k0| {
            let mut walker = GridWalk::new(&eval, n);
            walker.set_level(0, k0);
            if s == 1 {
                walker.leaf(k0);
            } else {
                walker.descend(1, n - k0, k0);
            }
            (walker.best, walker.evaluated)
        })
        .collect();
    let evaluations = results.iter().map(|r| r.1).sum();
    let best = results.into_iter().map(|r| r.0).min_by(better).expect("grid has at least one point");
    let kappa = 2.0 * (s / 2) as f64 * s.div_ceil(2) as f64 / s as f64;
    Ok(ChdEstimate {
        max_violation: best.value,
        witness: eval.hull_point(&best.support),
        method: ChdMethod::GridCertified,
        certified_bound: Some(best.value + kappa * eval.lipschitz() * h),
        evaluations,
    })
}

/// Depth-first walk over grid compositions. Level `l` caches the partial
/// sums `sum_{i <= l} lambda_i t_i` and their images, so a leaf costs
/// `O(m + d)`.
struct GridWalk<'e, 'a> {
    eval: &'e Evaluator<'a>,
    n: u64,
    counts: Vec<u64>,
    p: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    best: Candidate,
    evaluated: u64,
}

impl<'e, 'a> GridWalk<'e, 'a> {
    fn new(eval: &'e Evaluator<'a>, n: u64) -> Self {
        let s = eval.directions.len();
        Self {
            eval,
            n,
            counts: vec![0; s],
            p: vec![vec![0.0; eval.d()]; s],
            q: vec![vec![0.0; eval.m()]; s],
            best: Candidate { value: f64::NEG_INFINITY, rank: u64::MAX, support: Vec::new() },
            evaluated: 0,
        }
    }

    fn set_level(&mut self, level: usize, k: u64) {
        self.counts[level] = k;
        let w = k as f64 / self.n as f64;
        for (buf, src) in [(&mut self.p, &self.eval.directions[level]), (&mut self.q, &self.eval.images[level])] {
            let (lo, hi) = buf.split_at_mut(level);
            let dst = &mut hi[0];
            match lo.last() {
                Some(prev) => dst.copy_from_slice(prev),
                None => dst.fill(0.0),
            }
            if k != 0 {
                linalg::axpy(w, src, dst);
            }
        }
    }

    fn descend(&mut self, level: usize, remaining: u64, rank: u64) {
        let s = self.counts.len();
        if level + 1 == s {
            self.set_level(level, remaining);
            self.leaf(rank);
            return;
        }
        for k in 0..=remaining {
            self.set_level(level, k);
            self.descend(level + 1, remaining - k, rank * (self.n + 1) + k);
        }
    }

    fn leaf(&mut self, rank: u64) {
        let last = self.counts.len() - 1;
        let value = (linalg::norm(&self.q[last]) - linalg::norm(&self.p[last])).abs();
        self.evaluated += 1;
        let cand = Candidate { value, rank, support: Vec::new() };
        if better(&cand, &self.best) == Ordering::Less {
            let n = self.n as f64;
            let support =
                self.counts.iter().enumerate().filter(|&(_, &c)| c != 0).map(|(i, &c)| (i, c as f64 / n)).collect();
            self.best = Candidate { support, ..cand };
        }
    }
}

fn dirichlet_support<R: Rng>(rng: &mut R, pool: usize, size: usize) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = if size >= pool { (0..pool).collect() } else { index::sample(rng, pool, size).into_vec() };
    idx.sort_unstable();
    let draws: Vec<f64> = idx.iter().map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    idx.into_iter().zip(draws).map(|(i, e)| (i, e / total)).collect()
}

fn sampled_candidates(eval: &Evaluator<'_>, samples: usize, seed: u64) -> (TopK, u64) {
    let t = eval.directions.len();
    let mut top = TopK::default();
    let mut evaluations = 0u64;

    // Vertices then midpoints, ranked ahead of random draws.
    for i in 0..t {
        let support = vec![(i, 1.0)];
        top.push(Candidate { value: eval.eval_sparse(&support), rank: i as u64, support });
    }
    evaluations += t as u64;
    let mid = (0..t)
        .into_par_iter()
        .map(|i| {
            let mut local = TopK::default();
            for j in (i + 1)..t {
                let support = vec![(i, 0.5), (j, 0.5)];
                let rank = (t + i * t + j) as u64;
                local.push(Candidate { value: eval.eval_sparse(&support), rank, support });
            }
            local
        })
        .collect::<Vec<_>>();
    for local in mid {
        top = top.merge(local);
    }
    evaluations += (t * t.saturating_sub(1) / 2) as u64;

    // Random draws: sample s has kind s % 4 (dense, support 2, 3, ceil(sqrt|T|)).
    let sqrt_support = (t as f64).sqrt().ceil() as usize;
    let offset = (t + t * t) as u64;
    let batches = samples.div_ceil(SAMPLE_BATCH);
    let drawn = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed::stream_rng(seed, b as u64);
            let mut local = TopK::default();
            let start = b * SAMPLE_BATCH;
            for s in start..(start + SAMPLE_BATCH).min(samples) {
                let size = match s % 4 {
                    0 => t,
                    1 => 2,
                    2 => 3,
                    _ => sqrt_support,
                };
                let support = dirichlet_support(&mut rng, t, size.min(t));
                let value = eval.eval_sparse(&support);
                local.push(Candidate { value, rank: offset + s as u64, support });
            }
            local
        })
        .collect::<Vec<_>>();
    for local in drawn {
        top = top.merge(local);
    }
    evaluations += samples as u64;
    (top, evaluations)
}

/// Monte Carlo lower estimate of the supremum.
pub fn estimate_sampled(
    sketch: &SketchMatrix,
    directions: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> Result<ChdEstimate> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let eval = Evaluator::new(sketch, directions)?;
    let (top, evaluations) = sampled_candidates(&eval, samples, seed);
    let best = &top.items[0];
    Ok(ChdEstimate {
        max_violation: best.value,
        witness: eval.hull_point(&best.support),
        method: ChdMethod::Sampled,
        certified_bound: None,
        evaluations,
    })
}

/// Sampling followed by [`refine_local`] from the best few sampled points.
pub fn estimate_refined(
    sketch: &SketchMatrix,
    directions: &[Vec<f64>],
    samples: usize,
    seed: u64,
    iters: usize,
) -> Result<ChdEstimate> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let eval = Evaluator::new(sketch, directions)?;
    let (top, mut evaluations) = sampled_candidates(&eval, samples, seed);
    let mut best: Option<ChdEstimate> = None;
    for cand in &top.items {
        let start = eval.hull_point(&cand.support);
        let refined = refine_with(&eval, &start, iters);
        evaluations += refined.evaluations;
        if best.as_ref().is_none_or(|b| refined.max_violation > b.max_violation) {
            best = Some(refined);
        }
    }
    let mut best = best.expect("at least one candidate");
    best.evaluations = evaluations;
    Ok(best)
}

/// Pair-move ascent: each step moves mass from one coordinate to another
/// along the pair with the best first-order gain, with a bracketing line
/// search. Steps that do not strictly increase the violation are rejected.
pub fn refine_local(
    sketch: &SketchMatrix,
    directions: &[Vec<f64>],
    start: &HullPoint,
    iters: usize,
) -> Result<ChdEstimate> {
    let eval = Evaluator::new(sketch, directions)?;
    if start.weights.len() != directions.len() {
        return Err(Error::dim(directions.len(), start.weights.len()));
    }
    Ok(refine_with(&eval, start, iters))
}

/// Exhaustive pair search below this many directions.
const EXHAUSTIVE_PAIRS: usize = 16;
/// Pairs tried per step, by first-order gain, for larger direction sets.
const RANKED_PAIRS: usize = 8;

fn refine_with(eval: &Evaluator<'_>, start: &HullPoint, iters: usize) -> ChdEstimate {
    let mut weights = start.weights.clone();
    let support = support_of(&weights);
    let mut p = vec![0.0; eval.d()];
    let mut q = vec![0.0; eval.m()];
    for &(i, w) in &support {
        linalg::axpy(w, &eval.directions[i], &mut p);
        linalg::axpy(w, &eval.images[i], &mut q);
    }
    let mut value = (linalg::norm(&q) - linalg::norm(&p)).abs();
    let mut evaluations = 1u64;

    for _ in 0..iters {
        let pairs = candidate_pairs(eval, &weights, &p, &q);
        let mut moved = false;
        for (from, to) in pairs {
            let (mu, v, evals) = line_search(eval, &p, &q, from, to, weights[from]);
            evaluations += evals;
            if v > value {
                weights[from] -= mu;
                weights[to] += mu;
                if weights[from] < 1e-15 {
                    // Snap tiny leftovers so the support really shrinks.
                    weights[to] += weights[from];
                    weights[from] = 0.0;
                }
                p.iter_mut().for_each(|x| *x = 0.0);
                q.iter_mut().for_each(|x| *x = 0.0);
                for (i, &w) in weights.iter().enumerate() {
                    if w != 0.0 {
                        linalg::axpy(w, &eval.directions[i], &mut p);
                        linalg::axpy(w, &eval.images[i], &mut q);
                    }
                }
                value = (linalg::norm(&q) - linalg::norm(&p)).abs();
                evaluations += 1;
                moved = true;
                break;
            }
        }
        if !moved {
            break;
        }
    }
    // Report through the same path as `violation` so the result is
    // comparable with the start to the last bit.
    let end = eval.hull_point(&support_of(&weights));
    let (end_value, start_value) = (eval.value_at(&end), eval.value_at(start));
    let (witness, max_violation) = if end_value >= start_value { (end, end_value) } else { (start.clone(), start_value) };
    ChdEstimate {
        max_violation,
        witness,
        method: ChdMethod::LocalAscent,
        certified_bound: None,
        evaluations,
    }
}

fn candidate_pairs(eval: &Evaluator<'_>, weights: &[f64], p: &[f64], q: &[f64]) -> Vec<(usize, usize)> {
    let t = weights.len();
    let sources: Vec<usize> = (0..t).filter(|&i| weights[i] > 0.0).collect();
    if t <= EXHAUSTIVE_PAIRS {
        return sources.iter().flat_map(|&i| (0..t).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    }
    // Gradient of sign * (|q| - |p|) with respect to each weight.
    let (np, nq) = (linalg::norm(p), linalg::norm(q));
    let sign = if nq >= np { 1.0 } else { -1.0 };
    let grad: Vec<f64> = (0..t)
        .map(|j| {
            let gq = if nq > 0.0 { linalg::dot(q, &eval.images[j]) / nq } else { linalg::norm(&eval.images[j]) };
            let gp = if np > 0.0 { linalg::dot(p, &eval.directions[j]) / np } else { linalg::norm(&eval.directions[j]) };
            sign * (gq - gp)
        })
        .collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for &i in &sources {
        for j in 0..t {
            if j != i && grad[j] > grad[i] {
                pairs.push((grad[j] - grad[i], i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    pairs.truncate(RANKED_PAIRS);
    pairs.into_iter().map(|(_, i, j)| (i, j)).collect()
}

/// Maximizes the violation along `lambda_from -= mu, lambda_to += mu` for
/// `mu in [0, cap]`: a uniform scan followed by golden-section refinement
/// around the best scan point. Returns `(mu, value, evaluations)`.
fn line_search(eval: &Evaluator<'_>, p: &[f64], q: &[f64], from: usize, to: usize, cap: f64) -> (f64, f64, u64) {
    let dp = linalg::sub(&eval.directions[to], &eval.directions[from]);
    let dq = linalg::sub(&eval.images[to], &eval.images[from]);
    let mut pp = vec![0.0; p.len()];
    let mut qq = vec![0.0; q.len()];
    let mut f = |mu: f64| {
        for k in 0..p.len() {
            pp[k] = p[k] + mu * dp[k];
        }
        for k in 0..q.len() {
            qq[k] = q[k] + mu * dq[k];
        }
        (linalg::norm(&qq) - linalg::norm(&pp)).abs()
    };
    const SCAN: usize = 16;
    let mut evals = 0u64;
    let mut best = (0.0, f64::NEG_INFINITY);
    let mut best_k = 0;
    for k in 0..=SCAN {
        let mu = cap * k as f64 / SCAN as f64;
        let v = f(mu);
        evals += 1;
        if v > best.1 {
            best = (mu, v);
            best_k = k;
        }
    }
    let mut lo = cap * best_k.saturating_sub(1) as f64 / SCAN as f64;
    let mut hi = cap * (best_k + 1).min(SCAN) as f64 / SCAN as f64;
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    evals += 2;
    while hi - lo > 1e-13 * cap.max(1e-300) {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
        evals += 1;
        for (mu, v) in [(a, fa), (b, fb)] {
            if v > best.1 {
                best = (mu, v);
            }
        }
    }
    (best.0, best.1, evals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_sketch(diag: &[f64]) -> SketchMatrix {
        let d = diag.len();
        let mut e = vec![0.0; d * d];
        for i in 0..d {
            e[i * d + i] = diag[i];
        }
        SketchMatrix::from_rows(d, d, e).unwrap()
    }

    #[test]
    fn hull_point_validation() {
        let t = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(HullPoint::new(&t, vec![0.5, 0.5]).is_ok());
        assert!(HullPoint::new(&t, vec![0.6, 0.5]).is_err());
        assert!(HullPoint::new(&t, vec![-0.5, 1.5]).is_err());
        assert!(HullPoint::new(&t, vec![1.0]).is_err());
    }

    #[test]
    fn violation_examples() {
        let t = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let p = HullPoint::new(&t, vec![0.3, 0.7]).unwrap();
        assert_eq!(violation(&SketchMatrix::identity(2), &p).unwrap(), 0.0);
        let zero = SketchMatrix::from_rows(2, 2, vec![0.0; 4]).unwrap();
        let e1 = HullPoint::vertex(&t, 0).unwrap();
        assert_eq!(violation(&zero, &e1).unwrap(), 1.0);
        let mid = HullPoint::new(&t, vec![0.5, 0.5]).unwrap();
        assert_eq!(violation(&diag_sketch(&[3.0, 2.0]), &mid).unwrap(), 0.0);
        let wrong = SketchMatrix::identity(3);
        assert!(violation(&wrong, &mid).is_err());
    }

    #[test]
    fn grid_on_stretched_axis() {
        let t = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let pi = diag_sketch(&[1.1, 1.0]);
        let est = certify_grid(&pi, &t, 0.01).unwrap();
        assert!((est.max_violation - 0.1).abs() < 1e-12);
        let lip = 1.1 + 1.0;
        let bound = est.certified_bound.unwrap();
        assert!(bound <= 0.1 + lip * 0.01 + 1e-12);
        assert_eq!(est.evaluations, 101);
        assert_eq!(est.method, ChdMethod::GridCertified);
    }

    #[test]
    fn grid_identity_bound_is_margin_only() {
        let t = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let est = certify_grid(&SketchMatrix::identity(2), &t, 0.05).unwrap();
        assert_eq!(est.max_violation, 0.0);
        assert!((est.certified_bound.unwrap() - 2.0 * 0.05).abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_bad_input() {
        let t = vec![vec![1.0]; 7];
        let pi = SketchMatrix::identity(1);
        assert!(matches!(certify_grid(&pi, &t, 0.1), Err(Error::TooManyDirections { found: 7, .. })));
        assert!(certify_grid(&pi, &t[..2], 0.0).is_err());
        assert!(certify_grid(&pi, &t[..2], 1.5).is_err());
    }

    #[test]
    fn grid_enumerates_all_compositions() {
        let t = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]];
        let est = certify_grid(&SketchMatrix::identity(2), &t, 0.1).unwrap();
        // C(10 + 2, 2)
        assert_eq!(est.evaluations, 66);
    }

    #[test]
    fn sampled_includes_vertices_and_is_deterministic() {
        let t = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-0.6, 0.8]];
        let pi = diag_sketch(&[1.3, 0.9]);
        let a = estimate_sampled(&pi, &t, 100, 5).unwrap();
        let b = estimate_sampled(&pi, &t, 100, 5).unwrap();
        assert_eq!(a, b);
        let vertex_max = t
            .iter()
            .map(|v| (linalg::norm(&pi.apply(v).unwrap()) - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(a.max_violation >= vertex_max);
        let recomputed = violation(&pi, &a.witness).unwrap();
        assert!((recomputed - a.max_violation).abs() <= 1e-10);
        assert!(estimate_sampled(&pi, &t, 0, 5).is_err());
    }

    #[test]
    fn refine_keeps_global_vertex_max() {
        let t = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let pi = diag_sketch(&[1.1, 1.0]);
        let start = HullPoint::vertex(&t, 0).unwrap();
        let est = refine_local(&pi, &t, &start, 50).unwrap();
        assert_eq!(est.witness.weights(), start.weights());
        assert!((est.max_violation - 0.1).abs() < 1e-12);
    }

    #[test]
    fn refine_never_decreases() {
        let t = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.6, 0.8], vec![-0.8, 0.0, 0.6]];
        let pi = SketchMatrix::from_rows(2, 3, vec![0.9, 0.4, -0.2, 0.1, 1.2, 0.5]).unwrap();
        let start = HullPoint::new(&t, vec![0.25; 4]).unwrap();
        let mut prev = violation(&pi, &start).unwrap();
        let mut current = start;
        for _ in 0..10 {
            let est = refine_local(&pi, &t, &current, 1).unwrap();
            assert!(est.max_violation >= prev - 1e-15);
            prev = est.max_violation;
            current = est.witness;
        }
    }
}
