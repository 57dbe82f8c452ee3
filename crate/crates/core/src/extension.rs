//! Query-time outer extension.
//!
//! For a query `u` with nearest terminal `x_k` and `R = |u - x_k|`, the solver
//! looks for `z` in the ball of radius `R` in `R^m` with
//!
//! ```text
//! |<z, Pi v_i> - <u - x_k, v_i>| <= eps * R,   v_i = (x_i - x_k) / |x_i - x_k|,  i != k
//! ```
//!
//! and the query is lifted to `(Pi x_k + z, sqrt(R^2 - |z|^2))`. The last
//! coordinate makes the distance to `x_k` exact; the constraints control the
//! distances to every other terminal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{exact_small_embedding, ExactEmbedding};
use crate::geometry::PointSet;
use crate::linalg;
use crate::seed;
use crate::sketch::{self, DimensionPlan, Distribution, PlanMode, SketchMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Polyak step towards target value 0: `g(z) / |s|^2`.
    #[default]
    Polyak,
    /// `R / (|s| sqrt(k + 1))`.
    Diminishing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative slack on the stopping threshold `eps * R * (1 + tol)`.
    pub tol: f64,
    pub step_rule: StepRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iters: 5000, tol: 1e-3, step_rule: StepRule::Polyak }
    }
}

/// The solver's answer for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionSolution {
    pub u_prime: Vec<f64>,
    pub radius: f64,
    /// `max_i |<z, w_i> - t_i| / R`, or 0 when there is nothing to satisfy.
    pub residual: f64,
    pub iterations: usize,
    pub anchor: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Map {
    Sketch(SketchMatrix),
    Exact(ExactEmbedding),
}

/// Frozen embedding of a terminal set, answering arbitrary queries.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalEmbedder {
    points: PointSet,
    map: Map,
    /// `Pi x_i` (sketch) or the exact coordinates without the trailing 0.
    embedded: Vec<Vec<f64>>,
    epsilon: f64,
    solver: SolverConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    /// Follow the dimension plan.
    #[default]
    Auto,
    /// Always sketch with the formula dimension.
    Sketch,
    /// Always use the exact embedding.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub epsilon: f64,
    #[serde(rename = "C")]
    pub constant: f64,
    pub distribution: Distribution,
    /// Global seed; the sketch draws from the seed derived under label "sketch".
    pub seed: u64,
    pub mode: ModeChoice,
    pub solver: SolverConfig,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.25,
            constant: sketch::DEFAULT_CONSTANT,
            distribution: Distribution::Rademacher,
            seed: 0,
            mode: ModeChoice::Auto,
            solver: SolverConfig::default(),
        }
    }
}

/// One embedded query with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddedQuery {
    #[serde(skip)]
    pub point: Vec<f64>,
    pub anchor: usize,
    pub radius: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub member: bool,
}

/// Anything that maps the terminal set and arbitrary queries into a common
/// space; implemented by [`TerminalEmbedder`] and the [`EfnBaseline`].
pub trait TerminalMap: Sync {
    fn points(&self) -> &PointSet;
    fn output_dim(&self) -> usize;
    /// Image of terminal point `i`.
    fn terminal_image(&self, i: usize) -> Vec<f64>;
    fn embed_query(&self, u: &[f64]) -> Result<EmbeddedQuery>;
}

impl TerminalEmbedder {
    /// Plans the dimension and builds either the sketch or the exact map.
    pub fn build(points: PointSet, config: &BuildConfig) -> Result<(Self, DimensionPlan)> {
        let plan = sketch::plan_dimension(points.len(), config.epsilon, config.constant)?;
        let exact = match config.mode {
            ModeChoice::Auto => plan.mode == PlanMode::ExactSmall,
            ModeChoice::Sketch => false,
            ModeChoice::Exact => true,
        };
        let embedder = if exact {
            Self::exact(points, config.epsilon, config.solver)?
        } else {
            let sketch_seed = seed::derive_seed(config.seed, seed::LABEL_SKETCH);
            let pi = sketch::generate_sketch(plan.m, points.dim(), config.distribution, sketch_seed)?;
            Self::with_sketch(points, pi, config.epsilon, config.solver)?
        };
        Ok((embedder, plan))
    }

    pub fn with_sketch(points: PointSet, sketch: SketchMatrix, epsilon: f64, solver: SolverConfig) -> Result<Self> {
        validate(epsilon, &solver)?;
        let embedded = sketch.apply_batch(points.points())?;
        Ok(Self { points, map: Map::Sketch(sketch), embedded, epsilon, solver })
    }

    pub fn exact(points: PointSet, epsilon: f64, solver: SolverConfig) -> Result<Self> {
        let map = exact_small_embedding(&points);
        Self::from_exact(points, map, epsilon, solver)
    }

    pub fn from_exact(points: PointSet, map: ExactEmbedding, epsilon: f64, solver: SolverConfig) -> Result<Self> {
        validate(epsilon, &solver)?;
        if map.input_dim() != points.dim() {
            return Err(Error::dim(points.dim(), map.input_dim()));
        }
        let embedded = points
            .iter()
            .map(|x| {
                let mut y = map.map(x)?;
                y.pop();
                Ok(y)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points, map: Map::Exact(map), embedded, epsilon, solver })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn sketch(&self) -> Option<&SketchMatrix> {
        match &self.map {
            Map::Sketch(s) => Some(s),
            Map::Exact(_) => None,
        }
    }

    pub fn exact_map(&self) -> Option<&ExactEmbedding> {
        match &self.map {
            Map::Exact(e) => Some(e),
            Map::Sketch(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.map, Map::Exact(_))
    }

    /// `m` for the sketch, the rank for the exact map.
    pub fn embedded_dim(&self) -> usize {
        self.embedded[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.embedded_dim() + 1
    }

    /// Images of the terminals without the trailing zero.
    pub fn embedded_points(&self) -> &[Vec<f64>] {
        &self.embedded
    }

    /// The linear map whose convex hull distortion governs the guarantee:
    /// the sketch, or the basis projection of the exact map.
    pub fn linear_map(&self) -> Option<SketchMatrix> {
        match &self.map {
            Map::Sketch(s) => Some(s.clone()),
            Map::Exact(e) => e.linear_part(),
        }
    }

    /// Solves the extension problem for `u` (sketch mode only).
    pub fn solve_extension(&self, u: &[f64]) -> Result<ExtensionSolution> {
        let Map::Sketch(pi) = &self.map else {
            return Err(Error::InvalidParameter("the exact embedding has no extension problem".into()));
        };
        let (k, radius) = self.points.nearest(u)?;
        let m = pi.rows();
        let trivial = |iterations| ExtensionSolution {
            u_prime: vec![0.0; m],
            radius,
            residual: 0.0,
            iterations,
            anchor: k,
            converged: true,
        };
        if radius == 0.0 || self.points.len() == 1 {
            return Ok(trivial(0));
        }

        let xk = self.points.point(k);
        let pxk = &self.embedded[k];
        let offset = linalg::sub(u, xk);
        let mut rows = Vec::with_capacity(self.points.len() - 1);
        let mut targets = Vec::with_capacity(rows.capacity());
        for (i, x) in self.points.iter().enumerate() {
            if i == k {
                continue;
            }
            let diff = linalg::sub(x, xk);
            let len = linalg::norm(&diff);
            let mut w = linalg::sub(&self.embedded[i], pxk);
            linalg::scale(1.0 / len, &mut w);
            rows.push(w);
            targets.push(linalg::dot(&offset, &diff) / len);
        }
        let system = Constraints { rows, targets };

        let mut z = pi.apply_unchecked(&offset);
        let pn = linalg::norm(&z);
        if pn <= 1e-12 * radius {
            z.iter_mut().for_each(|v| *v = 0.0);
        } else {
            linalg::scale(radius / pn, &mut z);
        }

        let threshold = self.epsilon * radius * (1.0 + self.solver.tol);
        let (mut value, mut worst) = system.max_violation(&z);
        let mut best = (value, z.clone());
        let mut iterations = 0;
        while value > threshold && iterations < self.solver.max_iters {
            let w = &system.rows[worst];
            let sign = if linalg::dot(&z, w) - system.targets[worst] >= 0.0 { 1.0 } else { -1.0 };
            let wn2 = linalg::norm_sq(w);
            if wn2 == 0.0 {
                break;
            }
            let step = match self.solver.step_rule {
                StepRule::Polyak => value / wn2,
                StepRule::Diminishing => radius / (wn2.sqrt() * ((iterations + 1) as f64).sqrt()),
            };
            linalg::axpy(-sign * step, w, &mut z);
            let zn = linalg::norm(&z);
            if zn > radius {
                linalg::scale(radius / zn, &mut z);
            }
            iterations += 1;
            (value, worst) = system.max_violation(&z);
            if value < best.0 {
                best = (value, z.clone());
            }
        }
        let (value, u_prime) = best;
        Ok(ExtensionSolution {
            u_prime,
            radius,
            residual: value / radius,
            iterations,
            anchor: k,
            converged: value <= threshold,
        })
    }

    /// Recomputes the normalized residual of `z` for query `u` from scratch.
    pub fn residual_of(&self, u: &[f64], z: &[f64]) -> Result<f64> {
        let Map::Sketch(pi) = &self.map else {
            return Err(Error::InvalidParameter("the exact embedding has no extension problem".into()));
        };
        let (k, radius) = self.points.nearest(u)?;
        if radius == 0.0 {
            return Ok(0.0);
        }
        let xk = self.points.point(k);
        let offset = linalg::sub(u, xk);
        let mut worst = 0.0f64;
        for (i, x) in self.points.iter().enumerate() {
            if i == k {
                continue;
            }
            let diff = linalg::sub(x, xk);
            let len = linalg::norm(&diff);
            let w = pi.apply(&diff)?;
            let gap = linalg::dot(z, &w) / len - linalg::dot(&offset, &diff) / len;
            worst = worst.max(gap.abs());
        }
        Ok(worst / radius)
    }

    /// `(Pi x_k + u', sqrt(max(R^2 - |u'|^2, 0)))`
    pub fn lift(&self, solution: &ExtensionSolution) -> Vec<f64> {
        let mut out = self.embedded[solution.anchor].clone();
        linalg::axpy(1.0, &solution.u_prime, &mut out);
        let r2 = solution.radius * solution.radius;
        out.push((r2 - linalg::norm_sq(&solution.u_prime)).max(0.0).sqrt());
        out
    }

    /// The terminal embedding of `u`. Terminals map to `(Pi x_i, 0)`.
    pub fn embed_terminal(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.embed_query(u).map(|q| q.point)
    }

    /// Embeds many queries in parallel; results keep the input order.
    pub fn embed_batch(&self, queries: &[Vec<f64>]) -> Result<Vec<EmbeddedQuery>> {
        queries.par_iter().map(|u| self.embed_query(u)).collect()
    }
}

fn validate(epsilon: f64, solver: &SolverConfig) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if !(solver.tol >= 0.0 && solver.tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("solver tolerance must be >= 0, got {}", solver.tol)));
    }
    Ok(())
}

struct Constraints {
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl Constraints {
    /// `(max_i |<z, w_i> - t_i|, argmax)`, lowest index on ties.
    fn max_violation(&self, z: &[f64]) -> (f64, usize) {
        let mut best = (0.0, 0);
        for (i, (w, t)) in self.rows.iter().zip(&self.targets).enumerate() {
            let gap = (linalg::dot(z, w) - t).abs();
            if gap > best.0 {
                best = (gap, i);
            }
        }
        best
    }
}

impl TerminalMap for TerminalEmbedder {
    fn points(&self) -> &PointSet {
        &self.points
    }

    fn output_dim(&self) -> usize {
        TerminalEmbedder::output_dim(self)
    }

    fn terminal_image(&self, i: usize) -> Vec<f64> {
        let mut y = self.embedded[i].clone();
        y.push(0.0);
        y
    }

    fn embed_query(&self, u: &[f64]) -> Result<EmbeddedQuery> {
        let (k, radius) = self.points.nearest(u)?;
        if self.points.point(k) == u {
            return Ok(EmbeddedQuery {
                point: self.terminal_image(k),
                anchor: k,
                radius: 0.0,
                residual: 0.0,
                iterations: 0,
                converged: true,
                member: true,
            });
        }
        match &self.map {
            Map::Exact(e) => Ok(EmbeddedQuery {
                point: e.map(u)?,
                anchor: k,
                radius,
                residual: 0.0,
                iterations: 0,
                converged: true,
                member: false,
            }),
            Map::Sketch(_) => {
                let sol = self.solve_extension(u)?;
                Ok(EmbeddedQuery {
                    point: self.lift(&sol),
                    anchor: sol.anchor,
                    radius: sol.radius,
                    residual: sol.residual,
                    iterations: sol.iterations,
                    converged: sol.converged,
                    member: false,
                })
            }
        }
    }
}

/// Snap-to-nearest extension: `u -> (f(x_k), |u - x_k|)`.
pub fn efn_extend(points: &PointSet, images: &[Vec<f64>], u: &[f64]) -> Result<Vec<f64>> {
    if images.len() != points.len() {
        return Err(Error::dim(points.len(), images.len()));
    }
    let (k, radius) = points.nearest(u)?;
    let mut out = images[k].clone();
    out.push(if points.point(k) == u { 0.0 } else { radius });
    Ok(out)
}

/// [`efn_extend`] packaged as a [`TerminalMap`] for the evaluation harness.
#[derive(Debug, Clone)]
pub struct EfnBaseline {
    points: PointSet,
    images: Vec<Vec<f64>>,
}

impl EfnBaseline {
    pub fn new(points: PointSet, images: Vec<Vec<f64>>) -> Result<Self> {
        if images.len() != points.len() {
            return Err(Error::dim(points.len(), images.len()));
        }
        let dim = images[0].len();
        if let Some(bad) = images.iter().find(|y| y.len() != dim) {
            return Err(Error::dim(dim, bad.len()));
        }
        Ok(Self { points, images })
    }

    /// Baseline over the same base embedding a terminal embedder uses.
    pub fn from_embedder(embedder: &TerminalEmbedder) -> Self {
        Self { points: embedder.points.clone(), images: embedder.embedded.clone() }
    }
}

impl TerminalMap for EfnBaseline {
    fn points(&self) -> &PointSet {
        &self.points
    }

    fn output_dim(&self) -> usize {
        self.images[0].len() + 1
    }

    fn terminal_image(&self, i: usize) -> Vec<f64> {
        let mut y = self.images[i].clone();
        y.push(0.0);
        y
    }

    fn embed_query(&self, u: &[f64]) -> Result<EmbeddedQuery> {
        let (k, radius) = self.points.nearest(u)?;
        let point = efn_extend(&self.points, &self.images, u)?;
        let member = self.points.point(k) == u;
        Ok(EmbeddedQuery { point, anchor: k, radius, residual: 0.0, iterations: 0, converged: true, member })
    }
}
