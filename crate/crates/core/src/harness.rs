//! Empirical terminal distortion: query samplers, ratio statistics and
//! scaling studies of measured distortion against the sketch dimension.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chd;
use crate::error::{Error, Result};
use crate::extension::{ModeChoice, SolverConfig, TerminalEmbedder, TerminalMap};
use crate::geometry::{direction_set, PointSet};
use crate::linalg;
use crate::seed;
use crate::sketch::{self, Distribution, PlanMode};

pub const HISTOGRAM_BINS: usize = 64;
/// Shell radii, as multiples of the anchor's nearest-neighbor distance, used
/// by the standard sampler suite.
pub const NEAR_SHELL_FACTORS: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
pub const DEFAULT_FAR_SCALE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    /// Uniform in the bounding box of `X`, side lengths doubled about its center.
    Box,
    /// `x_i + radius * (random unit vector)`.
    Shell { radius: f64 },
    /// Shell whose radius is `factor` times the anchor's nearest-neighbor distance.
    NearShell { factor: f64 },
    /// Uniform point on the segment between two random distinct terminals.
    Segment,
    /// A random terminal itself.
    Member,
    /// `centroid + scale * diameter * (random unit vector)`.
    Far { scale: f64 },
}

impl Sampler {
    pub fn label(&self) -> String {
        match self {
            Sampler::Box => "box".into(),
            Sampler::Shell { radius } => format!("shell({radius})"),
            Sampler::NearShell { factor } => format!("near_shell({factor})"),
            Sampler::Segment => "segment".into(),
            Sampler::Member => "member".into(),
            Sampler::Far { scale } => format!("far({scale})"),
        }
    }

    /// Parses `box`, `shell:R`, `near_shell:F`, `segment`, `member`, `far:S`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>, default: Option<f64>| -> Result<f64> {
            match a {
                Some(a) => a.parse().map_err(|_| Error::InvalidParameter(format!("bad sampler argument in {s:?}"))),
                None => default.ok_or_else(|| Error::InvalidParameter(format!("sampler {s:?} needs an argument"))),
            }
        };
        match name {
            "box" => Ok(Sampler::Box),
            "shell" => Ok(Sampler::Shell { radius: num(arg, None)? }),
            "near_shell" => Ok(Sampler::NearShell { factor: num(arg, None)? }),
            "segment" => Ok(Sampler::Segment),
            "member" => Ok(Sampler::Member),
            "far" => Ok(Sampler::Far { scale: num(arg, Some(DEFAULT_FAR_SCALE))? }),
            _ => Err(Error::InvalidParameter(format!("unknown sampler {s:?}"))),
        }
    }
}

/// Box, near-shells at every factor in [`NEAR_SHELL_FACTORS`], segment,
/// member and far.
pub fn standard_suite() -> Vec<Sampler> {
    let mut out = vec![Sampler::Box];
    out.extend(NEAR_SHELL_FACTORS.iter().map(|&factor| Sampler::NearShell { factor }));
    out.extend([Sampler::Segment, Sampler::Member, Sampler::Far { scale: DEFAULT_FAR_SCALE }]);
    out
}

fn unit_vector<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = linalg::norm(&v);
        if n > 0.0 {
            linalg::scale(1.0 / n, &mut v);
            return v;
        }
    }
}

pub fn sample_queries(points: &PointSet, sampler: Sampler, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::InvalidParameter("query count must be >= 1".into()));
    }
    let mut rng = seed::rng(seed);
    let n = points.len();
    let d = points.dim();
    let shell = |rng: &mut rand_chacha::ChaCha8Rng, i: usize, radius: f64| {
        let mut u = points.point(i).to_vec();
        linalg::axpy(radius, &unit_vector(rng, d), &mut u);
        u
    };
    let out = match sampler {
        Sampler::Box => {
            let (lo, hi) = points.bounding_box();
            (0..count)
                .map(|_| {
                    lo.iter()
                        .zip(&hi)
                        .map(|(&a, &b)| {
                            // Half-width of the doubled box is the full original width.
                            0.5 * (a + b) + (b - a) * rng.random_range(-1.0..=1.0)
                        })
                        .collect()
                })
                .collect()
        }
        Sampler::Shell { radius } => (0..count)
            .map(|_| {
                let i = rng.random_range(0..n);
                shell(&mut rng, i, radius)
            })
            .collect(),
        Sampler::NearShell { factor } => {
            let nn: Vec<f64> = (0..n).map(|i| points.neighbor_distance(i).unwrap_or(1.0)).collect();
            (0..count)
                .map(|_| {
                    let i = rng.random_range(0..n);
                    shell(&mut rng, i, factor * nn[i])
                })
                .collect()
        }
        Sampler::Segment => (0..count)
            .map(|_| {
                if n == 1 {
                    return points.point(0).to_vec();
                }
                let i = rng.random_range(0..n);
                let j = (i + rng.random_range(1..n)) % n;
                let t: f64 = rng.random();
                points.point(i).iter().zip(points.point(j)).map(|(a, b)| (1.0 - t) * a + t * b).collect()
            })
            .collect(),
        Sampler::Member => (0..count).map(|_| points.point(rng.random_range(0..n)).to_vec()).collect(),
        Sampler::Far { scale } => {
            let centroid = points.centroid();
            let reach = scale * points.diameter().max(f64::MIN_POSITIVE);
            (0..count)
                .map(|_| {
                    let mut u = centroid.clone();
                    linalg::axpy(reach, &unit_vector(&mut rng, d), &mut u);
                    u
                })
                .collect()
        }
    };
    Ok(out)
}

/// Queries drawn from one sampler (or supplied by the caller).
#[derive(Debug, Clone, PartialEq)]
pub struct QueryBatch {
    pub label: String,
    pub queries: Vec<Vec<f64>>,
}

/// Draws `count` queries from each sampler; sampler `j` uses seed
/// `derive_seed(seed, "queries") + j`.
pub fn sample_suite(points: &PointSet, samplers: &[Sampler], count: usize, seed: u64) -> Result<Vec<QueryBatch>> {
    let base = seed::derive_seed(seed, seed::LABEL_QUERIES);
    samplers
        .iter()
        .enumerate()
        .map(|(j, s)| {
            Ok(QueryBatch { label: s.label(), queries: sample_queries(points, *s, count, base.wrapping_add(j as u64))? })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioStats {
    pub count: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// `max / min`: worst stretch times worst shrink.
    pub distortion: f64,
    /// `max |ratio - 1|`
    pub max_abs_deviation: f64,
}

impl RatioStats {
    fn from_ratios(ratios: impl Iterator<Item = f64>) -> Self {
        let (mut count, mut min, mut max, mut sum, mut dev) = (0u64, f64::INFINITY, f64::NEG_INFINITY, 0.0, 0.0f64);
        for r in ratios {
            count += 1;
            min = min.min(r);
            max = max.max(r);
            sum += r;
            dev = dev.max((r - 1.0).abs());
        }
        if count == 0 {
            return Self { count, min: 1.0, max: 1.0, mean: 1.0, distortion: 1.0, max_abs_deviation: 0.0 };
        }
        // Clamp the mean into [min, max] against summation rounding.
        let mean = (sum / count as f64).clamp(min, max);
        Self { count, min, max, mean, distortion: max / min, max_abs_deviation: dev }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerBreakdown {
    pub sampler: String,
    pub queries: usize,
    pub ratios: RatioStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverStats {
    pub max_residual: f64,
    pub mean_iterations: f64,
    pub max_iterations: usize,
    pub not_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub epsilon: f64,
    pub m: usize,
    #[serde(rename = "C")]
    pub constant: Option<f64>,
    pub seed: u64,
    pub map: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionReport {
    pub config: ReportConfig,
    pub query_count: usize,
    pub ratios: RatioStats,
    /// `max |(|f(u) - f(x)|^2 - |u - x|^2)| / |u - x|^2`
    pub max_sq_relative_error: f64,
    /// `max |ratio - 1|` restricted to each query's anchor `x_k`; the lift
    /// makes this zero up to rounding.
    pub anchor_isometry_error: f64,
    pub histogram: Histogram,
    pub samplers: Vec<SamplerBreakdown>,
    pub solver: SolverStats,
}

/// One `(query, terminal)` pair with a defined ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairRecord {
    pub query_index: usize,
    pub point_index: usize,
    pub distance: f64,
    pub embedded_distance: f64,
    pub ratio: f64,
    /// `|f(u) - f(x)|^2 - |u - x|^2`
    pub sq_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRecord {
    pub query_index: usize,
    pub sampler: String,
    #[serde(flatten)]
    pub diagnostics: crate::extension::EmbeddedQuery,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: DistortionReport,
    pub pairs: Vec<PairRecord>,
    pub queries: Vec<QueryRecord>,
}

/// Embeds every query and measures `|f(u) - f(x_i)| / |u - x_i|` for all
/// terminals at positive distance.
pub fn evaluate<M: TerminalMap>(map: &M, batches: &[QueryBatch], config: ReportConfig) -> Result<Evaluation> {
    let points = map.points();
    let images: Vec<Vec<f64>> = (0..points.len()).map(|i| map.terminal_image(i)).collect();
    let labeled: Vec<(&str, &Vec<f64>)> =
        batches.iter().flat_map(|b| b.queries.iter().map(move |q| (b.label.as_str(), q))).collect();

    let per_query: Vec<(QueryRecord, Vec<PairRecord>, f64)> = labeled
        .par_iter()
        .enumerate()
        .map(|(qi, (label, u))| {
            let embedded = map.embed_query(u)?;
            let mut pairs = Vec::with_capacity(points.len());
            let mut anchor_err = 0.0;
            for (i, x) in points.iter().enumerate() {
                let distance = linalg::dist(u, x);
                let embedded_distance = linalg::dist(&embedded.point, &images[i]);
                if i == embedded.anchor && distance > 0.0 {
                    anchor_err = (embedded_distance / distance - 1.0).abs();
                }
                if distance > 0.0 {
                    pairs.push(PairRecord {
                        query_index: qi,
                        point_index: i,
                        distance,
                        embedded_distance,
                        ratio: embedded_distance / distance,
                        sq_error: embedded_distance * embedded_distance - distance * distance,
                    });
                }
            }
            let record = QueryRecord { query_index: qi, sampler: label.to_string(), diagnostics: embedded };
            Ok((record, pairs, anchor_err))
        })
        .collect::<Result<_>>()?;

    let all_pairs: Vec<PairRecord> = per_query.iter().flat_map(|q| q.1.iter().copied()).collect();
    let ratios = RatioStats::from_ratios(all_pairs.iter().map(|p| p.ratio));
    let max_sq_relative_error =
        all_pairs.iter().map(|p| (p.sq_error / (p.distance * p.distance)).abs()).fold(0.0, f64::max);
    let anchor_isometry_error = per_query.iter().map(|q| q.2).fold(0.0, f64::max);

    let mut counts = vec![0u64; HISTOGRAM_BINS];
    let width = ratios.max - ratios.min;
    for p in &all_pairs {
        let bin = if width > 0.0 { ((p.ratio - ratios.min) / width * HISTOGRAM_BINS as f64) as usize } else { 0 };
        counts[bin.min(HISTOGRAM_BINS - 1)] += 1;
    }

    let mut samplers = Vec::new();
    let mut start = 0;
    for b in batches {
        let range = start..start + b.queries.len();
        let stats = RatioStats::from_ratios(per_query[range.clone()].iter().flat_map(|q| q.1.iter().map(|p| p.ratio)));
        samplers.push(SamplerBreakdown { sampler: b.label.clone(), queries: b.queries.len(), ratios: stats });
        start = range.end;
    }

    let queries: Vec<QueryRecord> = per_query.into_iter().map(|q| q.0).collect();
    let solver = SolverStats {
        max_residual: queries.iter().map(|q| q.diagnostics.residual).fold(0.0, f64::max),
        mean_iterations: if queries.is_empty() {
            0.0
        } else {
            queries.iter().map(|q| q.diagnostics.iterations as f64).sum::<f64>() / queries.len() as f64
        },
        max_iterations: queries.iter().map(|q| q.diagnostics.iterations).max().unwrap_or(0),
        not_converged: queries.iter().filter(|q| !q.diagnostics.converged).count(),
    };
    let report = DistortionReport {
        config,
        query_count: queries.len(),
        histogram: Histogram { lo: ratios.min, hi: ratios.max, counts },
        ratios,
        max_sq_relative_error,
        anchor_isometry_error,
        samplers,
        solver,
    };
    Ok(Evaluation { report, pairs: all_pairs, queries })
}

/// CSV dump `query_index,point_index,ratio,sq_error`.
pub fn write_raw_csv<W: Write>(mut writer: W, pairs: &[PairRecord]) -> Result<()> {
    writeln!(writer, "query_index,point_index,ratio,sq_error")?;
    for p in pairs {
        writeln!(writer, "{},{},{:?},{:?}", p.query_index, p.point_index, p.ratio, p.sq_error)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub distribution: Distribution,
    pub chd_samples: usize,
    pub queries_per_sampler: usize,
    pub samplers: Vec<Sampler>,
    pub solver: SolverConfig,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            distribution: Distribution::Rademacher,
            chd_samples: 2000,
            queries_per_sampler: 20,
            samplers: standard_suite(),
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub epsilon: f64,
    #[serde(rename = "C")]
    pub constant: f64,
    pub seed: u64,
    /// Formula dimension from the plan; the study always sketches with it.
    pub m: usize,
    pub plan_mode: PlanMode,
    pub chd_violation: f64,
    pub max_abs_deviation: f64,
    pub distortion: f64,
    pub max_residual: f64,
}

/// Full factorial sweep over `epsilons x constants x seeds`.
pub fn scaling_study(
    points: &PointSet,
    epsilons: &[f64],
    constants: &[f64],
    seeds: &[u64],
    config: &ScalingConfig,
) -> Result<Vec<ScalingRow>> {
    if epsilons.is_empty() || constants.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter("scaling grids must be nonempty".into()));
    }
    let directions = direction_set(points);
    let mut rows = Vec::new();
    for &epsilon in epsilons {
        for &constant in constants {
            let plan = sketch::plan_dimension(points.len(), epsilon, constant)?;
            for &s in seeds {
                let build = crate::extension::BuildConfig {
                    epsilon,
                    constant,
                    distribution: config.distribution,
                    seed: s,
                    mode: ModeChoice::Sketch,
                    solver: config.solver,
                };
                let (embedder, _) = TerminalEmbedder::build(points.clone(), &build)?;
                let pi = embedder.sketch().expect("sketch mode requested");
                let chd_violation = if directions.is_empty() {
                    0.0
                } else {
                    let chd_seed = seed::derive_seed(s, seed::LABEL_CHD);
                    chd::estimate_sampled(pi, directions.directions(), config.chd_samples.max(1), chd_seed)?
                        .max_violation
                };
                let batches = sample_suite(points, &config.samplers, config.queries_per_sampler, s)?;
                let echo = ReportConfig { epsilon, m: plan.m, constant: Some(constant), seed: s, map: "terminal".into() };
                let report = evaluate(&embedder, &batches, echo)?.report;
                rows.push(ScalingRow {
                    epsilon,
                    constant,
                    seed: s,
                    m: plan.m,
                    plan_mode: plan.mode,
                    chd_violation,
                    max_abs_deviation: report.ratios.max_abs_deviation,
                    distortion: report.ratios.distortion,
                    max_residual: report.solver.max_residual,
                });
            }
        }
    }
    Ok(rows)
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}
