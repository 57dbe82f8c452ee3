//! The `te` command line.
//!
//! Exit codes: 0 success, 1 usage, 2 input or dimension error, 3 an
//! `--assert` threshold failed (the report is still written).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bundle;
use crate::chd::{self, ChdEstimate, ChdMethod};
use crate::error::{Error, Result};
use crate::extension::{BuildConfig, EfnBaseline, ModeChoice, SolverConfig, StepRule, TerminalEmbedder};
use crate::geometry::{direction_set, PointSet};
use crate::harness::{self, QueryBatch, ReportConfig, Sampler, ScalingConfig};
use crate::io::{self, PointFormat, Rows};
use crate::seed;
use crate::sketch::{self, Distribution};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ASSERT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "te", version, about = "Terminal embeddings: sketch a point set, embed arbitrary queries")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Distortion parameter in (0, 1). Defaults to 0.25 for `build`; other
    /// commands use the bundle's value unless given.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Constant C in m = ceil(C eps^-2 ln(n(n-1))).
    #[arg(long = "const-C", visible_alias = "const-c", global = true, default_value_t = sketch::DEFAULT_CONSTANT)]
    pub constant: f64,
    #[arg(long = "dist", global = true, value_enum, default_value_t = DistArg::Rademacher)]
    pub distribution: DistArg,
    #[arg(long, global = true, env = "TE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "solver-iters", global = true)]
    pub solver_iters: Option<usize>,
    #[arg(long = "solver-tol", global = true)]
    pub solver_tol: Option<f64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Threshold check `KEY=VALUE`; repeatable. Exit code 3 on failure.
    #[arg(long = "assert", global = true, value_parser = parse_assertion)]
    pub asserts: Vec<Assertion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistArg {
    Rademacher,
    Gaussian,
}

impl From<DistArg> for Distribution {
    fn from(d: DistArg) -> Self {
        match d {
            DistArg::Rademacher => Distribution::Rademacher,
            DistArg::Gaussian => Distribution::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Csv,
    Bin,
}

impl From<FormatArg> for PointFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => PointFormat::Csv,
            FormatArg::Bin => PointFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Auto,
    Sketch,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChdMethodArg {
    Sampled,
    Refined,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineArg {
    Terminal,
    Efn,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan the dimension, draw the sketch and write an embedder bundle.
    Build {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
        mode: ModeArg,
    },
    /// Embed query points with a bundle; writes outputs plus `<out>.diag.json`.
    Query {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Format of the query file and of the output (default: by extension of the query file).
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Estimate the convex hull distortion of the bundle's map over its direction set.
    #[command(name = "verify-chd")]
    VerifyChd {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, value_enum, default_value_t = ChdMethodArg::Sampled)]
        method: ChdMethodArg,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long = "grid-step", default_value_t = 0.01)]
        grid_step: f64,
        #[arg(long = "refine-iters", default_value_t = 500)]
        refine_iters: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Measure terminal distortion over sampled or supplied queries.
    Eval {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Comma-separated samplers: box, shell:R, near_shell:F, segment, member, far[:S].
        #[arg(long, value_delimiter = ',')]
        samplers: Vec<String>,
        /// Queries per sampler.
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, value_enum, default_value_t = BaselineArg::Terminal)]
        baseline: BaselineArg,
        #[arg(long)]
        report: Option<PathBuf>,
        /// CSV dump of every (query, point, ratio) triple.
        #[arg(long)]
        raw: Option<PathBuf>,
    },
    /// Full factorial sweep of (epsilon, C, seed): chd violation and distortion versus m.
    Scaling {
        #[arg(long)]
        points: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        #[arg(long = "consts", value_delimiter = ',', required = true)]
        constants: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long = "chd-samples", default_value_t = 2000)]
        chd_samples: usize,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long)]
        format: Option<FormatArg>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub key: String,
    pub threshold: f64,
}

fn parse_assertion(s: &str) -> std::result::Result<Assertion, String> {
    let (key, value) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    let threshold = value.trim().parse::<f64>().map_err(|e| format!("bad threshold in {s:?}: {e}"))?;
    Ok(Assertion { key: key.trim().to_owned(), threshold })
}

/// Whether a metric is bounded from below (`>=`) instead of above (`<=`).
fn lower_bounded(key: &str) -> bool {
    matches!(key, "min-ratio")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct AssertionResult {
    key: String,
    comparison: &'static str,
    threshold: f64,
    value: Option<f64>,
    passed: bool,
}

fn check_assertions(asserts: &[Assertion], metrics: &[(&str, f64)]) -> Vec<AssertionResult> {
    asserts
        .iter()
        .map(|a| {
            let value = metrics.iter().find(|(k, _)| *k == a.key).map(|(_, v)| *v);
            let lower = lower_bounded(&a.key);
            let passed = match value {
                Some(v) if lower => v >= a.threshold,
                Some(v) => v <= a.threshold,
                None => false,
            };
            AssertionResult {
                key: a.key.clone(),
                comparison: if lower { ">=" } else { "<=" },
                threshold: a.threshold,
                value,
                passed,
            }
        })
        .collect()
}

/// Everything that determines a command's output. Output paths and the
/// thread count are deliberately absent: they do not change results.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub epsilon: Option<f64>,
    #[serde(rename = "C")]
    pub constant: f64,
    pub distribution: DistArg,
    pub seed: u64,
    pub solver_iters: Option<usize>,
    pub solver_tol: Option<f64>,
    pub asserts: Vec<Assertion>,
    pub params: Value,
}

impl RunConfig {
    fn new(global: &GlobalArgs, command: &'static str, params: Value) -> Self {
        Self {
            command,
            epsilon: global.epsilon,
            constant: global.constant,
            distribution: global.distribution,
            seed: global.seed,
            solver_iters: global.solver_iters,
            solver_tol: global.solver_tol,
            asserts: global.asserts.clone(),
            params,
        }
    }
}

fn solver_config(global: &GlobalArgs, base: SolverConfig) -> SolverConfig {
    SolverConfig {
        max_iters: global.solver_iters.unwrap_or(base.max_iters),
        tol: global.solver_tol.unwrap_or(base.tol),
        step_rule: base.step_rule,
    }
}

/// Loads a bundle, applying `--epsilon` / `--solver-*` overrides.
fn load_bundle(global: &GlobalArgs, dir: &Path) -> Result<(TerminalEmbedder, bundle::Manifest)> {
    let (embedder, manifest) = bundle::load(dir)?;
    if global.epsilon.is_none() && global.solver_iters.is_none() && global.solver_tol.is_none() {
        return Ok((embedder, manifest));
    }
    let epsilon = global.epsilon.unwrap_or(embedder.epsilon());
    let solver = solver_config(global, *embedder.solver());
    let points = embedder.points().clone();
    let rebuilt = match (embedder.sketch(), embedder.exact_map()) {
        (Some(pi), _) => TerminalEmbedder::with_sketch(points, pi.clone(), epsilon, solver)?,
        (None, Some(e)) => TerminalEmbedder::from_exact(points, e.clone(), epsilon, solver)?,
        (None, None) => unreachable!("embedder is either sketch or exact"),
    };
    Ok((rebuilt, manifest))
}

fn write_json(path: Option<&Path>, value: &impl Serialize, stdout: &mut dyn Write) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => stdout.write_all(&bytes)?,
    }
    Ok(())
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// Outcome of a successful run: whether every `--assert` held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    AssertionFailed,
}

impl Outcome {
    fn from_results(results: &[AssertionResult]) -> Self {
        if results.iter().all(|r| r.passed) {
            Outcome::Passed
        } else {
            Outcome::AssertionFailed
        }
    }
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Build { points, out, format, mode } => {
            let params = json!({ "points": path_str(points), "format": format, "mode": mode });
            let run = RunConfig::new(g, "build", params);
            let rows = io::read_points(points, format.map(Into::into))?;
            let points = PointSet::new(rows.rows)?;
            let config = BuildConfig {
                epsilon: g.epsilon.unwrap_or(0.25),
                constant: g.constant,
                distribution: g.distribution.into(),
                seed: g.seed,
                mode: match mode {
                    ModeArg::Auto => ModeChoice::Auto,
                    ModeArg::Sketch => ModeChoice::Sketch,
                    ModeArg::Exact => ModeChoice::Exact,
                },
                solver: solver_config(g, SolverConfig::default()),
            };
            let (embedder, plan) = TerminalEmbedder::build(points, &config)?;
            let manifest = bundle::save(out, &embedder, Some(&plan), serde_json::to_value(&run)?)?;
            for pair in &manifest.close_pairs {
                eprintln!("warning: points {} and {} are {:e} apart", pair.i, pair.j, pair.distance);
            }
            let summary = json!({
                "mode": manifest.mode,
                "m": embedder.embedded_dim(),
                "output_dim": manifest.output_dim,
                "plan_m": plan.m,
                "n": manifest.n,
                "d": manifest.d,
            });
            writeln!(stdout, "{summary}")?;
            Ok(Outcome::Passed)
        }

        Command::Query { bundle: dir, queries, out, format } => {
            let params = json!({ "bundle": path_str(dir), "queries": path_str(queries), "format": format });
            let run = RunConfig::new(g, "query", params);
            let (embedder, _) = load_bundle(g, dir)?;
            let in_format = match format {
                Some(f) => PointFormat::from(*f),
                None => PointFormat::from_path(queries)?,
            };
            let rows = io::read_points(queries, Some(in_format))?;
            if let Some(d) = rows.dim {
                if !rows.is_empty() && d != embedder.points().dim() {
                    return Err(Error::dim(embedder.points().dim(), d));
                }
            }
            let results = embedder.embed_batch(&rows.rows)?;
            let outputs = Rows::with_dim(results.iter().map(|q| q.point.clone()).collect(), embedder.output_dim())?;
            io::write_points(out, Some(in_format), &outputs)?;
            let diagnostics: Vec<Value> = results
                .iter()
                .enumerate()
                .map(|(i, q)| {
                    json!({
                        "index": i,
                        "anchor": q.anchor,
                        "radius": q.radius,
                        "residual": q.residual,
                        "iterations": q.iterations,
                        "converged": q.converged,
                        "member": q.member,
                    })
                })
                .collect();
            let max_residual = results.iter().map(|q| q.residual).fold(0.0, f64::max);
            let not_converged = results.iter().filter(|q| !q.converged).count();
            let checks = check_assertions(
                &g.asserts,
                &[("max-residual", max_residual), ("not-converged", not_converged as f64)],
            );
            let sidecar = json!({
                "run": run,
                "output_dim": embedder.output_dim(),
                "query_count": results.len(),
                "max_residual": max_residual,
                "not_converged": not_converged,
                "assertions": checks,
                "queries": diagnostics,
            });
            let mut diag_path = out.clone().into_os_string();
            diag_path.push(".diag.json");
            write_json(Some(Path::new(&diag_path)), &sidecar, stdout)?;
            Ok(Outcome::from_results(&checks))
        }

        Command::VerifyChd { bundle: dir, method, samples, grid_step, refine_iters, report } => {
            let params = json!({
                "bundle": path_str(dir),
                "method": method,
                "samples": samples,
                "grid_step": grid_step,
                "refine_iters": refine_iters,
            });
            let run = RunConfig::new(g, "verify-chd", params);
            let (embedder, _) = load_bundle(g, dir)?;
            let directions = direction_set(embedder.points());
            let chd_seed = seed::derive_seed(g.seed, seed::LABEL_CHD);
            let estimate: Option<ChdEstimate> = match embedder.linear_map() {
                Some(pi) if !directions.is_empty() => Some(match method {
                    ChdMethodArg::Sampled => chd::estimate_sampled(&pi, directions.directions(), *samples, chd_seed)?,
                    ChdMethodArg::Refined => {
                        chd::estimate_refined(&pi, directions.directions(), *samples, chd_seed, *refine_iters)?
                    }
                    ChdMethodArg::Grid => chd::certify_grid(&pi, directions.directions(), *grid_step)?,
                }),
                _ => None,
            };
            let max_violation = estimate.as_ref().map_or(0.0, |e| e.max_violation);
            let mut metrics = vec![("max-violation", max_violation)];
            if let Some(b) = estimate.as_ref().and_then(|e| e.certified_bound) {
                metrics.push(("certified-bound", b));
            }
            let checks = check_assertions(&g.asserts, &metrics);
            let witness: Vec<(usize, f64)> = estimate
                .as_ref()
                .map(|e| e.witness.weights().iter().copied().enumerate().filter(|&(_, w)| w != 0.0).collect())
                .unwrap_or_default();
            let out = json!({
                "max_violation": max_violation,
                "method": estimate.as_ref().map_or(ChdMethod::Sampled, |e| e.method),
                "witness_weights": witness,
                "certified_bound": estimate.as_ref().and_then(|e| e.certified_bound),
                "evaluations": estimate.as_ref().map_or(0, |e| e.evaluations),
                "directions": directions.len(),
                "m": embedder.embedded_dim(),
                "epsilon": embedder.epsilon(),
                "seed": g.seed,
                "chd_seed": chd_seed,
                "assertions": checks,
                "run": run,
            });
            write_json(report.as_deref(), &out, stdout)?;
            Ok(Outcome::from_results(&checks))
        }

        Command::Eval { bundle: dir, queries, samplers, count, baseline, report, raw } => {
            let params = json!({
                "bundle": path_str(dir),
                "queries": queries.as_deref().map(path_str),
                "samplers": samplers,
                "count": count,
                "baseline": baseline,
            });
            let run = RunConfig::new(g, "eval", params);
            let (embedder, manifest) = load_bundle(g, dir)?;
            let batches = match queries {
                Some(path) => {
                    let rows = io::read_points(path, None)?;
                    vec![QueryBatch { label: "file".into(), queries: rows.rows }]
                }
                None => {
                    let list = if samplers.is_empty() {
                        harness::standard_suite()
                    } else {
                        samplers.iter().map(|s| Sampler::parse(s)).collect::<Result<Vec<_>>>()?
                    };
                    harness::sample_suite(embedder.points(), &list, *count, g.seed)?
                }
            };
            let echo = ReportConfig {
                epsilon: embedder.epsilon(),
                m: embedder.embedded_dim(),
                constant: manifest.plan.map(|p| p.constant),
                seed: g.seed,
                map: match baseline {
                    BaselineArg::Terminal => "terminal".into(),
                    BaselineArg::Efn => "efn".into(),
                },
            };
            let evaluation = match baseline {
                BaselineArg::Terminal => harness::evaluate(&embedder, &batches, echo)?,
                BaselineArg::Efn => harness::evaluate(&EfnBaseline::from_embedder(&embedder), &batches, echo)?,
            };
            let r = &evaluation.report;
            let checks = check_assertions(
                &g.asserts,
                &[
                    ("max-deviation", r.ratios.max_abs_deviation),
                    ("distortion", r.ratios.distortion),
                    ("max-ratio", r.ratios.max),
                    ("min-ratio", r.ratios.min),
                    ("max-residual", r.solver.max_residual),
                    ("anchor-error", r.anchor_isometry_error),
                ],
            );
            if let Some(raw) = raw {
                harness::write_raw_csv(std::io::BufWriter::new(fs::File::create(raw)?), &evaluation.pairs)?;
            }
            let out = json!({ "report": r, "assertions": checks, "run": run });
            write_json(report.as_deref(), &out, stdout)?;
            Ok(Outcome::from_results(&checks))
        }

        Command::Scaling { points, epsilons, constants, seeds, chd_samples, count, format, report } => {
            let params = json!({
                "points": path_str(points),
                "epsilons": epsilons,
                "constants": constants,
                "seeds": seeds,
                "chd_samples": chd_samples,
                "count": count,
            });
            let run = RunConfig::new(g, "scaling", params);
            let points = PointSet::new(io::read_points(points, format.map(Into::into))?.rows)?;
            let config = ScalingConfig {
                distribution: g.distribution.into(),
                chd_samples: *chd_samples,
                queries_per_sampler: *count,
                samplers: harness::standard_suite(),
                solver: SolverConfig { step_rule: StepRule::Polyak, ..solver_config(g, SolverConfig::default()) },
            };
            let rows = harness::scaling_study(&points, epsilons, constants, seeds, &config)?;
            let worst = rows.iter().map(|r| r.max_abs_deviation).fold(0.0, f64::max);
            let worst_chd = rows.iter().map(|r| r.chd_violation).fold(0.0, f64::max);
            let checks =
                check_assertions(&g.asserts, &[("max-deviation", worst), ("max-violation", worst_chd)]);
            let out = json!({ "rows": rows, "assertions": checks, "run": run });
            write_json(report.as_deref(), &out, stdout)?;
            Ok(Outcome::from_results(&checks))
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.global.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(|| run(&cli, &mut std::io::stdout().lock())),
            Err(e) => Err(Error::InvalidParameter(format!("cannot start thread pool: {e}"))),
        },
        None => run(&cli, &mut std::io::stdout().lock()),
    };
    match result {
        Ok(Outcome::Passed) => EXIT_OK,
        Ok(Outcome::AssertionFailed) => {
            eprintln!("te: assertion threshold failed");
            EXIT_ASSERT
        }
        Err(e) => {
            eprintln!("te: {e}");
            EXIT_INPUT
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assertion_parsing_and_checks() {
        let a = parse_assertion("max-violation=0.25").unwrap();
        assert_eq!(a, Assertion { key: "max-violation".into(), threshold: 0.25 });
        assert!(parse_assertion("oops").is_err());
        let results = check_assertions(
            &[a, parse_assertion("min-ratio=0.9").unwrap(), parse_assertion("unknown=1").unwrap()],
            &[("max-violation", 0.1), ("min-ratio", 0.95)],
        );
        assert!(results[0].passed && results[1].passed && !results[2].passed);
        assert_eq!(Outcome::from_results(&results), Outcome::AssertionFailed);
    }

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["te", "verify-chd", "--bundle", "b", "--seed", "3", "--assert", "max-violation=0.1"])
            .unwrap();
        assert_eq!(cli.global.seed, 3);
        assert_eq!(cli.global.asserts.len(), 1);
        assert!(Cli::try_parse_from(["te", "build"]).is_err());
    }
}
