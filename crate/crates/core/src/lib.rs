//! Terminal dimensionality reduction.
//!
//! A finite point set `X` in `R^d` is sketched into `R^m` with
//! `m = O(eps^-2 log n)`. Any query `u` is then mapped to `R^{m+1}` so that
//! every distance `|u - x|`, `x in X`, is preserved up to `1 +- O(eps)`; the
//! points of `X` themselves map to `(Pi x, 0)`.
//!
//! Module map:
//! * [`geometry`]: point sets, nearest terminal, direction set
//! * [`sketch`]: dimension planning and subgaussian sketch matrices
//! * [`exact`]: zero-distortion embedding for small point sets
//! * [`chd`]: convex hull distortion estimators
//! * [`extension`]: query-time solver, lift and baselines
//! * [`harness`]: query samplers and distortion reports
//! * [`bundle`] / [`cli`]: on-disk artifacts and the `te` command line

pub mod bundle;
pub mod chd;
pub mod cli;
pub mod error;
pub mod exact;
pub mod extension;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod seed;
pub mod sketch;

pub use error::{Error, Result};
pub use extension::{
    efn_extend, BuildConfig, EfnBaseline, EmbeddedQuery, ExtensionSolution, ModeChoice, SolverConfig, StepRule,
    TerminalEmbedder, TerminalMap,
};
pub use geometry::{direction_set, nearest_point, DirectionSet, PointSet};
pub use sketch::{apply_sketch, generate_sketch, plan_dimension, DimensionPlan, Distribution, PlanMode, SketchMatrix};
