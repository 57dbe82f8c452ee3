//! On-disk embedder bundle: a directory holding
//!
//! * `manifest.json`: mode, shapes, solver settings, plan and config echo
//! * `points.bin`: the terminal set (TEPT)
//! * `sketch.tesk`: the sketch matrix (sketch mode), or
//!   `basis.bin`: the orthonormal basis rows (exact mode, TEPT)
//! * `embedded.bin`: terminal images with their trailing zero (TEPT)
//!
//! Every file is a pure function of its inputs, so rebuilding with the same
//! configuration reproduces the bundle byte for byte.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::ExactEmbedding;
use crate::extension::{SolverConfig, TerminalEmbedder, TerminalMap};
use crate::geometry::{ClosePair, PointSet};
use crate::io::{self, PointFormat, Rows};
use crate::sketch::{DimensionPlan, PlanMode, SketchMatrix};

pub const BUNDLE_FORMAT: &str = "terminal-embed-bundle";
pub const BUNDLE_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const POINTS_FILE: &str = "points.bin";
pub const SKETCH_FILE: &str = "sketch.tesk";
pub const BASIS_FILE: &str = "basis.bin";
pub const EMBEDDED_FILE: &str = "embedded.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub mode: PlanMode,
    pub n: usize,
    pub d: usize,
    pub output_dim: usize,
    pub epsilon: f64,
    pub solver: SolverConfig,
    pub plan: Option<DimensionPlan>,
    pub close_pairs: Vec<ClosePair>,
    /// Free-form echo of the configuration that produced the bundle.
    pub config: serde_json::Value,
}

pub fn save(
    dir: &Path,
    embedder: &TerminalEmbedder,
    plan: Option<&DimensionPlan>,
    config: serde_json::Value,
) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let points = embedder.points();
    let mode = if embedder.is_exact() { PlanMode::ExactSmall } else { PlanMode::Sketch };
    let manifest = Manifest {
        format: BUNDLE_FORMAT.into(),
        version: BUNDLE_VERSION,
        mode,
        n: points.len(),
        d: points.dim(),
        output_dim: embedder.output_dim(),
        epsilon: embedder.epsilon(),
        solver: *embedder.solver(),
        plan: plan.copied(),
        close_pairs: points.close_pairs(),
        config,
    };
    io::write_points(&dir.join(POINTS_FILE), Some(PointFormat::Binary), &Rows::new(points.points().to_vec())?)?;
    match (embedder.sketch(), embedder.exact_map()) {
        (Some(pi), _) => {
            let file = BufWriter::new(fs::File::create(dir.join(SKETCH_FILE))?);
            pi.write_to(file, plan.map(|p| p.constant))?;
        }
        (None, Some(exact)) => {
            let basis = Rows::with_dim(exact.basis().to_vec(), exact.input_dim())?;
            io::write_points(&dir.join(BASIS_FILE), Some(PointFormat::Binary), &basis)?;
        }
        (None, None) => unreachable!("embedder is either sketch or exact"),
    }
    let images: Vec<Vec<f64>> = (0..points.len()).map(|i| embedder.terminal_image(i)).collect();
    io::write_points(&dir.join(EMBEDDED_FILE), Some(PointFormat::Binary), &Rows::new(images)?)?;

    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    let mut f = fs::File::create(dir.join(MANIFEST_FILE))?;
    f.write_all(&json)?;
    Ok(manifest)
}

pub fn load(dir: &Path) -> Result<(TerminalEmbedder, Manifest)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: Manifest = serde_json::from_reader(BufReader::new(fs::File::open(&manifest_path)?))
        .map_err(|e| Error::format(manifest_path.display().to_string(), e.to_string()))?;
    if manifest.format != BUNDLE_FORMAT || manifest.version != BUNDLE_VERSION {
        return Err(Error::format(
            manifest_path.display().to_string(),
            format!("unsupported bundle {} v{}", manifest.format, manifest.version),
        ));
    }
    let points = PointSet::new(io::read_points(&dir.join(POINTS_FILE), Some(PointFormat::Binary))?.rows)?;
    if points.len() != manifest.n || points.dim() != manifest.d {
        return Err(Error::format(dir.display().to_string(), "points.bin does not match the manifest shape"));
    }
    let embedder = match manifest.mode {
        PlanMode::Sketch => {
            let path = dir.join(SKETCH_FILE);
            let reader = BufReader::new(fs::File::open(&path)?);
            let (pi, _) = SketchMatrix::read_from(reader, &path.display().to_string())?;
            TerminalEmbedder::with_sketch(points, pi, manifest.epsilon, manifest.solver)?
        }
        PlanMode::ExactSmall => {
            let basis = io::read_points(&dir.join(BASIS_FILE), Some(PointFormat::Binary))?;
            let exact = ExactEmbedding::from_parts(points.point(0).to_vec(), basis.rows)?;
            TerminalEmbedder::from_exact(points, exact, manifest.epsilon, manifest.solver)?
        }
    };
    if embedder.output_dim() != manifest.output_dim {
        return Err(Error::format(dir.display().to_string(), "output dimension does not match the manifest"));
    }
    Ok((embedder, manifest))
}
