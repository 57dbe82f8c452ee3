//! C ABI for `terminal-embed`.
//!
//! Embedders are opaque handles created by [`te_embedder_new`] or
//! [`te_embedder_load`] and released with [`te_embedder_free`]. Every
//! fallible call returns a [`TeStatus`]; on failure the message is available
//! from [`te_last_error_message`] on the same thread. Output buffers are
//! caller-allocated and their length is passed explicitly.
//!
//! Handles may be shared between threads for the read-only calls
//! (`te_embedder_embed*`, `te_embedder_terminal`, the dimension getters).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use terminal_embed::extension::TerminalMap;
use terminal_embed::{
    bundle, BuildConfig, Distribution, Error, ModeChoice, PointSet, SolverConfig, StepRule, TerminalEmbedder,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    DuplicatePoint = 4,
    EmptyInput = 5,
    BufferTooSmall = 6,
    Io = 7,
    Format = 8,
    Panic = 9,
}

/// Values for [`TeConfig::distribution`].
#[repr(C)]
pub enum TeDistribution {
    Rademacher = 0,
    Gaussian = 1,
}

/// Values for [`TeConfig::mode`].
#[repr(C)]
pub enum TeMode {
    Auto = 0,
    Sketch = 1,
    Exact = 2,
}

/// Build parameters. Start from [`te_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TeConfig {
    pub epsilon: f64,
    pub constant: f64,
    /// A [`TeDistribution`] value.
    pub distribution: u32,
    /// A [`TeMode`] value.
    pub mode: u32,
    pub seed: u64,
    pub solver_max_iters: usize,
    pub solver_tol: f64,
}

/// Per-query solver diagnostics.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TeDiagnostics {
    pub anchor: usize,
    pub radius: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub member: bool,
}

/// Opaque embedder handle.
pub struct TeEmbedder {
    inner: TerminalEmbedder,
    plan: Option<terminal_embed::DimensionPlan>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TeStatus {
    match e {
        Error::EmptyInput => TeStatus::EmptyInput,
        Error::DimensionMismatch { .. } => TeStatus::DimensionMismatch,
        Error::DuplicatePoint { .. } => TeStatus::DuplicatePoint,
        Error::Io(_) => TeStatus::Io,
        Error::Format { .. } | Error::Json(_) => TeStatus::Format,
        _ => TeStatus::InvalidArgument,
    }
}

fn fail(status: TeStatus, msg: impl Into<String>) -> TeStatus {
    set_last_error(msg.into());
    status
}

/// Runs `body`, converting errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), TeStatus>) -> TeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TeStatus::Ok,
        Ok(Err(status)) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(TeStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, TeStatus>;
}

impl<T> OrStatus<T> for terminal_embed::Result<T> {
    fn or_status(self) -> Result<T, TeStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn embedder_ref<'a>(e: *const TeEmbedder) -> Result<&'a TeEmbedder, TeStatus> {
    e.as_ref().ok_or_else(|| fail(TeStatus::NullPointer, "embedder handle is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], TeStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(TeStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], TeStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(TeStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, TeStatus> {
    if p.is_null() {
        return Err(fail(TeStatus::NullPointer, "path is null"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TeStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(Path::new(s))
}

fn diagnostics(q: &terminal_embed::EmbeddedQuery) -> TeDiagnostics {
    TeDiagnostics {
        anchor: q.anchor,
        radius: q.radius,
        residual: q.residual,
        iterations: q.iterations,
        converged: q.converged,
        member: q.member,
    }
}

fn build_config(cfg: &TeConfig) -> Result<BuildConfig, TeStatus> {
    let distribution = match cfg.distribution {
        0 => Distribution::Rademacher,
        1 => Distribution::Gaussian,
        v => return Err(fail(TeStatus::InvalidArgument, format!("unknown distribution {v}"))),
    };
    let mode = match cfg.mode {
        0 => ModeChoice::Auto,
        1 => ModeChoice::Sketch,
        2 => ModeChoice::Exact,
        v => return Err(fail(TeStatus::InvalidArgument, format!("unknown mode {v}"))),
    };
    Ok(BuildConfig {
        epsilon: cfg.epsilon,
        constant: cfg.constant,
        distribution,
        seed: cfg.seed,
        mode,
        solver: SolverConfig { max_iters: cfg.solver_max_iters, tol: cfg.solver_tol, step_rule: StepRule::Polyak },
    })
}

/// Default build parameters (epsilon 0.25, C 4, Rademacher, auto mode, seed 0).
#[no_mangle]
pub extern "C" fn te_config_default() -> TeConfig {
    let d = BuildConfig::default();
    TeConfig {
        epsilon: d.epsilon,
        constant: d.constant,
        distribution: TeDistribution::Rademacher as u32,
        mode: TeMode::Auto as u32,
        seed: d.seed,
        solver_max_iters: d.solver.max_iters,
        solver_tol: d.solver.tol,
    }
}

/// Builds an embedder over `n` points of dimension `d` stored row-major in
/// `points`. `cfg` may be null for defaults. On success `*out` owns a new handle.
///
/// # Safety
/// `points` must reference `n * d` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn te_embedder_new(
    points: *const f64,
    n: usize,
    d: usize,
    cfg: *const TeConfig,
    out: *mut *mut TeEmbedder,
) -> TeStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(TeStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        if n == 0 {
            return Err(fail(TeStatus::EmptyInput, "no points"));
        }
        if d == 0 {
            return Err(fail(TeStatus::InvalidArgument, "dimension must be >= 1"));
        }
        let len = n.checked_mul(d).ok_or_else(|| fail(TeStatus::InvalidArgument, "n * d overflows"))?;
        let flat = slice(points, len, "points")?;
        let config = match cfg.as_ref() {
            Some(c) => build_config(c)?,
            None => BuildConfig::default(),
        };
        let set = PointSet::new(flat.chunks_exact(d).map(<[f64]>::to_vec).collect()).or_status()?;
        let (inner, plan) = TerminalEmbedder::build(set, &config).or_status()?;
        *out = Box::into_raw(Box::new(TeEmbedder { inner, plan: Some(plan) }));
        Ok(())
    })
}

/// Loads a bundle directory written by [`te_embedder_save`] or `te build`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn te_embedder_load(path: *const c_char, out: *mut *mut TeEmbedder) -> TeStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(TeStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        let dir = path_arg(path)?;
        let (inner, manifest) = bundle::load(dir).or_status()?;
        *out = Box::into_raw(Box::new(TeEmbedder { inner, plan: manifest.plan }));
        Ok(())
    })
}

/// Writes the embedder as a bundle directory.
///
/// # Safety
/// `e` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn te_embedder_save(e: *const TeEmbedder, path: *const c_char) -> TeStatus {
    guard(|| {
        let e = embedder_ref(e)?;
        let dir = path_arg(path)?;
        bundle::save(dir, &e.inner, e.plan.as_ref(), serde_json::Value::Null).or_status()?;
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `e` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn te_embedder_free(e: *mut TeEmbedder) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Dimension of the input space, 0 for a null handle.
///
/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn te_embedder_input_dim(e: *const TeEmbedder) -> usize {
    e.as_ref().map_or(0, |e| e.inner.points().dim())
}

/// Length of every embedded vector, 0 for a null handle.
///
/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn te_embedder_output_dim(e: *const TeEmbedder) -> usize {
    e.as_ref().map_or(0, |e| e.inner.output_dim())
}

/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn te_embedder_num_points(e: *const TeEmbedder) -> usize {
    e.as_ref().map_or(0, |e| e.inner.points().len())
}

/// Whether the handle uses the exact small-n embedding instead of a sketch.
///
/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn te_embedder_is_exact(e: *const TeEmbedder) -> bool {
    e.as_ref().is_some_and(|e| e.inner.is_exact())
}

/// Embeds one query `u` of length `d` into `out` (length `out_len`, at least
/// the output dimension). `diag` may be null.
///
/// # Safety
/// Pointers must reference buffers of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn te_embedder_embed(
    e: *const TeEmbedder,
    u: *const f64,
    d: usize,
    out: *mut f64,
    out_len: usize,
    diag: *mut TeDiagnostics,
) -> TeStatus {
    guard(|| {
        let e = embedder_ref(e)?;
        let q = slice(u, d, "query")?;
        let width = e.inner.output_dim();
        if out_len < width {
            return Err(fail(TeStatus::BufferTooSmall, format!("output needs {width} doubles, got {out_len}")));
        }
        let dst = slice_mut(out, width, "out")?;
        let result = e.inner.embed_query(q).or_status()?;
        dst.copy_from_slice(&result.point);
        if let Some(slot) = diag.as_mut() {
            *slot = diagnostics(&result);
        }
        Ok(())
    })
}

/// Embeds `count` row-major queries of dimension `d`. `out` receives
/// `count * output_dim` doubles; `diags` may be null or hold `count` entries.
///
/// # Safety
/// Pointers must reference buffers of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn te_embedder_embed_batch(
    e: *const TeEmbedder,
    queries: *const f64,
    count: usize,
    d: usize,
    out: *mut f64,
    out_len: usize,
    diags: *mut TeDiagnostics,
) -> TeStatus {
    guard(|| {
        let e = embedder_ref(e)?;
        if count == 0 {
            return Ok(());
        }
        if d != e.inner.points().dim() {
            return Err(fail(
                TeStatus::DimensionMismatch,
                format!("dimension mismatch: expected {}, found {d}", e.inner.points().dim()),
            ));
        }
        let len = count.checked_mul(d).ok_or_else(|| fail(TeStatus::InvalidArgument, "count * d overflows"))?;
        let flat = slice(queries, len, "queries")?;
        let width = e.inner.output_dim();
        let need = count * width;
        if out_len < need {
            return Err(fail(TeStatus::BufferTooSmall, format!("output needs {need} doubles, got {out_len}")));
        }
        let dst = slice_mut(out, need, "out")?;
        let rows: Vec<Vec<f64>> = flat.chunks_exact(d).map(<[f64]>::to_vec).collect();
        let results = e.inner.embed_batch(&rows).or_status()?;
        for (chunk, r) in dst.chunks_exact_mut(width).zip(&results) {
            chunk.copy_from_slice(&r.point);
        }
        if !diags.is_null() {
            let slots = std::slice::from_raw_parts_mut(diags, count);
            for (slot, r) in slots.iter_mut().zip(&results) {
                *slot = diagnostics(r);
            }
        }
        Ok(())
    })
}

/// Writes the image of terminal `i` (length output_dim) into `out`.
///
/// # Safety
/// `out` must reference `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn te_embedder_terminal(
    e: *const TeEmbedder,
    i: usize,
    out: *mut f64,
    out_len: usize,
) -> TeStatus {
    guard(|| {
        let e = embedder_ref(e)?;
        let n = e.inner.points().len();
        if i >= n {
            return Err(fail(TeStatus::InvalidArgument, format!("terminal index {i} out of range (n = {n})")));
        }
        let width = e.inner.output_dim();
        if out_len < width {
            return Err(fail(TeStatus::BufferTooSmall, format!("output needs {width} doubles, got {out_len}")));
        }
        slice_mut(out, width, "out")?.copy_from_slice(&e.inner.terminal_image(i));
        Ok(())
    })
}

/// Message for the last failure on this thread, or null if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn te_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn te_status_str(status: i32) -> *const c_char {
    let s: &'static CStr = match status {
        0 => c"ok",
        1 => c"null pointer",
        2 => c"invalid argument",
        3 => c"dimension mismatch",
        4 => c"duplicate point",
        5 => c"empty input",
        6 => c"buffer too small",
        7 => c"i/o error",
        8 => c"malformed file",
        9 => c"internal panic",
        _ => c"unknown status",
    };
    s.as_ptr()
}
