//! C ABI over the `cellfree-rpca` simulator.
//!
//! Every fallible function returns a [`CfStatus`]; on failure the message is
//! available from [`cf_last_error`] on the same thread until the next call.
//! Handles are opaque and must be released with their `_free` function.
//! Matrices cross the boundary as separate real and imaginary arrays in
//! column-major order.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use cellfree_rpca::channel_model::{AngularSupport, DftBasis};
use cellfree_rpca::linalg::CMatrix;
use cellfree_rpca::pilot_hopping::mols_family;
use cellfree_rpca::sim::{run_experiment, summarize, write_results, ExperimentConfig, ExperimentResults, Summary};
use cellfree_rpca::subspace_rpca::{outlier_pursuit, power_efficiency, Scheme, SolverParams, SubspaceEstimate};
use cellfree_rpca::uplink_receiver::EstimatorKind;
use cellfree_rpca::Error;
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    NonFinite = 5,
    BufferTooSmall = 6,
    NoData = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfKind {
    Ideal = 0,
    Sp = 1,
    Pp = 2,
    Pm = 3,
}

impl From<CfKind> for EstimatorKind {
    fn from(k: CfKind) -> Self {
        match k {
            CfKind::Ideal => EstimatorKind::Ideal,
            CfKind::Sp => EstimatorKind::Sp,
            CfKind::Pp => EstimatorKind::Pp,
            CfKind::Pm => EstimatorKind::Pm,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfScheme {
    ProximalGradient = 0,
    Admm = 1,
}

/// Solver settings for [`cf_outlier_pursuit`]; start from [`cf_solver_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CfSolverParams {
    pub scheme: CfScheme,
    pub max_iter: usize,
    pub tol: f64,
}

/// Opaque experiment configuration.
pub struct CfConfig {
    inner: ExperimentConfig,
}

/// Opaque results of one experiment run.
pub struct CfResults {
    inner: ExperimentResults,
    summary: Summary,
}

struct Failure {
    status: CfStatus,
    message: String,
}

impl Failure {
    fn new(status: CfStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) => CfStatus::InvalidArgument,
            Error::Config(_) | Error::Parse { .. } => CfStatus::Config,
            Error::NonFinite => CfStatus::NonFinite,
            Error::Io { .. } | Error::Csv { .. } => CfStatus::Io,
        };
        Self::new(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: Option<String>) {
    let c = message.map(|m| CString::new(m.replace('\0', " ")).unwrap_or_default());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> CfStatus {
    set_last_error(None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CfStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(Some(fail.message));
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(Some(format!("panic: {msg}")));
            CfStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> FfiResult<()> {
    if p.is_null() {
        Err(Failure::new(CfStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(CfStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn read_slice<'a, T>(p: *const T, len: usize, name: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write_slice<'a, T>(p: *mut T, len: usize, name: &str) -> FfiResult<&'a mut [T]> {
    if len == 0 {
        return Ok(&mut []);
    }
    non_null(p, name)?;
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, name: &str) -> FfiResult<()> {
    non_null(out, name)?;
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null.
///
/// The pointer stays valid until the next `cf_*` call on the same thread.
#[no_mangle]
pub extern "C" fn cf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// A configuration holding the default parameters.
#[no_mangle]
pub extern "C" fn cf_config_default() -> *mut CfConfig {
    Box::into_raw(Box::new(CfConfig { inner: ExperimentConfig::default() }))
}

/// Loads and validates a TOML (or `.json`) configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cf_config_load(path: *const c_char, out: *mut *mut CfConfig) -> CfStatus {
    guard(|| {
        non_null(out, "out")?;
        let cfg = ExperimentConfig::load(Path::new(read_str(path, "path")?))?;
        put(out, Box::into_raw(Box::new(CfConfig { inner: cfg })), "out")
    })
}

fn canonical_key(key: &str) -> &str {
    match key {
        "L" => "rus",
        "M" => "antennas",
        "K" => "ues",
        "N" => "hopping_order",
        "S" => "srs_slots",
        "Q" => "max_cluster",
        "T" => "coherence",
        other => other,
    }
}

fn set_key(cfg: &ExperimentConfig, key: &str, value: &str) -> FfiResult<ExperimentConfig> {
    let cfg_err = |e: String| Failure::new(CfStatus::Config, e);
    let mut table: toml::Table = toml::from_str(&cfg.to_toml()?).map_err(|e| cfg_err(e.to_string()))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .map_err(|e| cfg_err(format!("value for {key} is not a TOML literal: {e}")))?
        .remove("v")
        .ok_or_else(|| cfg_err(format!("empty value for {key}")))?;

    let mut parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(cfg_err(format!("malformed key {key:?}")));
    }
    parts[0] = canonical_key(parts[0]);
    let (last, path) = parts.split_last().expect("key has at least one part");
    let mut node = &mut table;
    for part in path {
        node = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Table::new().into())
            .as_table_mut()
            .ok_or_else(|| cfg_err(format!("{part} is not a table")))?;
    }
    node.insert(last.to_string(), value);

    let text = toml::to_string(&table).map_err(|e| cfg_err(e.to_string()))?;
    let next = ExperimentConfig::from_toml(&text)?;
    next.validate()?;
    Ok(next)
}

/// Sets one field from a TOML literal, e.g. `("N", "29")`, `("kinds", "[\"ideal\"]")`
/// or `("solver.max_iter", "200")`. The configuration is unchanged on failure.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cf_config_set(cfg: *mut CfConfig, key: *const c_char, value: *const c_char) -> CfStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        let next = set_key(&(*cfg).inner, read_str(key, "key")?, read_str(value, "value")?)?;
        (*cfg).inner = next;
        Ok(())
    })
}

/// Writes the resolved configuration as TOML into `buf`.
///
/// `out_len` receives the text length without the terminator. When `cap` is
/// not larger than that, nothing is written and `CF_STATUS_BUFFER_TOO_SMALL`
/// is returned, so a null `buf` with `cap = 0` queries the size.
///
/// # Safety
/// `cfg` must come from this library and `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn cf_config_to_toml(cfg: *const CfConfig, buf: *mut c_char, cap: usize, out_len: *mut usize) -> CfStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        let text = (*cfg).inner.to_toml()?;
        put(out_len, text.len(), "out_len")?;
        if cap <= text.len() {
            return Err(Failure::new(CfStatus::BufferTooSmall, format!("need {} bytes", text.len() + 1)));
        }
        let dst = write_slice(buf.cast::<u8>(), cap, "buf")?;
        dst[..text.len()].copy_from_slice(text.as_bytes());
        dst[text.len()] = 0;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library or be null; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cf_config_free(cfg: *mut CfConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the full experiment described by `cfg`.
///
/// # Safety
/// `cfg` must come from this library and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_run(cfg: *const CfConfig, out: *mut *mut CfResults) -> CfStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        non_null(out, "out")?;
        let results = run_experiment(&(*cfg).inner)?;
        let c = &results.config;
        let summary = summarize(&c.kinds, &results.rate_records(), &results.edge_records(), results.unserved_count(), c.layouts);
        put(out, Box::into_raw(Box::new(CfResults { inner: results, summary })), "out")
    })
}

/// # Safety
/// `res` must come from this library or be null; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cf_results_free(res: *mut CfResults) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Copies the per-UE spectral efficiencies of `kind` (served UEs, layout order).
///
/// `out_len` receives the record count; `CF_STATUS_BUFFER_TOO_SMALL` is
/// returned without copying when `cap` is smaller.
///
/// # Safety
/// `res` must come from this library and `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn cf_results_se(res: *const CfResults, kind: CfKind, buf: *mut f64, cap: usize, out_len: *mut usize) -> CfStatus {
    guard(|| {
        non_null(res, "res")?;
        let kind = EstimatorKind::from(kind);
        let se: Vec<f64> = (*res).inner.rate_records().into_iter().filter(|r| r.kind == kind).map(|r| r.se).collect();
        put(out_len, se.len(), "out_len")?;
        if cap < se.len() {
            return Err(Failure::new(CfStatus::BufferTooSmall, format!("need room for {} values", se.len())));
        }
        write_slice(buf, se.len(), "buf")?.copy_from_slice(&se);
        Ok(())
    })
}

/// Median spectral efficiency of `kind`; `CF_STATUS_NO_DATA` when the kind was not simulated.
///
/// # Safety
/// `res` must come from this library and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_results_median_se(res: *const CfResults, kind: CfKind, out: *mut f64) -> CfStatus {
    guard(|| {
        non_null(res, "res")?;
        let kind = EstimatorKind::from(kind);
        let median = (*res).summary.kinds.get(kind.as_str()).and_then(|k| k.median_se);
        let median = median.ok_or_else(|| Failure::new(CfStatus::NoData, format!("no {kind} records")))?;
        put(out, median, "out")
    })
}

/// Mean power efficiency over all edges, of the DFT-projected estimates when
/// `projected` is true and of the raw ones otherwise.
///
/// # Safety
/// `res` must come from this library and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_results_mean_pe(res: *const CfResults, projected: bool, out: *mut f64) -> CfStatus {
    guard(|| {
        non_null(res, "res")?;
        let s = &(*res).summary;
        let pe = if projected { s.mean_pe_pp } else { s.mean_pe_raw };
        put(out, pe.ok_or_else(|| Failure::new(CfStatus::NoData, "no subspace estimates were computed"))?, "out")
    })
}

/// Number of UEs left without any serving RU, summed over layouts.
///
/// # Safety
/// `res` must come from this library and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cf_results_unserved(res: *const CfResults, out: *mut usize) -> CfStatus {
    guard(|| {
        non_null(res, "res")?;
        put(out, (*res).summary.unserved_ues, "out")
    })
}

/// Writes the CSV, JSON and TOML result files into `dir`.
///
/// # Safety
/// `res` must come from this library and `dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cf_results_write(res: *const CfResults, dir: *const c_char) -> CfStatus {
    guard(|| {
        non_null(res, "res")?;
        write_results(&(*res).inner, Path::new(read_str(dir, "dir")?))?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn cf_solver_params_default() -> CfSolverParams {
    let d = SolverParams::default();
    CfSolverParams { scheme: CfScheme::ProximalGradient, max_iter: d.max_iter, tol: d.tol }
}

/// Solves the outlier-pursuit program on a `rows x cols` matrix `Y = H + E`.
///
/// Inputs and outputs are column-major arrays of `rows * cols` doubles.
/// `params` may be null for the defaults; `out_iterations` and
/// `out_converged` may be null.
///
/// # Safety
/// All non-null pointers must be valid for `rows * cols` elements.
#[no_mangle]
pub unsafe extern "C" fn cf_outlier_pursuit(
    y_re: *const f64,
    y_im: *const f64,
    rows: usize,
    cols: usize,
    lambda: f64,
    params: *const CfSolverParams,
    h_re: *mut f64,
    h_im: *mut f64,
    e_re: *mut f64,
    e_im: *mut f64,
    out_iterations: *mut usize,
    out_converged: *mut bool,
) -> CfStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::new(CfStatus::InvalidArgument, "matrix must be non-empty"))?;
        let (re, im) = (read_slice(y_re, len, "y_re")?, read_slice(y_im, len, "y_im")?);
        let y = CMatrix::from_iterator(rows, cols, re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)));

        let mut solver = SolverParams::default();
        if !params.is_null() {
            let p = *params;
            solver.scheme = match p.scheme {
                CfScheme::ProximalGradient => Scheme::ProximalGradient,
                CfScheme::Admm => Scheme::Admm,
            };
            solver.max_iter = p.max_iter;
            solver.tol = p.tol;
            solver.validate()?;
        }
        let result = outlier_pursuit(&y, lambda, &solver)?;

        for (m, dst_re, dst_im, name) in [(&result.h, h_re, h_im, "h"), (&result.e, e_re, e_im, "e")] {
            let (r, i) = (write_slice(dst_re, len, name)?, write_slice(dst_im, len, name)?);
            for (j, z) in m.iter().enumerate() {
                r[j] = z.re;
                i[j] = z.im;
            }
        }
        if !out_iterations.is_null() {
            out_iterations.write(result.iterations);
        }
        if !out_converged.is_null() {
            out_converged.write(result.converged);
        }
        Ok(())
    })
}

/// Power efficiency of the DFT-column estimate `estimate` against the true
/// angular support `support`, both index sets into the `m`-point DFT grid.
///
/// # Safety
/// `support` and `estimate` must hold `support_len` and `estimate_len` indices.
#[no_mangle]
pub unsafe extern "C" fn cf_power_efficiency(
    m: usize,
    support: *const usize,
    support_len: usize,
    estimate: *const usize,
    estimate_len: usize,
    out: *mut f64,
) -> CfStatus {
    guard(|| {
        let (s, e) = (read_slice(support, support_len, "support")?, read_slice(estimate, estimate_len, "estimate")?);
        if m == 0 || s.is_empty() || e.is_empty() || s.iter().chain(e).any(|&i| i >= m) {
            return Err(Failure::new(CfStatus::InvalidArgument, format!("index sets must be non-empty subsets of 0..{m}")));
        }
        let mut est_idx = e.to_vec();
        est_idx.sort_unstable();
        est_idx.dedup();
        let dft = DftBasis::new(m);
        let estimate = SubspaceEstimate::from_dft(&dft, est_idx);
        put(out, power_efficiency(&dft, &AngularSupport::from_indices(s.to_vec()), 1.0, &estimate), "out")
    })
}

/// Writes square `t` (1-based, `1 <= t < n`) of the order-`n` family into
/// `out` as `n * n` row-major symbols in `1..=n`.
///
/// # Safety
/// `out` must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn cf_mols_square(n: usize, t: usize, out: *mut u32, cap: usize) -> CfStatus {
    guard(|| {
        let family = mols_family(n)?;
        let square = t
            .checked_sub(1)
            .and_then(|i| family.get(i))
            .ok_or_else(|| Failure::new(CfStatus::InvalidArgument, format!("square index must lie in 1..{n} (got {t})")))?;
        if cap < n * n {
            return Err(Failure::new(CfStatus::BufferTooSmall, format!("need room for {} symbols", n * n)));
        }
        let dst = write_slice(out, n * n, "out")?;
        for (slot, v) in dst.iter_mut().zip(square.rows().concat()) {
            *slot = v as u32;
        }
        Ok(())
    })
}
