//! C ABI over the `driftcl` core.
//!
//! Every fallible call returns a [`DriftclStatus`]; on failure the message is
//! available from [`driftcl_last_error_message`] on the same thread. Buffers
//! are opaque handles created with [`driftcl_buffer_new`] and released with
//! [`driftcl_buffer_free`]. Strings returned to the caller must be released
//! with [`driftcl_string_free`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use driftcl::cli::{parse_config, run_experiment};
use driftcl::drift::{ks_p_value, ks_statistic, predictive_entropy};
use driftcl::memory::MemoryBuffer;
use driftcl::metrics::eta_align;
use driftcl::nnet::FlatGradient;
use driftcl::streams::Sample;
use driftcl::Error;

/// Result of every fallible call. Codes 2 to 8 match the process exit codes
/// of the `driftcl` command line tool.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftclStatus {
    Ok = 0,
    Config = 2,
    InvalidInput = 3,
    Format = 4,
    Io = 5,
    InsufficientData = 6,
    IncompatibleRuns = 7,
    Verification = 8,
    NullPointer = 20,
    InvalidUtf8 = 21,
    Panic = 22,
}

impl From<&Error> for DriftclStatus {
    fn from(e: &Error) -> Self {
        match e.exit_code() {
            2 => DriftclStatus::Config,
            3 => DriftclStatus::InvalidInput,
            4 => DriftclStatus::Format,
            5 => DriftclStatus::Io,
            6 => DriftclStatus::InsufficientData,
            7 => DriftclStatus::IncompatibleRuns,
            _ => DriftclStatus::Verification,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: DriftclStatus, msg: impl Into<String>) -> DriftclStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F>(f: F) -> DriftclStatus
where
    F: FnOnce() -> Result<(), DriftclStatus>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DriftclStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(DriftclStatus::Panic, "internal panic"),
    }
}

fn core<T>(r: driftcl::Result<T>) -> Result<T, DriftclStatus> {
    r.map_err(|e| fail(DriftclStatus::from(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), DriftclStatus> {
    if p.is_null() {
        Err(fail(DriftclStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Borrows `len` elements; a zero length accepts a null pointer.
unsafe fn view<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], DriftclStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn driftcl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn driftcl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// Statistics

/// Two-sample Kolmogorov-Smirnov statistic.
///
/// # Safety
/// `a` and `b` must point to `na` and `nb` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn driftcl_ks_statistic(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    out: *mut f64,
) -> DriftclStatus {
    guard(|| {
        non_null(out, "out")?;
        let d = core(ks_statistic(view(a, na, "a")?, view(b, nb, "b")?))?;
        *out = d;
        Ok(())
    })
}

/// Asymptotic KS p-value for statistic `d` and sample sizes `n1`, `n2`.
#[no_mangle]
pub extern "C" fn driftcl_ks_p_value(d: f64, n1: usize, n2: usize) -> f64 {
    ks_p_value(d, n1, n2)
}

/// Entropy in nats of `softmax(logits)`.
///
/// # Safety
/// `logits` must point to `k` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn driftcl_predictive_entropy(logits: *const f64, k: usize, out: *mut f64) -> DriftclStatus {
    guard(|| {
        non_null(out, "out")?;
        if k == 0 {
            return Err(fail(DriftclStatus::InvalidInput, "entropy of zero logits"));
        }
        *out = predictive_entropy(view(logits, k, "logits")?);
        Ok(())
    })
}

/// Alignment efficiency of `(1 + alpha) g_new + (1 - alpha) g_old` with
/// `g_new`. Zero-norm inputs yield `DRIFTCL_STATUS_INSUFFICIENT_DATA`.
///
/// # Safety
/// `g_old` and `g_new` must point to `len` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn driftcl_eta_align(
    g_old: *const f64,
    g_new: *const f64,
    len: usize,
    alpha: f64,
    out: *mut f64,
) -> DriftclStatus {
    guard(|| {
        non_null(out, "out")?;
        let old = FlatGradient(view(g_old, len, "g_old")?.to_vec());
        let new = FlatGradient(view(g_new, len, "g_new")?.to_vec());
        *out = core(eta_align(&old, &new, alpha))?;
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Replay buffer

/// Opaque replay buffer handle.
pub struct DriftclBuffer {
    inner: MemoryBuffer,
    dim: usize,
    /// Slots freed by the last flush of each class, awaiting a resample.
    freed: BTreeMap<usize, Vec<usize>>,
}

/// Creates a reservoir buffer of `capacity` slots holding `dim`-dimensional
/// samples.
///
/// # Safety
/// `out` must be writable; on success it receives a handle to release with
/// `driftcl_buffer_free`.
#[no_mangle]
pub unsafe extern "C" fn driftcl_buffer_new(
    capacity: usize,
    dim: usize,
    seed: u64,
    out: *mut *mut DriftclBuffer,
) -> DriftclStatus {
    guard(|| {
        non_null(out, "out")?;
        let inner = core(MemoryBuffer::new(capacity, seed))?;
        *out = Box::into_raw(Box::new(DriftclBuffer {
            inner,
            dim,
            freed: BTreeMap::new(),
        }));
        Ok(())
    })
}

/// Releases a buffer. Null is ignored.
///
/// # Safety
/// `buffer` must come from `driftcl_buffer_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn driftcl_buffer_free(buffer: *mut DriftclBuffer) {
    if !buffer.is_null() {
        drop(Box::from_raw(buffer));
    }
}

unsafe fn handle<'a>(buffer: *mut DriftclBuffer) -> Result<&'a mut DriftclBuffer, DriftclStatus> {
    non_null(buffer, "buffer")?;
    Ok(&mut *buffer)
}

unsafe fn samples(
    features: *const f64,
    ids: *const u64,
    n: usize,
    dim: usize,
    label: usize,
    version: u32,
) -> Result<Vec<Sample>, DriftclStatus> {
    let x = view(features, n * dim, "features")?;
    let ids = view(ids, n, "ids")?;
    Ok(ids
        .iter()
        .zip(x.chunks_exact(dim.max(1)))
        .map(|(&id, f)| Sample::new(id, if dim == 0 { Vec::new() } else { f.to_vec() }, label, version))
        .collect())
}

/// Offers one sample to the reservoir. `out_slot` receives the slot written,
/// or -1 when the sample was not kept.
///
/// # Safety
/// `features` must point to `dim` readable doubles (the buffer's dimension);
/// `out_slot` must be writable.
#[no_mangle]
pub unsafe extern "C" fn driftcl_buffer_offer(
    buffer: *mut DriftclBuffer,
    id: u64,
    features: *const f64,
    label: usize,
    drift_version: u32,
    out_slot: *mut i64,
) -> DriftclStatus {
    guard(|| {
        let b = handle(buffer)?;
        non_null(out_slot, "out_slot")?;
        let s = samples(features, &id, 1, b.dim, label, drift_version)?.pop().unwrap();
        *out_slot = b.inner.reservoir_update(s).map_or(-1, |slot| slot as i64);
        Ok(())
    })
}

/// Removes every resident of `class`; `out_freed` receives how many slots
/// were freed. The freed slots are remembered for `driftcl_buffer_resample`.
///
/// # Safety
/// `out_freed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn driftcl_buffer_flush(
    buffer: *mut DriftclBuffer,
    class: usize,
    out_freed: *mut usize,
) -> DriftclStatus {
    guard(|| {
        let b = handle(buffer)?;
        non_null(out_freed, "out_freed")?;
        let freed = b.inner.amr_flush(class);
        *out_freed = freed.len();
        b.freed.entry(class).or_default().extend(freed);
        Ok(())
    })
}

/// Refills the slots freed by the last flush of `class` with up to that many
/// samples drawn uniformly from the `n` given ones (row-major `n x dim`
/// features, one id per row). `out_placed` receives the number placed.
///
/// # Safety
/// `features` must hold `n * dim` doubles and `ids` `n` ids; `out_placed`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn driftcl_buffer_resample(
    buffer: *mut DriftclBuffer,
    class: usize,
    features: *const f64,
    ids: *const u64,
    n: usize,
    drift_version: u32,
    out_placed: *mut usize,
) -> DriftclStatus {
    guard(|| {
        let b = handle(buffer)?;
        non_null(out_placed, "out_placed")?;
        let pool = samples(features, ids, n, b.dim, class, drift_version)?;
        let freed = b.freed.remove(&class).unwrap_or_default();
        *out_placed = core(b.inner.amr_resample(class, &pool, &freed))?;
        Ok(())
    })
}

/// Occupied slots, or 0 for a null handle.
///
/// # Safety
/// `buffer` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn driftcl_buffer_len(buffer: *const DriftclBuffer) -> usize {
    buffer.as_ref().map_or(0, |b| b.inner.len())
}

/// Residents of `class`, or 0 for a null handle.
///
/// # Safety
/// `buffer` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn driftcl_buffer_class_count(buffer: *const DriftclBuffer, class: usize) -> usize {
    buffer.as_ref().map_or(0, |b| b.inner.class_count(class))
}

/// Samples offered so far, or 0 for a null handle.
///
/// # Safety
/// `buffer` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn driftcl_buffer_seen(buffer: *const DriftclBuffer) -> u64 {
    buffer.as_ref().map_or(0, |b| b.inner.seen_count())
}

// ---------------------------------------------------------------------------
// Experiments

/// Parses a run config, runs it (writing the usual artifacts under its
/// output directory) and returns the run summary as JSON in `out_json`.
///
/// # Safety
/// `config_text` must be a NUL-terminated string; `out_json` must be
/// writable and the returned string released with `driftcl_string_free`.
#[no_mangle]
pub unsafe extern "C" fn driftcl_run_config(config_text: *const c_char, out_json: *mut *mut c_char) -> DriftclStatus {
    guard(|| {
        non_null(config_text, "config_text")?;
        non_null(out_json, "out_json")?;
        let text = CStr::from_ptr(config_text)
            .to_str()
            .map_err(|e| fail(DriftclStatus::InvalidUtf8, format!("config text: {e}")))?;
        let cfg = core(parse_config(text, "<ffi>"))?;
        let summary = core(run_experiment(&cfg))?;
        let json = core(serde_json::to_string(&summary).map_err(Error::from))?;
        *out_json = CString::new(json).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn driftcl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
