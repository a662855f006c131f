//! C ABI over the terabeam simulator.
//!
//! Conventions: every fallible call returns a [`TbStatus`] and writes its
//! result through an out-pointer; `TB_STATUS_OK` is 0. Handles (`TbConfig`,
//! `TbSweepResult`) are opaque and must be released with their matching
//! `*_free` function. Strings returned by pointer stay valid for the
//! lifetime of the handle they came from; strings allocated for the caller
//! must be released with `tb_string_free`. On any non-OK status,
//! `tb_last_error_message` retrieves a human-readable description for the
//! calling thread. Panics never cross the boundary; they surface as
//! `TB_STATUS_PANIC`.
//!
//! Safety: callers must pass pointers that are null or valid for the access
//! each signature implies (the conventions above); the per-function safety
//! story is exactly that contract.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use terabeam::channel::{AbsorptionTable, SystemConfig};
use terabeam::metrics::{self, PowerProfile};
use terabeam::precoders::Scheme;
use terabeam::runner::{self, SweepKind, SweepResult, SweepSpec};
use terabeam::Error;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TbStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// JSON failed to parse.
    ParseError = 3,
    /// A config value or argument violated a precondition.
    InvalidArgument = 4,
    /// A channel draw was singular (Gram condition number above 1e12).
    SingularChannel = 5,
    /// File system failure.
    IoError = 6,
    /// Too many singular draws had to be resampled.
    ResampleBudget = 7,
    /// An index was out of range.
    OutOfRange = 8,
    /// An internal panic was caught at the boundary.
    Panic = 9,
}

/// Opaque handle: a resolved (system config, sweep spec) pair.
pub struct TbConfig {
    config: SystemConfig,
    spec: SweepSpec,
}

/// Opaque handle: sweep rows plus the metadata needed to write the CSV.
pub struct TbSweepResult {
    result: SweepResult,
    scheme_names: Vec<CString>,
}

/// One sweep row, scheme name excluded (fetch it with
/// `tb_sweep_result_scheme`).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TbSweepRow {
    pub sweep_value: f64,
    pub metric_mean: f64,
    pub metric_std: f64,
    pub n_trials: u64,
    pub n_resamples: u64,
}

/// Per-component power model in watts; pass null where a profile argument is
/// accepted to use the defaults (0.25 / 0.25 / 0.03 / 0.08 / 2.5).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TbPowerProfile {
    pub baseband_w: f64,
    pub rf_chain_w: f64,
    pub ps_w: f64,
    pub td_w: f64,
    pub transmit_w: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> TbStatus {
    match err {
        Error::Parse { .. } => TbStatus::ParseError,
        Error::SingularChannel { .. } => TbStatus::SingularChannel,
        Error::Io { .. } => TbStatus::IoError,
        Error::ResampleBudget { .. } => TbStatus::ResampleBudget,
        _ => TbStatus::InvalidArgument,
    }
}

fn fail(err: &Error) -> TbStatus {
    set_last_error(&err.to_string());
    status_of(err)
}

/// Run a closure with panic containment; `f` returns a status itself.
fn guarded<F: FnOnce() -> TbStatus>(f: F) -> TbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(&format!("internal panic: {msg}"));
            TbStatus::Panic
        }
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, TbStatus> {
    if ptr.is_null() {
        set_last_error("null string argument");
        return Err(TbStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8");
        TbStatus::InvalidUtf8
    })
}

fn build_result_handle(result: SweepResult) -> *mut TbSweepResult {
    let scheme_names = result
        .rows
        .iter()
        .map(|r| CString::new(r.scheme.as_str()).unwrap())
        .collect();
    Box::into_raw(Box::new(TbSweepResult {
        result,
        scheme_names,
    }))
}

// ============================================================================
// Version and errors
// ============================================================================

/// Crate version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn tb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the calling thread's last error message into `buf` (truncating if
/// needed, always nul-terminated when `len > 0`). Returns the full message
/// length in bytes excluding the nul, regardless of truncation.
#[no_mangle]
pub unsafe extern "C" fn tb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Release a string allocated by this library.
#[no_mangle]
pub unsafe extern "C" fn tb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ============================================================================
// Config handles
// ============================================================================

/// New config with the full-scale defaults (N=1024, f_c=350 GHz, B=20 GHz,
/// M=128, K_d=32, 4 users, 100 trials).
#[no_mangle]
pub unsafe extern "C" fn tb_config_default(out: *mut *mut TbConfig) -> TbStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out pointer");
            return TbStatus::NullArgument;
        }
        *out = Box::into_raw(Box::new(TbConfig {
            config: SystemConfig::default(),
            spec: SweepSpec::default(),
        }));
        TbStatus::Ok
    })
}

/// Parse a config from a JSON string (same schema as the CLI config file).
#[no_mangle]
pub unsafe extern "C" fn tb_config_from_json(
    json: *const c_char,
    out: *mut *mut TbConfig,
) -> TbStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out pointer");
            return TbStatus::NullArgument;
        }
        let json = match cstr_arg(json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match runner::parse_config_str(json) {
            Ok((config, spec)) => {
                *out = Box::into_raw(Box::new(TbConfig { config, spec }));
                TbStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Load a config from a JSON file.
#[no_mangle]
pub unsafe extern "C" fn tb_config_from_file(
    path: *const c_char,
    out: *mut *mut TbConfig,
) -> TbStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out pointer");
            return TbStatus::NullArgument;
        }
        let path = match cstr_arg(path) {
            Ok(s) => PathBuf::from(s),
            Err(status) => return status,
        };
        match runner::load_config(&path) {
            Ok((config, spec)) => {
                *out = Box::into_raw(Box::new(TbConfig { config, spec }));
                TbStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Override the Monte-Carlo base seed.
#[no_mangle]
pub unsafe extern "C" fn tb_config_set_seed(config: *mut TbConfig, seed: u64) -> TbStatus {
    guarded(|| {
        let Some(handle) = config.as_mut() else {
            set_last_error("null config handle");
            return TbStatus::NullArgument;
        };
        handle.config.seed = seed;
        TbStatus::Ok
    })
}

/// Canonical single-line JSON echo of the resolved config; release with
/// `tb_string_free`.
#[no_mangle]
pub unsafe extern "C" fn tb_config_to_json(
    config: *const TbConfig,
    out: *mut *mut c_char,
) -> TbStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out pointer");
            return TbStatus::NullArgument;
        }
        let Some(handle) = config.as_ref() else {
            set_last_error("null config handle");
            return TbStatus::NullArgument;
        };
        let json = runner::config_json(&handle.config, &handle.spec);
        match CString::new(json) {
            Ok(s) => {
                *out = s.into_raw();
                TbStatus::Ok
            }
            Err(_) => {
                set_last_error("config echo contained a nul byte");
                TbStatus::InvalidArgument
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn tb_config_free(config: *mut TbConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

// ============================================================================
// Sweeps
// ============================================================================

unsafe fn run_sweep(
    config: *const TbConfig,
    threads: u32,
    out: *mut *mut TbSweepResult,
    kind: SweepKind,
) -> TbStatus {
    if out.is_null() {
        set_last_error("null out pointer");
        return TbStatus::NullArgument;
    }
    let Some(handle) = config.as_ref() else {
        set_last_error("null config handle");
        return TbStatus::NullArgument;
    };
    let threads = threads.max(1) as usize;
    let run = match kind {
        SweepKind::SumrateSweep => runner::run_sumrate_sweep(&handle.config, &handle.spec, threads),
        SweepKind::EeSweep => runner::run_ee_sweep(&handle.config, &handle.spec, threads),
        _ => unreachable!(),
    };
    match run {
        Ok(result) => {
            *out = build_result_handle(result);
            TbStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Achievable sum-rate against SNR for the configured schemes. The output is
/// deterministic in (config, seed) and independent of `threads`.
#[no_mangle]
pub unsafe extern "C" fn tb_run_sumrate_sweep(
    config: *const TbConfig,
    threads: u32,
    out: *mut *mut TbSweepResult,
) -> TbStatus {
    guarded(|| run_sweep(config, threads, out, SweepKind::SumrateSweep))
}

/// Energy efficiency against the number of users at the configured operating
/// SNR.
#[no_mangle]
pub unsafe extern "C" fn tb_run_ee_sweep(
    config: *const TbConfig,
    threads: u32,
    out: *mut *mut TbSweepResult,
) -> TbStatus {
    guarded(|| run_sweep(config, threads, out, SweepKind::EeSweep))
}

/// Number of rows in a sweep result.
#[no_mangle]
pub unsafe extern "C" fn tb_sweep_result_len(result: *const TbSweepResult) -> usize {
    result.as_ref().map_or(0, |r| r.result.rows.len())
}

/// Copy row `index` into `out`.
#[no_mangle]
pub unsafe extern "C" fn tb_sweep_result_row(
    result: *const TbSweepResult,
    index: usize,
    out: *mut TbSweepRow,
) -> TbStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out pointer");
            return TbStatus::NullArgument;
        }
        let Some(handle) = result.as_ref() else {
            set_last_error("null result handle");
            return TbStatus::NullArgument;
        };
        let Some(row) = handle.result.rows.get(index) else {
            set_last_error("row index out of range");
            return TbStatus::OutOfRange;
        };
        *out = TbSweepRow {
            sweep_value: row.sweep_value,
            metric_mean: row.metric_mean,
            metric_std: row.metric_std,
            n_trials: row.n_trials,
            n_resamples: row.n_resamples,
        };
        TbStatus::Ok
    })
}

/// Scheme label of row `index`; the pointer stays valid until the result is
/// freed.
#[no_mangle]
pub unsafe extern "C" fn tb_sweep_result_scheme(
    result: *const TbSweepResult,
    index: usize,
    out: *mut *const c_char,
) -> TbStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out pointer");
            return TbStatus::NullArgument;
        }
        let Some(handle) = result.as_ref() else {
            set_last_error("null result handle");
            return TbStatus::NullArgument;
        };
        let Some(name) = handle.scheme_names.get(index) else {
            set_last_error("row index out of range");
            return TbStatus::OutOfRange;
        };
        *out = name.as_ptr();
        TbStatus::Ok
    })
}

/// Write the sweep result as the fixed-column CSV the CLI emits.
#[no_mangle]
pub unsafe extern "C" fn tb_sweep_result_write_csv(
    result: *const TbSweepResult,
    path: *const c_char,
) -> TbStatus {
    guarded(|| {
        let Some(handle) = result.as_ref() else {
            set_last_error("null result handle");
            return TbStatus::NullArgument;
        };
        let path = match cstr_arg(path) {
            Ok(s) => PathBuf::from(s),
            Err(status) => return status,
        };
        match runner::write_csv(&handle.result, &path) {
            Ok(()) => TbStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn tb_sweep_result_free(result: *mut TbSweepResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

// ============================================================================
// Diagnostics straight to CSV
// ============================================================================

/// Run the beam-pattern diagnostic for the first configured scheme and the
/// configured beam user, writing the CSV to `path`.
#[no_mangle]
pub unsafe extern "C" fn tb_beampattern_csv(
    config: *const TbConfig,
    path: *const c_char,
) -> TbStatus {
    guarded(|| {
        let Some(handle) = config.as_ref() else {
            set_last_error("null config handle");
            return TbStatus::NullArgument;
        };
        let path = match cstr_arg(path) {
            Ok(s) => PathBuf::from(s),
            Err(status) => return status,
        };
        let Some(&scheme) = handle.spec.schemes.first() else {
            set_last_error("config lists no schemes");
            return TbStatus::InvalidArgument;
        };
        let user = runner::beam_user(&handle.spec);
        let run = runner::run_beampattern(&handle.config, &handle.spec, scheme, &user)
            .and_then(|r| runner::write_beampattern_csv(&r, &path));
        match run {
            Ok(()) => TbStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Run the path-loss diagnostic over the configured distances and absorption
/// table, writing the CSV to `path`.
#[no_mangle]
pub unsafe extern "C" fn tb_pathloss_csv(config: *const TbConfig, path: *const c_char) -> TbStatus {
    guarded(|| {
        let Some(handle) = config.as_ref() else {
            set_last_error("null config handle");
            return TbStatus::NullArgument;
        };
        let path = match cstr_arg(path) {
            Ok(s) => PathBuf::from(s),
            Err(status) => return status,
        };
        let table = match &handle.spec.absorption_table_path {
            Some(p) => AbsorptionTable::from_file(Path::new(p)),
            None => Ok(AbsorptionTable::default_table()),
        };
        let run = table.and_then(|t| {
            runner::run_pathloss(&handle.config, &handle.spec, &t, &handle.spec.distances_m)
                .and_then(|r| runner::write_pathloss_csv(&r, &path))
        });
        match run {
            Ok(()) => TbStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

// ============================================================================
// Scalar helpers
// ============================================================================

/// Front-end power in watts for a scheme label at the given geometry.
#[no_mangle]
pub unsafe extern "C" fn tb_hardware_power_w(
    scheme: *const c_char,
    n_antennas: u64,
    n_users: u64,
    n_td_per_rf: u64,
    profile: *const TbPowerProfile,
    out: *mut f64,
) -> TbStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out pointer");
            return TbStatus::NullArgument;
        }
        let label = match cstr_arg(scheme) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let scheme: Scheme = match label.parse() {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        let profile = match profile.as_ref() {
            Some(p) => PowerProfile {
                baseband_w: p.baseband_w,
                rf_chain_w: p.rf_chain_w,
                ps_w: p.ps_w,
                td_w: p.td_w,
                transmit_w: p.transmit_w,
            },
            None => PowerProfile::default(),
        };
        let hw = scheme.hardware(n_antennas as usize, n_users as usize, n_td_per_rf as usize);
        *out = metrics::hardware_power(&hw, &profile);
        TbStatus::Ok
    })
}

/// Path loss in dB at (freq, distance) using the bundled absorption table.
#[no_mangle]
pub unsafe extern "C" fn tb_path_loss_db(
    freq_hz: f64,
    distance_m: f64,
    out: *mut f64,
) -> TbStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out pointer");
            return TbStatus::NullArgument;
        }
        let table = AbsorptionTable::default_table();
        match terabeam::channel::path_loss_db(freq_hz, distance_m, &table) {
            Ok(v) => {
                *out = v;
                TbStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
