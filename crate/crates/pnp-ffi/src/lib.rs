//! C ABI for the pnp simulation suite.
//!
//! Conventions:
//! * every fallible call returns a [`PnpStatus`]; `PNP_STATUS_OK` is zero;
//! * objects are opaque handles created by `*_new`/`*_parse` and released by
//!   the matching `*_free` (freeing NULL is a no-op);
//! * the most recent error message of the calling thread is available
//!   through [`pnp_last_error`];
//! * all functions are safe to call from any thread, but a single handle
//!   must not be mutated concurrently.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use pnp_core::cell::{effective_tensor, HomTensor};
use pnp_core::config::RunConfig;
use pnp_core::diag::CutoffFunction;
use pnp_core::grid::{CellGrid, InclusionSpec};
use pnp_core::runner::{self, Command, RunOptions};
use pnp_core::Error;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnpStatus {
    Ok = 0,
    InvalidArgument = 1,
    GeometryError = 2,
    SolverError = 3,
    IncompatibleData = 4,
    ConfigError = 5,
    IoError = 6,
    CheckFailed = 7,
    InternalError = 8,
}

/// Subcommand selector for [`pnp_run`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnpCommand {
    Cell = 0,
    Homog = 1,
    Micro = 2,
    Converge = 3,
    AppPnpSweep = 4,
    Check = 5,
}

/// Inclusion selector for [`pnp_unit_cell_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnpInclusion {
    None = 0,
    CenteredSquare = 1,
    CenteredDisk = 2,
}

/// Opaque discretized unit periodicity cell.
pub struct PnpUnitCell(Arc<CellGrid>);

/// Opaque effective-tensor result (tensor entries, fluid fraction, and the
/// stored cell solutions).
pub struct PnpEffectiveTensor(HomTensor);

/// Opaque smooth cut-off function.
pub struct PnpCutoff(CutoffFunction);

/// Opaque validated run configuration.
pub struct PnpRunConfig(RunConfig);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let cleaned: Vec<u8> = msg.bytes().filter(|&b| b != 0).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(cleaned).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> PnpStatus {
    match err {
        Error::Validation(_) | Error::ExprParse { .. } | Error::TimeGridMismatch(_) => {
            PnpStatus::InvalidArgument
        }
        Error::Geometry(_) => PnpStatus::GeometryError,
        Error::SolverNonConvergence { .. }
        | Error::SolverBreakdown(_)
        | Error::StepRejected { .. } => PnpStatus::SolverError,
        Error::IncompatibleRhs { .. } | Error::CompatibilityViolation { .. } => {
            PnpStatus::IncompatibleData
        }
        Error::Config { .. } => PnpStatus::ConfigError,
        Error::Io(_) => PnpStatus::IoError,
    }
}

fn guard<F: FnOnce() -> PnpStatus>(f: F) -> PnpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            PnpStatus::InternalError
        }
    }
}

/// Copies the calling thread's most recent error message (NUL-terminated)
/// into `buf`; returns the full message length excluding the terminator.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes, or be NULL (query the
/// needed length).
#[no_mangle]
pub unsafe extern "C" fn pnp_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // always terminate
            *buf.add(n - 1) = 0;
        }
        bytes.len() - 1
    })
}

/// B(x) = x / (e^x - 1), the exponential-fitting kernel.
#[no_mangle]
pub extern "C" fn pnp_bernoulli(x: f64) -> f64 {
    pnp_core::pnp::bernoulli(x)
}

/// Exponentially fitted two-point face flux.
#[no_mangle]
pub extern "C" fn pnp_sg_face_flux(
    c_left: f64,
    c_right: f64,
    psi_left: f64,
    psi_right: f64,
    d_face: f64,
    h: f64,
) -> f64 {
    pnp_core::pnp::sg_face_flux(c_left, c_right, psi_left, psi_right, d_face, h)
}

/// Builds the unit periodicity cell. `param` is the square side or the disk
/// radius (ignored for `PNP_INCLUSION_NONE`).
///
/// # Safety
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn pnp_unit_cell_new(
    resolution: usize,
    inclusion: PnpInclusion,
    param: f64,
    out: *mut *mut PnpUnitCell,
) -> PnpStatus {
    guard(|| {
        if out.is_null() {
            set_error("out pointer is NULL");
            return PnpStatus::InvalidArgument;
        }
        let spec = match inclusion {
            PnpInclusion::None => InclusionSpec::None,
            PnpInclusion::CenteredSquare => InclusionSpec::CenteredSquare { side: param },
            PnpInclusion::CenteredDisk => InclusionSpec::CenteredDisk { radius: param },
        };
        match CellGrid::build_unit_cell(resolution, spec) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(PnpUnitCell(Arc::new(g))));
                PnpStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Builds a unit cell from mask text (line 1 `N`, then `N` rows of
/// `F`/`S` characters).
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pnp_unit_cell_from_mask(
    text: *const c_char,
    out: *mut *mut PnpUnitCell,
) -> PnpStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            set_error("NULL argument");
            return PnpStatus::InvalidArgument;
        }
        let Ok(text) = CStr::from_ptr(text).to_str() else {
            set_error("mask text is not valid UTF-8");
            return PnpStatus::InvalidArgument;
        };
        match CellGrid::from_mask_text(text) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(PnpUnitCell(Arc::new(g))));
                PnpStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// # Safety
/// `cell` must be a live handle from this library (or NULL).
#[no_mangle]
pub unsafe extern "C" fn pnp_unit_cell_free(cell: *mut PnpUnitCell) {
    if !cell.is_null() {
        drop(Box::from_raw(cell));
    }
}

/// # Safety
/// `cell` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pnp_unit_cell_fluid_fraction(
    cell: *const PnpUnitCell,
    out: *mut f64,
) -> PnpStatus {
    guard(|| {
        if cell.is_null() || out.is_null() {
            set_error("NULL argument");
            return PnpStatus::InvalidArgument;
        }
        *out = (*cell).0.fluid_volume_fraction();
        PnpStatus::Ok
    })
}

/// Measure of the inclusion boundary (exact formulas for the shipped
/// shapes, staircase count for custom masks).
///
/// # Safety
/// `cell` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pnp_unit_cell_boundary_measure(
    cell: *const PnpUnitCell,
    out: *mut f64,
) -> PnpStatus {
    guard(|| {
        if cell.is_null() || out.is_null() {
            set_error("NULL argument");
            return PnpStatus::InvalidArgument;
        }
        *out = (*cell).0.inclusion_boundary_measure();
        PnpStatus::Ok
    })
}

/// Solves both periodic cell problems on `cell` and assembles the effective
/// tensor.
///
/// # Safety
/// `cell` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pnp_effective_tensor_compute(
    cell: *const PnpUnitCell,
    out: *mut *mut PnpEffectiveTensor,
) -> PnpStatus {
    guard(|| {
        if cell.is_null() || out.is_null() {
            set_error("NULL argument");
            return PnpStatus::InvalidArgument;
        }
        match effective_tensor(&(*cell).0) {
            Ok(ht) => {
                *out = Box::into_raw(Box::new(PnpEffectiveTensor(ht)));
                PnpStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Writes the tensor entries row-major into `entries[4]` and the fluid
/// fraction into `fluid_fraction` (either may be NULL).
///
/// # Safety
/// Non-NULL pointers must be valid for the advertised sizes.
#[no_mangle]
pub unsafe extern "C" fn pnp_effective_tensor_entries(
    tensor: *const PnpEffectiveTensor,
    entries: *mut f64,
    fluid_fraction: *mut f64,
) -> PnpStatus {
    guard(|| {
        if tensor.is_null() {
            set_error("NULL tensor handle");
            return PnpStatus::InvalidArgument;
        }
        let ht = &(*tensor).0;
        if !entries.is_null() {
            for r in 0..2 {
                for c in 0..2 {
                    *entries.add(2 * r + c) = ht.a[r][c];
                }
            }
        }
        if !fluid_fraction.is_null() {
            *fluid_fraction = ht.fluid_fraction;
        }
        PnpStatus::Ok
    })
}

/// # Safety
/// `tensor` must be a live handle from this library (or NULL).
#[no_mangle]
pub unsafe extern "C" fn pnp_effective_tensor_free(tensor: *mut PnpEffectiveTensor) {
    if !tensor.is_null() {
        drop(Box::from_raw(tensor));
    }
}

/// Builds the smooth cut-off of height `k` (> 1).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pnp_cutoff_new(k: f64, out: *mut *mut PnpCutoff) -> PnpStatus {
    guard(|| {
        if out.is_null() {
            set_error("out pointer is NULL");
            return PnpStatus::InvalidArgument;
        }
        match CutoffFunction::new(k) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(PnpCutoff(c)));
                PnpStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// # Safety
/// `cutoff` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pnp_cutoff_eval(cutoff: *const PnpCutoff, r: f64) -> f64 {
    if cutoff.is_null() {
        return f64::NAN;
    }
    (*cutoff).0.eval(r)
}

/// # Safety
/// `cutoff` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pnp_cutoff_deriv(cutoff: *const PnpCutoff, r: f64) -> f64 {
    if cutoff.is_null() {
        return f64::NAN;
    }
    (*cutoff).0.deriv(r)
}

/// # Safety
/// `cutoff` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pnp_cutoff_second_deriv(cutoff: *const PnpCutoff, r: f64) -> f64 {
    if cutoff.is_null() {
        return f64::NAN;
    }
    (*cutoff).0.second_deriv(r)
}

/// # Safety
/// `cutoff` must be a live handle from this library (or NULL).
#[no_mangle]
pub unsafe extern "C" fn pnp_cutoff_free(cutoff: *mut PnpCutoff) {
    if !cutoff.is_null() {
        drop(Box::from_raw(cutoff));
    }
}

fn command_of(cmd: PnpCommand) -> Command {
    match cmd {
        PnpCommand::Cell => Command::Cell,
        PnpCommand::Homog => Command::Homog,
        PnpCommand::Micro => Command::Micro,
        PnpCommand::Converge => Command::Converge,
        PnpCommand::AppPnpSweep => Command::AppPnpSweep,
        PnpCommand::Check => Command::Check,
    }
}

/// Parses and validates a configuration document for `command`, applying
/// the charge-compatibility gate unless `allow_incompatible` is set.
/// `base_dir` (nullable) resolves relative mask paths.
///
/// # Safety
/// `text` must be NUL-terminated; `base_dir` NULL or NUL-terminated; `out`
/// valid.
#[no_mangle]
pub unsafe extern "C" fn pnp_run_config_parse(
    text: *const c_char,
    base_dir: *const c_char,
    command: PnpCommand,
    allow_incompatible: bool,
    out: *mut *mut PnpRunConfig,
) -> PnpStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            set_error("NULL argument");
            return PnpStatus::InvalidArgument;
        }
        let Ok(text) = CStr::from_ptr(text).to_str() else {
            set_error("config text is not valid UTF-8");
            return PnpStatus::InvalidArgument;
        };
        let base: Option<PathBuf> = if base_dir.is_null() {
            None
        } else {
            match CStr::from_ptr(base_dir).to_str() {
                Ok(s) => Some(PathBuf::from(s)),
                Err(_) => {
                    set_error("base_dir is not valid UTF-8");
                    return PnpStatus::InvalidArgument;
                }
            }
        };
        match runner::parse_config(
            text,
            base.as_deref().map(Path::new),
            command_of(command),
            allow_incompatible,
        ) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(PnpRunConfig(cfg)));
                PnpStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// # Safety
/// `config` must be a live handle from this library (or NULL).
#[no_mangle]
pub unsafe extern "C" fn pnp_run_config_free(config: *mut PnpRunConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Executes a subcommand against a parsed configuration, writing artifacts
/// to `out_dir` (NULL uses the configuration's output directory). Returns
/// `PNP_STATUS_CHECK_FAILED` when `PNP_COMMAND_CHECK` finds violations.
///
/// # Safety
/// `config` must be a live handle; `out_dir` NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pnp_run(
    config: *const PnpRunConfig,
    command: PnpCommand,
    out_dir: *const c_char,
    threads: usize,
    allow_incompatible: bool,
) -> PnpStatus {
    guard(|| {
        if config.is_null() {
            set_error("NULL config handle");
            return PnpStatus::InvalidArgument;
        }
        let out: Option<PathBuf> = if out_dir.is_null() {
            None
        } else {
            match CStr::from_ptr(out_dir).to_str() {
                Ok(s) => Some(PathBuf::from(s)),
                Err(_) => {
                    set_error("out_dir is not valid UTF-8");
                    return PnpStatus::InvalidArgument;
                }
            }
        };
        let opts = RunOptions {
            out_dir: out,
            threads: threads.max(1),
            allow_incompatible,
        };
        match runner::orchestrate(command_of(command), &(*config).0, &opts) {
            Ok(0) => PnpStatus::Ok,
            Ok(failed) => {
                set_error(&format!("{failed} check(s) failed"));
                PnpStatus::CheckFailed
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_roundtrip_through_the_c_surface() {
        unsafe {
            let mut cell: *mut PnpUnitCell = std::ptr::null_mut();
            let st = pnp_unit_cell_new(16, PnpInclusion::None, 0.0, &mut cell);
            assert_eq!(st, PnpStatus::Ok);
            let mut frac = 0.0;
            assert_eq!(pnp_unit_cell_fluid_fraction(cell, &mut frac), PnpStatus::Ok);
            assert_eq!(frac, 1.0);
            let mut tensor: *mut PnpEffectiveTensor = std::ptr::null_mut();
            assert_eq!(pnp_effective_tensor_compute(cell, &mut tensor), PnpStatus::Ok);
            let mut entries = [0.0f64; 4];
            let mut f2 = 0.0;
            assert_eq!(
                pnp_effective_tensor_entries(tensor, entries.as_mut_ptr(), &mut f2),
                PnpStatus::Ok
            );
            assert!((entries[0] - 1.0).abs() < 1e-10);
            assert!(entries[1].abs() < 1e-12);
            assert_eq!(f2, 1.0);
            pnp_effective_tensor_free(tensor);
            pnp_unit_cell_free(cell);
        }
    }

    #[test]
    fn errors_surface_with_messages() {
        unsafe {
            let mut cell: *mut PnpUnitCell = std::ptr::null_mut();
            let st = pnp_unit_cell_new(16, PnpInclusion::CenteredSquare, 1.5, &mut cell);
            assert_eq!(st, PnpStatus::InvalidArgument);
            let mut buf = vec![0i8; 256];
            let n = pnp_last_error(buf.as_mut_ptr(), buf.len());
            assert!(n > 0);
            let msg = CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned();
            assert!(msg.contains("side"), "message was {msg:?}");
        }
    }

    #[test]
    fn cutoff_properties_through_the_c_surface() {
        unsafe {
            let mut cut: *mut PnpCutoff = std::ptr::null_mut();
            assert_eq!(pnp_cutoff_new(5.0, &mut cut), PnpStatus::Ok);
            assert!((pnp_cutoff_eval(cut, 2.5) - 2.5).abs() < 1e-10);
            assert!(pnp_cutoff_eval(cut, 15.0).abs() < 1e-10);
            assert!(pnp_cutoff_deriv(cut, 2.5).abs() <= 1.0 + 1e-12);
            pnp_cutoff_free(cut);
            assert_eq!(pnp_cutoff_new(0.5, &mut cut), PnpStatus::InvalidArgument);
        }
    }

    #[test]
    fn kernels_are_plain_functions() {
        assert_eq!(pnp_bernoulli(0.0), 1.0);
        let f = pnp_sg_face_flux(3.0, 1.0, 0.0, 0.0, 1.0, 1.0);
        assert!((f - 2.0).abs() < 1e-14);
    }

    #[test]
    fn run_config_parse_reports_config_errors() {
        unsafe {
            let bad = std::ffi::CString::new("[[species]]\nc0 = \"1\"\n").unwrap();
            let mut cfg: *mut PnpRunConfig = std::ptr::null_mut();
            let st = pnp_run_config_parse(
                bad.as_ptr(),
                std::ptr::null(),
                PnpCommand::Micro,
                false,
                &mut cfg,
            );
            assert_eq!(st, PnpStatus::ConfigError);
            let mut buf = vec![0i8; 256];
            pnp_last_error(buf.as_mut_ptr(), buf.len());
            let msg = CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned();
            assert!(msg.contains("species[0].z"), "message was {msg:?}");
        }
    }
}
