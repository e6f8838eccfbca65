//! C ABI over `cgoptics`: opaque scenario and beam handles, status codes and a per-thread error
//! message.
//!
//! Every function returns a [`CgoStatus`]; on failure the message is available through
//! [`cgo_last_error_message`]. Panics are caught at the boundary and reported as
//! [`CgoStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use cgoptics::beam::{build_beam, BeamSolution};
use cgoptics::config::{Scenario, ScenarioConfig};
use cgoptics::system::{check_assumptions, eigen_decompose, Order};
use cgoptics::verify::residual::residual_at;
use cgoptics::CgoError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Bad scenario description, unknown name, unreadable file.
    Config = 3,
    /// Failure of the numerics: caustic, positivity loss, gap collapse, ...
    Numeric = 4,
    /// Output buffer too small; the required length was written.
    BufferTooSmall = 5,
    Panic = 6,
}

/// Parsed scenario: system, domain and initial data.
pub struct CgoScenario {
    inner: Scenario,
}

/// Beams of every component of a scenario.
pub struct CgoBeams {
    beams: Vec<BeamSolution>,
    size: usize,
    dim: usize,
    spec: cgoptics::system::SystemSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn from_error(e: CgoError) -> CgoStatus {
    let status = if e.is_config() { CgoStatus::Config } else { CgoStatus::Numeric };
    set_error(e.to_string());
    status
}

/// Runs `f`, converting panics and errors into status codes.
fn guard(f: impl FnOnce() -> Result<(), CgoStatus>) -> CgoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CgoStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside cgoptics");
            CgoStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), CgoStatus> {
    if p.is_null() {
        set_error(format!("{name} is null"));
        return Err(CgoStatus::NullPointer);
    }
    Ok(())
}

fn invalid(msg: impl Into<String>) -> CgoStatus {
    set_error(msg);
    CgoStatus::InvalidArgument
}

/// Loads a bundled scenario by name or a TOML file by path.
///
/// # Safety
/// `name_or_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cgo_scenario_load(name_or_path: *const c_char, out: *mut *mut CgoScenario) -> CgoStatus {
    guard(|| {
        non_null(name_or_path, "name_or_path")?;
        non_null(out, "out")?;
        let name = CStr::from_ptr(name_or_path)
            .to_str()
            .map_err(|_| invalid("name_or_path is not UTF-8"))?;
        let inner = ScenarioConfig::load(name).and_then(|c| c.build()).map_err(from_error)?;
        *out = Box::into_raw(Box::new(CgoScenario { inner }));
        Ok(())
    })
}

/// Parses a scenario from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cgo_scenario_parse(toml: *const c_char, out: *mut *mut CgoScenario) -> CgoStatus {
    guard(|| {
        non_null(toml, "toml")?;
        non_null(out, "out")?;
        let text = CStr::from_ptr(toml).to_str().map_err(|_| invalid("toml is not UTF-8"))?;
        let inner = ScenarioConfig::parse(text).and_then(|c| c.build()).map_err(from_error)?;
        *out = Box::into_raw(Box::new(CgoScenario { inner }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from `cgo_scenario_load`/`cgo_scenario_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cgo_scenario_free(scenario: *mut CgoScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Spatial dimension `d` and system size `N`.
///
/// # Safety
/// `scenario` must be a live handle; `dim` and `size` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cgo_scenario_shape(scenario: *const CgoScenario, dim: *mut usize, size: *mut usize) -> CgoStatus {
    guard(|| {
        non_null(scenario, "scenario")?;
        non_null(dim, "dim")?;
        non_null(size, "size")?;
        let s = &(*scenario).inner.spec;
        *dim = s.dim;
        *size = s.size;
        Ok(())
    })
}

/// Writes 1 to `passed` if hermiticity, the spectral gap and the boundary speed condition hold.
///
/// # Safety
/// `scenario` must be a live handle; `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cgo_check_assumptions(scenario: *const CgoScenario, passed: *mut i32) -> CgoStatus {
    guard(|| {
        non_null(scenario, "scenario")?;
        non_null(passed, "passed")?;
        let s = &(*scenario).inner;
        *passed = i32::from(check_assumptions(&s.spec, s.config.check).passed);
        Ok(())
    })
}

/// Distinct eigenvalues of `A(t, x, ξ)` in increasing order with their multiplicities.
///
/// `x` and `xi` hold `d` values each. At most `capacity` entries are written; `count` receives the
/// number of distinct eigenvalues, and `BufferTooSmall` is returned if it exceeds `capacity`.
///
/// # Safety
/// `x`, `xi` must point to `d` doubles; `lambda` and `multiplicity` to `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn cgo_eigenvalues(
    scenario: *const CgoScenario,
    t: f64,
    x: *const f64,
    xi: *const f64,
    lambda: *mut f64,
    multiplicity: *mut usize,
    capacity: usize,
    count: *mut usize,
) -> CgoStatus {
    guard(|| {
        non_null(scenario, "scenario")?;
        non_null(x, "x")?;
        non_null(xi, "xi")?;
        non_null(count, "count")?;
        let spec = &(*scenario).inner.spec;
        let x = slice::from_raw_parts(x, spec.dim);
        let xi = slice::from_raw_parts(xi, spec.dim);
        let dec = eigen_decompose(spec, t, x, xi, Order::Zero).map_err(from_error)?;
        *count = dec.modes.len();
        if dec.modes.len() > capacity {
            set_error(format!("{} eigenvalues do not fit into {capacity} entries", dec.modes.len()));
            return Err(CgoStatus::BufferTooSmall);
        }
        if capacity > 0 {
            non_null(lambda, "lambda")?;
            non_null(multiplicity, "multiplicity")?;
        }
        for (k, m) in dec.modes.iter().enumerate() {
            *lambda.add(k) = m.lambda;
            *multiplicity.add(k) = m.multiplicity;
        }
        Ok(())
    })
}

/// Builds the beams of every component.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cgo_beams_build(scenario: *const CgoScenario, out: *mut *mut CgoBeams) -> CgoStatus {
    guard(|| {
        non_null(scenario, "scenario")?;
        non_null(out, "out")?;
        let s = &(*scenario).inner;
        let beams = s
            .initial
            .components
            .iter()
            .map(|c| build_beam(&s.spec, c, &s.config.beam))
            .collect::<Result<Vec<_>, _>>()
            .map_err(from_error)?;
        *out = Box::into_raw(Box::new(CgoBeams {
            beams,
            size: s.spec.size,
            dim: s.spec.dim,
            spec: s.spec.clone(),
        }));
        Ok(())
    })
}

/// # Safety
/// `beams` must come from `cgo_beams_build` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cgo_beams_free(beams: *mut CgoBeams) {
    if !beams.is_null() {
        drop(Box::from_raw(beams));
    }
}

unsafe fn write_vector(v: &cgoptics::linalg::CVector, re: *mut f64, im: *mut f64) -> Result<(), CgoStatus> {
    non_null(re, "re")?;
    non_null(im, "im")?;
    for (k, z) in v.iter().enumerate() {
        *re.add(k) = z.re;
        *im.add(k) = z.im;
    }
    Ok(())
}

unsafe fn point_args<'a>(beams: *const CgoBeams, eps: f64, x: *const f64) -> Result<(&'a CgoBeams, &'a [f64]), CgoStatus> {
    non_null(beams, "beams")?;
    non_null(x, "x")?;
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    let b = &*beams;
    Ok((b, slice::from_raw_parts(x, b.dim)))
}

/// Superposed field `v^ε(t, x)`; `re` and `im` receive `N` values each.
///
/// # Safety
/// `x` must point to `d` doubles, `re` and `im` to `N` doubles.
#[no_mangle]
pub unsafe extern "C" fn cgo_field_eval(beams: *const CgoBeams, eps: f64, t: f64, x: *const f64, re: *mut f64, im: *mut f64) -> CgoStatus {
    guard(|| {
        let (b, x) = point_args(beams, eps, x)?;
        let v = cgoptics::assembly::field_at(&b.beams, eps, t, x).map_err(from_error)?;
        write_vector(&v, re, im)
    })
}

/// Residual `L v^ε` at `(t, x)`; `re` and `im` receive `N` values each.
///
/// # Safety
/// `x` must point to `d` doubles, `re` and `im` to `N` doubles.
#[no_mangle]
pub unsafe extern "C" fn cgo_residual_eval(
    beams: *const CgoBeams,
    eps: f64,
    t: f64,
    x: *const f64,
    re: *mut f64,
    im: *mut f64,
) -> CgoStatus {
    guard(|| {
        let (b, x) = point_args(beams, eps, x)?;
        let v = residual_at(&b.spec, &b.beams, eps, t, x).map_err(from_error)?;
        write_vector(&v, re, im)
    })
}

/// System size `N` of the beams' system.
///
/// # Safety
/// `beams` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cgo_beams_size(beams: *const CgoBeams) -> usize {
    if beams.is_null() {
        0
    } else {
        (*beams).size
    }
}

/// Copies the last error message of this thread, NUL-terminated, into `buf`.
///
/// Returns the message length without the terminator; nothing is copied if `len` is too small.
///
/// # Safety
/// `buf` must point to `len` writable bytes or be null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn cgo_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > msg.len() {
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), msg.len());
            *buf.add(msg.len()) = 0;
        }
        msg.len()
    })
}
