//! C interface to `geostretch`.
//!
//! Models are opaque `GsModel` handles created with [`gs_model_new`] and
//! released with [`gs_model_free`]. Every fallible entry point returns a
//! [`GsStatus`]; on failure a human-readable message is available from
//! [`gs_last_error_message`] on the same thread until the next call.
//! Matrices are written row-major. Nothing panics across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use geostretch::curvature::CurvatureBundle;
use geostretch::stretching::{slice_rates, LocateError, LocateOptions, Objective, Slice, SubspaceCandidate};
use geostretch::{builtin, fcm, locate_sim_point, metric_at, ExtendedPoint, GeoError, ModelParameters, TangentVector, VectorField};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownModel = 3,
    Domain = 4,
    Degenerate = 5,
    Capability = 6,
    Numerical = 7,
    NoExtremum = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsObjective {
    TanMin = 0,
    OrthMax = 1,
    RatioMax = 2,
}

/// Opaque model handle.
pub struct GsModel {
    field: Arc<dyn VectorField>,
}

/// Result of [`gs_locate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GsLocated {
    pub coordinate: f64,
    pub theta_tan: f64,
    pub theta_orth: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(GsStatus, String);

impl From<GeoError> for Failure {
    fn from(e: GeoError) -> Self {
        let status = match &e {
            GeoError::Domain { .. } => GsStatus::Domain,
            GeoError::Capability { .. } => GsStatus::Capability,
            GeoError::Shape { .. } | GeoError::Parameter(_) => GsStatus::InvalidArgument,
            GeoError::Degenerate(_) | GeoError::Rank(_) => GsStatus::Degenerate,
            GeoError::Numerical(_) => GsStatus::Numerical,
            GeoError::UnknownModel(_) => GsStatus::UnknownModel,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(GsStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GsStatus::Panic
        }
    }
}

unsafe fn model_ref<'a>(m: *const GsModel) -> Result<&'a GsModel, Failure> {
    m.as_ref().ok_or_else(|| null("model"))
}

unsafe fn slice_in<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn state<'a>(model: &GsModel, x: *const f64, n: usize) -> Result<&'a [f64], Failure> {
    let dim = model.field.dim();
    if n != dim {
        return Err(GeoError::Shape { expected: dim, got: n }.into());
    }
    slice_in(x, n, "x")
}

/// Creates a built-in model by id (`linear`, `davis-skodje`,
/// `michaelis-menten`, `chiavazzo`, `constant`) with optional parameter
/// overrides given as parallel arrays of names and values.
///
/// # Safety
/// `id` must be a NUL-terminated string; `names` and `values` must hold
/// `n_params` entries (both may be null when `n_params` is 0); `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn gs_model_new(
    id: *const c_char,
    names: *const *const c_char,
    values: *const f64,
    n_params: usize,
    out: *mut *mut GsModel,
) -> GsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if id.is_null() {
            return Err(null("id"));
        }
        let id = CStr::from_ptr(id).to_str().map_err(|_| Failure(GsStatus::InvalidArgument, "id is not UTF-8".into()))?;
        let mut params = ModelParameters::default();
        if n_params > 0 {
            if names.is_null() {
                return Err(null("names"));
            }
            let values = slice_in(values, n_params, "values")?;
            for (i, v) in values.iter().enumerate() {
                let name = *names.add(i);
                if name.is_null() {
                    return Err(null("names[i]"));
                }
                let name = CStr::from_ptr(name)
                    .to_str()
                    .map_err(|_| Failure(GsStatus::InvalidArgument, "parameter name is not UTF-8".into()))?;
                params.set(name, *v);
            }
        }
        let field = builtin(id, &params)?;
        *out = Box::into_raw(Box::new(GsModel { field }));
        Ok(())
    })
}

/// Releases a model. Null is accepted and ignored.
///
/// # Safety
/// `model` must come from [`gs_model_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gs_model_free(model: *mut GsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// State-space dimension n, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_model_dim(model: *const GsModel) -> usize {
    model.as_ref().map_or(0, |m| m.field.dim())
}

/// Metric and inverse metric at `(x, tau)`, each `(n+1)×(n+1)` row-major.
/// `g_inv` may be null.
///
/// # Safety
/// `x` holds `n` values; `g` (and `g_inv` if non-null) hold `(n+1)^2`.
#[no_mangle]
pub unsafe extern "C" fn gs_metric(
    model: *const GsModel,
    x: *const f64,
    n: usize,
    tau: f64,
    g: *mut f64,
    g_inv: *mut f64,
) -> GsStatus {
    guard(|| {
        let m = model_ref(model)?;
        let x = state(m, x, n)?;
        let size = (n + 1) * (n + 1);
        let out = slice_out(g, size, "g")?;
        let value = metric_at(m.field.as_ref(), &ExtendedPoint::new(x, tau))?;
        for i in 0..=n {
            for j in 0..=n {
                out[i * (n + 1) + j] = value.g[(i, j)];
            }
        }
        if !g_inv.is_null() {
            let inv = slice_out(g_inv, size, "g_inv")?;
            for i in 0..=n {
                for j in 0..=n {
                    inv[i * (n + 1) + j] = value.g_inv[(i, j)];
                }
            }
        }
        Ok(())
    })
}

/// Geodesic stretching rate of the extended-space vector `v` (length n+1).
///
/// # Safety
/// `x` holds `n` values, `v` holds `n+1`, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gs_geodesic_stretching(
    model: *const GsModel,
    x: *const f64,
    n: usize,
    v: *const f64,
    out: *mut f64,
) -> GsStatus {
    guard(|| {
        let m = model_ref(model)?;
        let x = state(m, x, n)?;
        let v = slice_in(v, n + 1, "v")?;
        let out = slice_out(out, 1, "out")?;
        let bundle = CurvatureBundle::compute(m.field.as_ref(), &ExtendedPoint::new(x, 0.0))?;
        out[0] = bundle.geodesic_stretching(&TangentVector::new(v))?;
        Ok(())
    })
}

/// Tangential and orthogonal rates at a state of a planar model, with the
/// tangential subspace taken along the trajectory.
///
/// # Safety
/// `x` holds `n` values; `theta_tan` and `theta_orth` are writable.
#[no_mangle]
pub unsafe extern "C" fn gs_theta_extrema(
    model: *const GsModel,
    x: *const f64,
    n: usize,
    theta_tan: *mut f64,
    theta_orth: *mut f64,
) -> GsStatus {
    guard(|| {
        let m = model_ref(model)?;
        let x = state(m, x, n)?;
        let tan = slice_out(theta_tan, 1, "theta_tan")?;
        let orth = slice_out(theta_orth, 1, "theta_orth")?;
        let (t, o) = slice_rates(m.field.as_ref(), x, &SubspaceCandidate::Trajectory)?;
        tan[0] = t;
        orth[0] = o;
        Ok(())
    })
}

/// Flow-curvature determinant Ψ at `x`.
///
/// # Safety
/// `x` holds `n` values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gs_psi(model: *const GsModel, x: *const f64, n: usize, out: *mut f64) -> GsStatus {
    guard(|| {
        let m = model_ref(model)?;
        let x = state(m, x, n)?;
        let out = slice_out(out, 1, "out")?;
        out[0] = fcm::psi(m.field.as_ref(), x)?;
        Ok(())
    })
}

/// Locates the slow-manifold point on the line through `base` along
/// coordinate `search_index`, restricted to `[lower, upper]`.
/// `objective` is a `GsObjective` value; `grid` of 0 selects the library
/// default.
///
/// # Safety
/// `base` holds `n` values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gs_locate(
    model: *const GsModel,
    base: *const f64,
    n: usize,
    search_index: usize,
    lower: f64,
    upper: f64,
    objective: u32,
    grid: usize,
    out: *mut GsLocated,
) -> GsStatus {
    guard(|| {
        let m = model_ref(model)?;
        let base = state(m, base, n)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let slice = Slice::new(base.to_vec(), search_index, lower, upper)?;
        let mut options = LocateOptions {
            objective: match objective {
                0 => Objective::TanMin,
                1 => Objective::OrthMax,
                2 => Objective::RatioMax,
                other => return Err(Failure(GsStatus::InvalidArgument, format!("unknown objective {other}"))),
            },
            ..LocateOptions::default()
        };
        if grid != 0 {
            options.grid = grid;
        }
        match locate_sim_point(m.field.as_ref(), &slice, &options) {
            Ok(found) => {
                *out = GsLocated { coordinate: found.coordinate, theta_tan: found.theta_tan, theta_orth: found.theta_orth };
                Ok(())
            }
            Err(e @ LocateError::NoInteriorExtremum { .. }) => Err(Failure(GsStatus::NoExtremum, e.to_string())),
            Err(LocateError::Geo(e)) => Err(e.into()),
        }
    })
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn gs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn gs_status_name(status: GsStatus) -> *const c_char {
    let s: &'static CStr = match status {
        GsStatus::Ok => c"ok",
        GsStatus::NullPointer => c"null pointer",
        GsStatus::InvalidArgument => c"invalid argument",
        GsStatus::UnknownModel => c"unknown model",
        GsStatus::Domain => c"domain violation",
        GsStatus::Degenerate => c"degenerate input",
        GsStatus::Capability => c"capability",
        GsStatus::Numerical => c"numerical failure",
        GsStatus::NoExtremum => c"no interior extremum",
        GsStatus::Panic => c"panic",
    };
    s.as_ptr()
}
