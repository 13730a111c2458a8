//! C ABI over `kw-core`.
//!
//! Grids, fields and problems are opaque heap handles created by `kw_*_new`
//! and released by the matching `kw_*_free`. Every fallible call returns a
//! [`KwStatus`]; on failure [`kw_last_error_message`] describes the error on
//! the calling thread. Results are written through out-pointers only on
//! success or, for solvers, also when the iteration stopped unconverged.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kw_core::cli::{exit, exit_code};
use kw_core::elliptic::{
    build_upper_lower, monotone_solve_with, newton_solve_with, MonotoneOptions, NewtonOptions,
    UpperLowerParams,
};
use kw_core::estimates::verify_solution_bounds;
use kw_core::flow::{run_flow, FlowConfig};
use kw_core::manifold::{DriftForm, Grid, GridSpec, ScalarField};
use kw_core::problem::{self, HypothesisMode, ProblemData};
use kw_core::KwError;

/// Status codes. The first five match the `kw` command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KwStatus {
    Ok = 0,
    Hypothesis = 1,
    InvalidInput = 2,
    NoConvergence = 3,
    Verification = 4,
    NullPointer = 5,
    Panic = 6,
}

pub struct KwGrid(Grid);

pub struct KwField(ScalarField);

pub struct KwProblem(ProblemData);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct KwSolveInfo {
    pub converged: bool,
    /// Newton/monotone iterations or flow time steps.
    pub iterations: usize,
    /// `sup |residual|` of the returned field.
    pub residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct KwBoundsInfo {
    pub passed: bool,
    /// Every solution satisfies `u >= lower_bound`.
    pub lower_bound: f64,
    pub min_u: f64,
    /// NaN when `min A <= 0` and the L2 bound does not apply.
    pub l2_bound: f64,
    pub l2_norm: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

enum Failure {
    Core(KwError),
    Null(&'static str),
}

impl From<KwError> for Failure {
    fn from(e: KwError) -> Self {
        Failure::Core(e)
    }
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &KwError) -> KwStatus {
    match exit_code(e) {
        exit::HYPOTHESIS => KwStatus::Hypothesis,
        exit::NO_CONVERGENCE => KwStatus::NoConvergence,
        exit::VERIFICATION => KwStatus::Verification,
        _ => KwStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<KwStatus, Failure>) -> KwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => {
            if status == KwStatus::Ok {
                set_error(String::new());
            }
            status
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed for {what}"));
            KwStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            KwStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next `kw_*` call on the same thread.
#[no_mangle]
pub extern "C" fn kw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `points` and `periods` must point to `dim` readable elements.
#[no_mangle]
pub unsafe extern "C" fn kw_grid_new(
    dim: usize,
    points: *const usize,
    periods: *const f64,
    out: *mut *mut KwGrid,
) -> KwStatus {
    guard(|| {
        let points = slice(points, dim, "points")?.to_vec();
        let periods = slice(periods, dim, "periods")?.to_vec();
        let grid = Grid::new(GridSpec::new(points, periods))?;
        put(out, KwGrid(grid))?;
        Ok(KwStatus::Ok)
    })
}

/// # Safety
/// `grid` must be null or a handle from `kw_grid_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kw_grid_free(grid: *mut KwGrid) {
    release(grid)
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kw_grid_node_count(grid: *const KwGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.node_count())
}

/// Copies `len` row-major node values into a new field.
///
/// # Safety
/// `grid` must be a live handle and `values` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn kw_field_new(
    grid: *const KwGrid,
    values: *const f64,
    len: usize,
    out: *mut *mut KwField,
) -> KwStatus {
    guard(|| {
        let grid = deref(grid, "grid")?;
        let values = slice(values, len, "values")?.to_vec();
        let field = ScalarField::new(&grid.0, values).map_err(|e| match e {
            KwError::NonFinite(_) => KwError::InvalidArgument("field values must be finite".into()),
            e => e,
        })?;
        put(out, KwField(field))?;
        Ok(KwStatus::Ok)
    })
}

/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kw_field_free(field: *mut KwField) {
    release(field)
}

/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kw_field_len(field: *const KwField) -> usize {
    field.as_ref().map_or(0, |f| f.0.len())
}

/// Copies the node values into `dest`, which must hold exactly the field length.
///
/// # Safety
/// `field` must be a live handle and `dest` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kw_field_copy_values(
    field: *const KwField,
    dest: *mut f64,
    len: usize,
) -> KwStatus {
    guard(|| {
        let field = deref(field, "field")?;
        if len != field.0.len() {
            return Err(KwError::InvalidArgument(format!(
                "buffer holds {len} values, field has {}",
                field.0.len()
            ))
            .into());
        }
        if dest.is_null() {
            return Err(Failure::Null("dest"));
        }
        ptr::copy_nonoverlapping(field.0.values().as_ptr(), dest, len);
        Ok(KwStatus::Ok)
    })
}

/// Builds problem data. `theta` holds one component field per axis; pass
/// null with `theta_len = 0` for θ ≡ 0.
///
/// # Safety
/// All handles must be live and `theta` must point to `theta_len` handles.
#[no_mangle]
pub unsafe extern "C" fn kw_problem_new(
    grid: *const KwGrid,
    s: *const KwField,
    a: *const KwField,
    b: *const KwField,
    alpha: f64,
    beta: f64,
    theta: *const *const KwField,
    theta_len: usize,
    out: *mut *mut KwProblem,
) -> KwStatus {
    guard(|| {
        let grid = &deref(grid, "grid")?.0;
        let drift = if theta_len == 0 {
            DriftForm::zero(grid)
        } else {
            let parts = slice(theta, theta_len, "theta")?
                .iter()
                .map(|&p| deref(p, "theta component").map(|f| f.0.clone()))
                .collect::<Result<Vec<_>, _>>()?;
            DriftForm::from_components(grid, parts)?
        };
        let (s, a, b) = (deref(s, "S")?, deref(a, "A")?, deref(b, "B")?);
        let p = ProblemData::new(
            grid.clone(),
            s.0.clone(),
            a.0.clone(),
            b.0.clone(),
            alpha,
            beta,
            drift,
        )?;
        put(out, KwProblem(p))?;
        Ok(KwStatus::Ok)
    })
}

/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kw_problem_free(problem: *mut KwProblem) {
    release(problem)
}

/// Checks the hypotheses (`strict` additionally requires `A > 0`). Returns
/// `KW_STATUS_HYPOTHESIS` with the first failed condition as the message.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kw_problem_validate(problem: *const KwProblem, strict: bool) -> KwStatus {
    guard(|| {
        let p = deref(problem, "problem")?;
        let mode = if strict {
            HypothesisMode::Strict
        } else {
            HypothesisMode::Weak
        };
        problem::require(&p.0, mode)?;
        Ok(KwStatus::Ok)
    })
}

/// `Lu − S − A e^{αu} + B e^{−βu}` as a new field.
///
/// # Safety
/// Handles must be live.
#[no_mangle]
pub unsafe extern "C" fn kw_residual(
    problem: *const KwProblem,
    u: *const KwField,
    out: *mut *mut KwField,
) -> KwStatus {
    guard(|| {
        let r = problem::residual(&deref(problem, "problem")?.0, &deref(u, "u")?.0)?;
        put(out, KwField(r))?;
        Ok(KwStatus::Ok)
    })
}

unsafe fn initial(problem: &ProblemData, u0: *const KwField) -> ScalarField {
    match u0.as_ref() {
        Some(f) => f.0.clone(),
        None => ScalarField::zeros(problem.grid()),
    }
}

unsafe fn finish(
    problem: &ProblemData,
    u: ScalarField,
    converged: bool,
    iterations: usize,
    out: *mut *mut KwField,
    info: *mut KwSolveInfo,
) -> Result<KwStatus, Failure> {
    let residual = problem::residual(problem, &u)?.sup_norm();
    if let Some(info) = info.as_mut() {
        *info = KwSolveInfo {
            converged,
            iterations,
            residual,
        };
    }
    put(out, KwField(u))?;
    if converged {
        Ok(KwStatus::Ok)
    } else {
        set_error(format!(
            "stopped after {iterations} iterations with residual {residual:e}"
        ));
        Ok(KwStatus::NoConvergence)
    }
}

/// Damped Newton from `u0` (null for zero). `info` may be null.
///
/// # Safety
/// Handles must be live or null where allowed.
#[no_mangle]
pub unsafe extern "C" fn kw_solve_newton(
    problem: *const KwProblem,
    u0: *const KwField,
    tol: f64,
    max_iter: usize,
    out: *mut *mut KwField,
    info: *mut KwSolveInfo,
) -> KwStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        let options = NewtonOptions {
            tol,
            max_iter,
            ..NewtonOptions::default()
        };
        let r = newton_solve_with(p, &initial(p, u0), &options)?;
        finish(p, r.u, r.converged, r.iterations, out, info)
    })
}

/// Parabolic flow from `u0` (null for zero) with the default implicit-linear
/// scheme and automatic time step, until `sup|u_t| <= residual_tol`.
///
/// # Safety
/// Handles must be live or null where allowed.
#[no_mangle]
pub unsafe extern "C" fn kw_solve_flow(
    problem: *const KwProblem,
    u0: *const KwField,
    residual_tol: f64,
    max_time: f64,
    out: *mut *mut KwField,
    info: *mut KwSolveInfo,
) -> KwStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        let config = FlowConfig {
            residual_tol,
            max_time,
            ..FlowConfig::default()
        };
        let r = run_flow(&initial(p, u0), p, &config)?;
        finish(p, r.u, r.converged, r.steps, out, info)
    })
}

/// Monotone iteration from the automatically constructed supersolution.
///
/// # Safety
/// Handles must be live.
#[no_mangle]
pub unsafe extern "C" fn kw_solve_monotone(
    problem: *const KwProblem,
    tol: f64,
    max_iter: usize,
    out: *mut *mut KwField,
    info: *mut KwSolveInfo,
) -> KwStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        let ul = build_upper_lower(p, &UpperLowerParams::default())?;
        let options = MonotoneOptions {
            tol,
            max_iterations: max_iter,
            ..MonotoneOptions::default()
        };
        let r = monotone_solve_with(p, &ul, &options)?;
        finish(p, r.u, r.converged, r.iterations, out, info)
    })
}

/// Checks `u` against the a-priori lower and L2 bounds. Returns
/// `KW_STATUS_VERIFICATION` when a bound fails; `info` is filled either way.
///
/// # Safety
/// Handles must be live; `info` may be null.
#[no_mangle]
pub unsafe extern "C" fn kw_verify_bounds(
    problem: *const KwProblem,
    u: *const KwField,
    info: *mut KwBoundsInfo,
) -> KwStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        let u = &deref(u, "u")?.0;
        let report = verify_solution_bounds(p, u)?;
        let l2_norm = report
            .checks
            .iter()
            .find(|c| c.name == "l2_bound")
            .map_or(f64::NAN, |c| c.value);
        if let Some(info) = info.as_mut() {
            *info = KwBoundsInfo {
                passed: report.passed,
                lower_bound: -report.lower_bound_c,
                min_u: u.min(),
                l2_bound: report.l2_bound.unwrap_or(f64::NAN),
                l2_norm,
            };
        }
        if report.passed {
            Ok(KwStatus::Ok)
        } else {
            let failed: Vec<_> = report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name)
                .collect();
            set_error(format!("bound check failed: {}", failed.join(", ")));
            Ok(KwStatus::Verification)
        }
    })
}
