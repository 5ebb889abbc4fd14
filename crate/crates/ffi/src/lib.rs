//! C interface to `rieszcert`.
//!
//! Objects are opaque handles created by `rc_*_new`-style functions and
//! released with the matching `rc_*_free`. Every fallible call returns an
//! [`RcStatus`]; on failure the message is available through
//! [`rc_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rieszcert::burkholder::{eval_majorant, eval_v};
use rieszcert::cli::{exit_code, EXIT_DOMAIN, EXIT_IO, EXIT_NUMERIC};
use rieszcert::grid::GridFunction2D;
use rieszcert::measures::{ratio, CompositeLaminate, Family, Quadrature};
use rieszcert::params::PlanePoint;
use rieszcert::realization::{hessian, pushforward_moments, realize, RealizeConfig};
use rieszcert::staircase::{build_staircase, example_prelaminate, nu_tree, PrelaminateTree};
use rieszcert::{Error, Params};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RcStatus {
    Ok = 0,
    /// Null pointer, too small buffer or malformed string.
    InvalidArgument = 1,
    /// Parameters outside the domain of the operation.
    Domain = 2,
    /// A numerical stage failed (quadrature, underflow, realization).
    Numeric = 3,
    Io = 4,
    Panic = 5,
}

pub struct RcParams(Params);
pub struct RcTree(PrelaminateTree);
pub struct RcGrid(GridFunction2D);

/// Constants derived from `(p, tau)`; `k_cone` is NaN at `p = 2`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct RcConstants {
    pub p: f64,
    pub tau: f64,
    pub p_star_minus_1: f64,
    pub k_lam: f64,
    pub k_cone: f64,
    pub c_b: f64,
    pub alpha_p: f64,
    pub norm_target: f64,
    pub in_t: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> RcStatus {
    match exit_code(e) {
        EXIT_DOMAIN => RcStatus::Domain,
        EXIT_NUMERIC => RcStatus::Numeric,
        EXIT_IO => RcStatus::Io,
        _ => RcStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), RcStatus>) -> RcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            RcStatus::Panic
        }
    }
}

fn fail(e: Error) -> RcStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> RcStatus {
    set_error(format!("null pointer: {what}"));
    RcStatus::InvalidArgument
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, RcStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), RcStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

/// Copies the last error message (NUL-terminated, truncated to `len`) and
/// returns its full length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rc_params_new(p: f64, tau: f64, out: *mut *mut RcParams) -> RcStatus {
    guard(|| put(out, RcParams(Params::new(p, tau).map_err(fail)?)))
}

/// # Safety
/// `h` must come from [`rc_params_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rc_params_free(h: *mut RcParams) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rc_params_constants(h: *const RcParams, out: *mut RcConstants) -> RcStatus {
    guard(|| {
        let pr = get(h, "params")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = RcConstants {
            p: pr.p,
            tau: pr.tau,
            p_star_minus_1: pr.p_star_minus_1,
            k_lam: pr.k_lam,
            k_cone: pr.k_cone.unwrap_or(f64::NAN),
            c_b: pr.c_b,
            alpha_p: pr.alpha_p,
            norm_target: pr.norm_target(),
            in_t: pr.in_t,
        };
        Ok(())
    })
}

/// Majorant `U(x1, x2)`; NaN for a null handle.
///
/// # Safety
/// `h` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn rc_eval_majorant(h: *const RcParams, x1: f64, x2: f64) -> f64 {
    h.as_ref().map_or(f64::NAN, |p| eval_majorant(&p.0, PlanePoint::from_x(x1, x2)))
}

/// Obstacle `v(x1, x2)`; NaN for a null handle.
///
/// # Safety
/// `h` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn rc_eval_obstacle(h: *const RcParams, x1: f64, x2: f64) -> f64 {
    h.as_ref().map_or(f64::NAN, |p| eval_v(&p.0, PlanePoint::from_x(x1, x2)))
}

/// Closed-form ratio of the continuous laminate with parameter `n`.
///
/// # Safety
/// `h` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rc_laminate_ratio(h: *const RcParams, n: f64, out: *mut f64) -> RcStatus {
    guard(|| {
        let pr = get(h, "params")?.0;
        let m = CompositeLaminate::nu_for(pr, n).map_err(fail)?;
        let q = ratio(&pr, &m, Quadrature::ClosedForm).map_err(fail)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = q;
        Ok(())
    })
}

/// The three-leaf example prelaminate.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rc_tree_example(out: *mut *mut RcTree) -> RcStatus {
    guard(|| put(out, RcTree(example_prelaminate())))
}

/// Staircase prelaminate for the continuous laminate (`with_nu = false`) or
/// for the composed measure with mean zero (`with_nu = true`).
///
/// # Safety
/// `h` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rc_tree_staircase(
    h: *const RcParams,
    n: f64,
    steps: usize,
    with_nu: bool,
    out: *mut *mut RcTree,
) -> RcStatus {
    guard(|| {
        let pr = get(h, "params")?.0;
        let family = Family::for_p(pr.p);
        let t = if with_nu { nu_tree(&pr, n, steps, family) } else { build_staircase(&pr, n, steps, family) };
        put(out, RcTree(t.map_err(fail)?))
    })
}

/// # Safety
/// `h` must come from an `rc_tree_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rc_tree_free(h: *mut RcTree) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Depth of the tree; zero for a null handle.
///
/// # Safety
/// `h` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn rc_tree_depth(h: *const RcTree) -> usize {
    h.as_ref().map_or(0, |t| t.0.depth())
}

/// Writes `(weight, a11, a22, a12)` for each leaf into `buf` (capacity
/// `cap` doubles) and the number of leaves into `count`. With a null or too
/// small buffer only `count` is set and `InvalidArgument` is returned.
///
/// # Safety
/// `h` and `count` must be valid; `buf` must be null or hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn rc_tree_leaves(h: *const RcTree, buf: *mut f64, cap: usize, count: *mut usize) -> RcStatus {
    guard(|| {
        let leaves = get(h, "tree")?.0.leaves();
        if count.is_null() {
            return Err(null("count"));
        }
        *count = leaves.len();
        if buf.is_null() || cap < 4 * leaves.len() {
            set_error(format!("buffer needs {} doubles", 4 * leaves.len()));
            return Err(RcStatus::InvalidArgument);
        }
        for (i, (w, a)) in leaves.iter().enumerate() {
            for (k, v) in [*w, a.a11, a.a22, a.a12].into_iter().enumerate() {
                *buf.add(4 * i + k) = v;
            }
        }
        Ok(())
    })
}

/// Realizes the tree on an `n x n` grid over `[-1, 1]^2`. `delta <= 0`
/// disables the `C^1` budget; `truncate` cuts the tree to what fits.
///
/// # Safety
/// `tree` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rc_realize(
    tree: *const RcTree,
    n: usize,
    layer_fraction: f64,
    delta: f64,
    truncate: bool,
    out: *mut *mut RcGrid,
) -> RcStatus {
    guard(|| {
        let t = &get(tree, "tree")?.0;
        let cfg = RealizeConfig {
            n,
            layer_fraction,
            delta: if delta > 0.0 { delta } else { f64::INFINITY },
            truncate,
            ..Default::default()
        };
        put(out, RcGrid(realize(t, &cfg).map_err(fail)?.u))
    })
}

/// # Safety
/// `h` must come from [`rc_realize`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rc_grid_free(h: *mut RcGrid) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Side length of the grid; zero for a null handle.
///
/// # Safety
/// `h` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn rc_grid_size(h: *const RcGrid) -> usize {
    h.as_ref().map_or(0, |g| g.0.n())
}

/// Copies the `n * n` row-major samples into `buf`.
///
/// # Safety
/// `h` must be valid; `buf` must be null or hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn rc_grid_values(h: *const RcGrid, buf: *mut f64, cap: usize) -> RcStatus {
    guard(|| {
        let v = get(h, "grid")?.0.values();
        if buf.is_null() || cap < v.len() {
            set_error(format!("buffer needs {} doubles", v.len()));
            return Err(RcStatus::InvalidArgument);
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

/// `∫φ1 / ∫φ2` over the grid Hessian of the field.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rc_grid_pushforward_ratio(h: *const RcGrid, params: *const RcParams, out: *mut f64) -> RcStatus {
    guard(|| {
        let g = &get(h, "grid")?.0;
        let pr = get(params, "params")?.0;
        let m = pushforward_moments(&hessian(g), &pr).map_err(fail)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.ratio;
        Ok(())
    })
}

/// Writes the field in the `GRID2D` format to `path`.
///
/// # Safety
/// `h` must be valid and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rc_grid_write(h: *const RcGrid, path: *const c_char) -> RcStatus {
    guard(|| {
        let g = &get(h, "grid")?.0;
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path).to_str().map_err(|e| {
            set_error(format!("path is not UTF-8: {e}"));
            RcStatus::InvalidArgument
        })?;
        let f = std::fs::File::create(p).map_err(|e| fail(Error::Io(e)))?;
        g.write_grid2d(std::io::BufWriter::new(f)).map_err(fail)
    })
}
