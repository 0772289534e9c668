//! C interface to the theta-wave solver.
//!
//! Objects are opaque handles created by `tw_*_new`/producing calls and released
//! with the matching `tw_*_free`. Every fallible call returns a [`TwStatus`];
//! on failure, `tw_last_error_message` describes the most recent error on the
//! calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use theta_wave::analysis::weak::verify_peakon;
use theta_wave::analysis::{b_to_theta, theta_to_b};
use theta_wave::dynamics::{self, BlowupCause, Direction, SimConfig, ThetaParam, Trajectory};
use theta_wave::lagrangian;
use theta_wave::spectral::{self, Field, Grid};
use theta_wave::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonFinite = 3,
    Unsupported = 4,
    BufferTooSmall = 5,
    OutOfRange = 6,
    Io = 7,
    Internal = 8,
    Panic = 9,
}

/// Opaque grid handle.
pub struct TwGrid(Grid);

/// Opaque field handle.
pub struct TwField(Field);

/// Opaque trajectory handle.
pub struct TwTrajectory(Trajectory);

/// Time-loop settings; obtain defaults from [`tw_sim_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TwSimConfig {
    pub theta: f64,
    pub t_end: f64,
    pub cfl: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub slope_blowup_threshold: f64,
    pub output_every: usize,
}

/// Blow-up summary; `detected` is 0 for completed runs and the other fields are then zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TwBlowup {
    pub detected: i32,
    pub t_detect: f64,
    /// -1 below, +1 above.
    pub direction: i32,
    /// 0 slope threshold, 1 step-size underflow, 2 non-finite state.
    pub cause: i32,
    pub max_slope: f64,
    pub min_slope: f64,
    pub t_lower_bracket: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> TwStatus {
    match e {
        Error::NonFinite { .. } | Error::NonFiniteStage { .. } => TwStatus::NonFinite,
        Error::Unsupported(_) | Error::NoBound { .. } => TwStatus::Unsupported,
        Error::OutOfRange { .. } => TwStatus::OutOfRange,
        Error::Io { .. } => TwStatus::Io,
        Error::Quadrature { .. } | Error::Json(_) => TwStatus::Internal,
        _ => TwStatus::InvalidArgument,
    }
}

/// Run `f`, recording errors and containing panics.
fn guard(f: impl FnOnce() -> Result<(), (TwStatus, String)>) -> TwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TwStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            TwStatus::Panic
        }
    }
}

fn lift<T>(r: theta_wave::Result<T>) -> Result<T, (TwStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (TwStatus, String)> {
    p.as_ref().ok_or((TwStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (TwStatus, String)> {
    p.as_mut().ok_or((TwStatus::NullPointer, format!("`{name}` is null")))
}

fn theta(v: f64) -> Result<ThetaParam, (TwStatus, String)> {
    lift(ThetaParam::new(v))
}

/// Copy the last error message (NUL-terminated, truncated to fit) into `buf`.
/// Returns the full message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn tw_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_grid_new(n: usize, length: f64, origin: f64, out: *mut *mut TwGrid) -> TwStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let g = lift(Grid::new(n, length, origin))?;
        *out = Box::into_raw(Box::new(TwGrid(g)));
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a handle from `tw_grid_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tw_grid_free(grid: *mut TwGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Point count, or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tw_grid_n(grid: *const TwGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.n())
}

/// # Safety
/// `grid` must be a live handle; `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tw_grid_points(grid: *const TwGrid, out: *mut f64, len: usize) -> TwStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        copy_out(&g.0.points(), out, len)
    })
}

unsafe fn copy_out(values: &[f64], out: *mut f64, len: usize) -> Result<(), (TwStatus, String)> {
    if out.is_null() {
        return Err((TwStatus::NullPointer, "`out` is null".into()));
    }
    if len < values.len() {
        return Err((
            TwStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// New field on `grid` from `len == n` samples.
///
/// # Safety
/// `grid` must be a live handle, `values` valid for `len` doubles, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_field_new(
    grid: *const TwGrid,
    values: *const f64,
    len: usize,
    out: *mut *mut TwField,
) -> TwStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        let out = out_ref(out, "out")?;
        if values.is_null() {
            return Err((TwStatus::NullPointer, "`values` is null".into()));
        }
        if len != g.0.n() {
            return Err((TwStatus::InvalidArgument, format!("expected {} values, got {len}", g.0.n())));
        }
        let v = std::slice::from_raw_parts(values, len).to_vec();
        let f = lift(Field::new(g.0, v))?;
        *out = Box::into_raw(Box::new(TwField(f)));
        Ok(())
    })
}

/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tw_field_free(field: *mut TwField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Sample count, or 0 for a null handle.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tw_field_len(field: *const TwField) -> usize {
    field.as_ref().map_or(0, |f| f.0.values().len())
}

/// # Safety
/// `field` must be a live handle; `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tw_field_values(field: *const TwField, out: *mut f64, len: usize) -> TwStatus {
    guard(|| {
        let f = deref(field, "field")?;
        copy_out(f.0.values(), out, len)
    })
}

unsafe fn unary(
    input: *const TwField,
    out: *mut *mut TwField,
    op: impl FnOnce(&Field) -> theta_wave::Result<Field>,
) -> TwStatus {
    guard(|| {
        let f = deref(input, "field")?;
        let out = out_ref(out, "out")?;
        let r = lift(op(&f.0))?;
        *out = Box::into_raw(Box::new(TwField(r)));
        Ok(())
    })
}

/// `m = u - u_xx`.
///
/// # Safety
/// `u` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_helmholtz_apply(u: *const TwField, out: *mut *mut TwField) -> TwStatus {
    unary(u, out, spectral::helmholtz_apply)
}

/// `u = (1 - d²/dx²)^{-1} m`.
///
/// # Safety
/// `m` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_helmholtz_solve(m: *const TwField, out: *mut *mut TwField) -> TwStatus {
    unary(m, out, spectral::helmholtz_solve)
}

/// Spectral first derivative.
///
/// # Safety
/// `f` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_deriv(f: *const TwField, out: *mut *mut TwField) -> TwStatus {
    unary(f, out, spectral::deriv)
}

/// Semidiscrete time derivative `u_t` of the equation with parameter `theta`.
///
/// # Safety
/// `u` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_rhs(u: *const TwField, theta_value: f64, out: *mut *mut TwField) -> TwStatus {
    guard(|| {
        let th = theta(theta_value)?;
        let f = deref(u, "u")?;
        let out = out_ref(out, "out")?;
        let r = lift(dynamics::rhs(&f.0, th))?;
        *out = Box::into_raw(Box::new(TwField(r)));
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_sim_config_default(theta_value: f64, t_end: f64, out: *mut TwSimConfig) -> TwStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let c = SimConfig::new(theta(theta_value)?, t_end);
        *out = TwSimConfig {
            theta: theta_value,
            t_end: c.t_end,
            cfl: c.cfl,
            dt_min: c.dt_min,
            dt_max: c.dt_max,
            slope_blowup_threshold: c.slope_blowup_threshold,
            output_every: c.output_every,
        };
        Ok(())
    })
}

/// Evolve `u0`; a detected blow-up is a successful call (inspect with `tw_trajectory_blowup`).
///
/// # Safety
/// `u0` must be a live handle, `config` valid for reads, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_evolve(
    u0: *const TwField,
    config: *const TwSimConfig,
    out: *mut *mut TwTrajectory,
) -> TwStatus {
    guard(|| {
        let u0 = deref(u0, "u0")?;
        let c = deref(config, "config")?;
        let out = out_ref(out, "out")?;
        let mut cfg = SimConfig::new(theta(c.theta)?, c.t_end);
        cfg.cfl = c.cfl;
        cfg.dt_min = c.dt_min;
        cfg.dt_max = c.dt_max;
        cfg.slope_blowup_threshold = c.slope_blowup_threshold;
        cfg.output_every = c.output_every;
        let traj = lift(dynamics::evolve(&u0.0, &cfg))?;
        *out = Box::into_raw(Box::new(TwTrajectory(traj)));
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tw_trajectory_free(traj: *mut TwTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of recorded states, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tw_trajectory_len(traj: *const TwTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.states.len())
}

/// # Safety
/// `traj` must be a live handle; `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tw_trajectory_times(traj: *const TwTrajectory, out: *mut f64, len: usize) -> TwStatus {
    guard(|| {
        let t = deref(traj, "traj")?;
        copy_out(&t.0.times, out, len)
    })
}

/// Copy of recorded state `index`.
///
/// # Safety
/// `traj` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_trajectory_state(
    traj: *const TwTrajectory,
    index: usize,
    out: *mut *mut TwField,
) -> TwStatus {
    guard(|| {
        let t = deref(traj, "traj")?;
        let out = out_ref(out, "out")?;
        let s = t.0.states.get(index).ok_or((
            TwStatus::OutOfRange,
            format!("state {index} of {}", t.0.states.len()),
        ))?;
        *out = Box::into_raw(Box::new(TwField(s.clone())));
        Ok(())
    })
}

/// # Safety
/// `traj` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_trajectory_blowup(traj: *const TwTrajectory, out: *mut TwBlowup) -> TwStatus {
    guard(|| {
        let t = deref(traj, "traj")?;
        let out = out_ref(out, "out")?;
        *out = match t.0.blowup() {
            None => TwBlowup::default(),
            Some(b) => TwBlowup {
                detected: 1,
                t_detect: b.t_detect,
                direction: if b.direction == Direction::Below { -1 } else { 1 },
                cause: match b.cause {
                    BlowupCause::SlopeThreshold => 0,
                    BlowupCause::DtUnderflow => 1,
                    BlowupCause::NonFinite => 2,
                },
                max_slope: b.max_slope,
                min_slope: b.min_slope,
                t_lower_bracket: b.t_lower_bracket,
            },
        };
        Ok(())
    })
}

/// Largest `max|u_x|` over all accepted steps.
///
/// # Safety
/// `traj` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_trajectory_peak_slope(traj: *const TwTrajectory, out: *mut f64) -> TwStatus {
    guard(|| {
        let t = deref(traj, "traj")?;
        *out_ref(out, "out")? = t.0.peak_slope;
        Ok(())
    })
}

/// Breaking-time bound for odd data about `x_star`, in the theorem's time
/// variable (`run_time` = 0) or in the solver's time (`run_time` != 0).
///
/// # Safety
/// `u0` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_blowup_bound(
    u0: *const TwField,
    x_star: f64,
    theta_value: f64,
    run_time: i32,
    out: *mut f64,
) -> TwStatus {
    guard(|| {
        let th = theta(theta_value)?;
        let u0 = deref(u0, "u0")?;
        let out = out_ref(out, "out")?;
        let t = lift(lagrangian::blowup_bound(&u0.0, x_star, th))?;
        *out = if run_time != 0 { lagrangian::run_time_bound(t, th) } else { t };
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_theta_to_b(theta_value: f64, out: *mut f64) -> TwStatus {
    guard(|| {
        *out_ref(out, "out")? = lift(theta_to_b(theta_value))?;
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_b_to_theta(b: f64, out: *mut f64) -> TwStatus {
    guard(|| {
        *out_ref(out, "out")? = lift(b_to_theta(b))?;
        Ok(())
    })
}

/// Weak-form residuals of the peakon `c exp(-|x - theta c t|)` over the standard
/// test functions on `[0, t_end)`: the largest one in `max_residual`, and the
/// largest one for the wrong-speed impostor in `impostor_max`.
///
/// # Safety
/// `max_residual` and `impostor_max` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tw_peakon_residual(
    c: f64,
    theta_value: f64,
    t_end: f64,
    tol: f64,
    max_residual: *mut f64,
    impostor_max: *mut f64,
) -> TwStatus {
    guard(|| {
        let th = theta(theta_value)?;
        let max_residual = out_ref(max_residual, "max_residual")?;
        let impostor_max = out_ref(impostor_max, "impostor_max")?;
        let rep = lift(verify_peakon(c, &[th], t_end, tol, 0.0))?;
        *max_residual = rep.thetas[0].residuals.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
        *impostor_max = rep.impostor_max[0];
        Ok(())
    })
}
