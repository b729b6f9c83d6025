//! C ABI for `rmfit`.
//!
//! Objects are opaque handles created by `*_new` functions and released by
//! the matching `*_free`. Every fallible call returns an [`RmfitStatus`]; on
//! failure [`rmfit_last_error`] describes the problem. State vectors are
//! plain `double` arrays: one value for scalar problems, `n_interior` values
//! for path problems.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use rmfit::{
    bvp_solve, drift, noisy_oracle, rm_run, schrodinger_eigs, Error, GaussianSampler, Grid, PathVector, PolicyKind,
    Potential, ProblemSpec, RegionShape, RmTrace, State, StepSchedule, TraceOptions, TrustRegionPolicy,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmfitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ModeMismatch = 3,
    GridMismatch = 4,
    SingularMatrix = 5,
    RestartOutsideRegion = 6,
    TruncationStorm = 7,
    NotConverged = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmfitPotential {
    /// `V(u) = u²/2 + u⁴/4`.
    Quartic = 0,
    /// `V(u) = (4 - u²)²/4`.
    DoubleWell = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmfitPolicyKind {
    Fixed = 0,
    Expanding = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmfitRegionShape {
    /// Open interval `(lo - growth k, hi + growth k)`; scalar problems.
    Interval = 0,
    /// `‖x‖_{H¹} <= radius + growth k`; path problems.
    H1Ball = 1,
}

/// Trust-region family. Fields not used by `shape` are ignored.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmfitRegion {
    pub shape: RmfitRegionShape,
    pub lo: f64,
    pub hi: f64,
    pub radius: f64,
    pub growth: f64,
}

/// Step sizes `a_n = a0 / (n + n0)^gamma`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmfitSchedule {
    pub a0: f64,
    pub n0: f64,
    pub gamma: f64,
}

/// One thinned trace row.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmfitRecord {
    pub n: usize,
    pub sigma: usize,
    pub step_size: f64,
    pub truncated: bool,
    pub non_finite: bool,
    pub norm_x: f64,
}

/// Problem definition (potential, ε, grid and boundary values).
pub struct RmfitProblem {
    spec: ProblemSpec,
}

/// Seeded Gaussian sampler matched to a problem.
pub struct RmfitSampler {
    sampler: GaussianSampler,
}

/// Result of a Robbins–Monro run.
pub struct RmfitRun {
    trace: RmTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> RmfitStatus {
    match err {
        Error::GridMismatch { .. } | Error::LengthMismatch { .. } => RmfitStatus::GridMismatch,
        Error::ModeMismatch { .. } => RmfitStatus::ModeMismatch,
        Error::InvalidParameter { .. } | Error::StartOutsideRegion => RmfitStatus::InvalidArgument,
        Error::SingularPivot { .. } => RmfitStatus::SingularMatrix,
        Error::RestartOutsideRegion { .. } => RmfitStatus::RestartOutsideRegion,
        Error::TruncationStorm { .. } => RmfitStatus::TruncationStorm,
    }
}

struct Failure(RmfitStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(RmfitStatus::NullPointer, format!("`{name}` is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RmfitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RmfitStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RmfitStatus::Panic
        }
    }
}

unsafe fn reference<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn input<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn state_len(spec: &ProblemSpec) -> usize {
    spec.grid().map_or(1, |g| g.n_interior())
}

fn make_state(spec: &ProblemSpec, values: &[f64]) -> Result<State, Failure> {
    match spec.grid() {
        None => {
            if values.len() != 1 {
                return Err(Failure(
                    RmfitStatus::GridMismatch,
                    format!("scalar problems take 1 value, got {}", values.len()),
                ));
            }
            Ok(State::scalar(values[0])?)
        }
        Some(grid) => Ok(State::Path(PathVector::new(grid, values.to_vec())?)),
    }
}

fn write_state(state: &State, out: &mut [f64]) -> Result<(), Failure> {
    match state {
        State::Scalar(s) if out.len() == 1 => out[0] = s.value(),
        State::Path(p) if out.len() == p.len() => out.copy_from_slice(p.values()),
        _ => {
            return Err(Failure(
                RmfitStatus::GridMismatch,
                format!("output buffer of length {} does not fit the state", out.len()),
            ))
        }
    }
    Ok(())
}

fn potential(p: RmfitPotential) -> Potential {
    match p {
        RmfitPotential::Quartic => Potential::Quartic,
        RmfitPotential::DoubleWell => Potential::DoubleWell,
    }
}

fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message for the most recent failed call on this thread; empty after a
/// successful call. Valid until the next `rmfit_*` call on the same thread.
#[no_mangle]
pub extern "C" fn rmfit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn rmfit_problem_new_scalar(
    potential_kind: RmfitPotential,
    epsilon: f64,
    out: *mut *mut RmfitProblem,
) -> RmfitStatus {
    guard(|| {
        let spec = ProblemSpec::scalar(potential(potential_kind), epsilon)?;
        store(out, RmfitProblem { spec })
    })
}

/// Path problem on a grid with `n_interior` interior nodes, reference mean
/// the linear interpolant of `m_minus` and `m_plus`.
#[no_mangle]
pub unsafe extern "C" fn rmfit_problem_new_path(
    potential_kind: RmfitPotential,
    epsilon: f64,
    n_interior: usize,
    m_minus: f64,
    m_plus: f64,
    out: *mut *mut RmfitProblem,
) -> RmfitStatus {
    guard(|| {
        let grid = Grid::new(n_interior)?;
        let spec = ProblemSpec::path(potential(potential_kind), epsilon, grid, m_minus, m_plus)?;
        store(out, RmfitProblem { spec })
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmfit_problem_free(problem: *mut RmfitProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Length of state vectors for this problem (1 for scalar problems).
#[no_mangle]
pub unsafe extern "C" fn rmfit_problem_state_len(problem: *const RmfitProblem) -> usize {
    problem.as_ref().map_or(0, |p| state_len(&p.spec))
}

#[no_mangle]
pub unsafe extern "C" fn rmfit_sampler_new(
    problem: *const RmfitProblem,
    seed: u64,
    out: *mut *mut RmfitSampler,
) -> RmfitStatus {
    guard(|| {
        let p = reference(problem, "problem")?;
        store(
            out,
            RmfitSampler {
                sampler: p.spec.sampler(seed),
            },
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmfit_sampler_free(sampler: *mut RmfitSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}

/// Writes the drift `f(x)` to `out`.
#[no_mangle]
pub unsafe extern "C" fn rmfit_drift(
    problem: *const RmfitProblem,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> RmfitStatus {
    guard(|| {
        let p = reference(problem, "problem")?;
        let x = make_state(&p.spec, input(x, len, "x")?)?;
        write_state(&drift(&p.spec, &x)?, output(out, len, "out")?)
    })
}

/// Writes one noisy evaluation `F(x, ξ)` to `out`, advancing the sampler.
#[no_mangle]
pub unsafe extern "C" fn rmfit_noisy_oracle(
    problem: *const RmfitProblem,
    sampler: *mut RmfitSampler,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> RmfitStatus {
    guard(|| {
        let p = reference(problem, "problem")?;
        let s = sampler.as_mut().ok_or_else(|| null("sampler"))?;
        let x = make_state(&p.spec, input(x, len, "x")?)?;
        write_state(&noisy_oracle(&p.spec, &x, &mut s.sampler)?, output(out, len, "out")?)
    })
}

/// Newton solve for a root of the drift of a path problem. `x_init` may be
/// null to start from zero. On `NotConverged` the outputs still hold the last
/// iterate and its residual.
#[no_mangle]
pub unsafe extern "C" fn rmfit_bvp_solve(
    problem: *const RmfitProblem,
    x_init: *const f64,
    len: usize,
    tol: f64,
    max_iters: usize,
    x_out: *mut f64,
    residual_out: *mut f64,
    iterations_out: *mut usize,
) -> RmfitStatus {
    guard(|| {
        let p = reference(problem, "problem")?;
        let grid = p.spec.grid().ok_or(Error::ModeMismatch {
            expected: "path",
            got: "scalar",
        })?;
        let init = if x_init.is_null() {
            PathVector::zeros(grid)
        } else {
            PathVector::new(grid, input(x_init, len, "x_init")?.to_vec())?
        };
        let sol = bvp_solve(&p.spec, &init, tol, max_iters)?;
        write_state(&State::Path(sol.x_star.clone()), output(x_out, len, "x_out")?)?;
        if let Some(r) = residual_out.as_mut() {
            *r = sol.residual_h1;
        }
        if let Some(i) = iterations_out.as_mut() {
            *i = sol.newton_iters;
        }
        if sol.converged {
            Ok(())
        } else {
            Err(Failure(
                RmfitStatus::NotConverged,
                format!("residual {:e} after {} Newton steps", sol.residual_h1, sol.newton_iters),
            ))
        }
    })
}

/// The `k` smallest eigenvalues (ascending) of the second variation at `x`.
#[no_mangle]
pub unsafe extern "C" fn rmfit_schrodinger_eigs(
    problem: *const RmfitProblem,
    x: *const f64,
    len: usize,
    k: usize,
    eigenvalues_out: *mut f64,
) -> RmfitStatus {
    guard(|| {
        let p = reference(problem, "problem")?;
        let x = match make_state(&p.spec, input(x, len, "x")?)? {
            State::Path(x) => x,
            State::Scalar(_) => {
                return Err(Error::ModeMismatch {
                    expected: "path",
                    got: "scalar",
                }
                .into())
            }
        };
        let report = schrodinger_eigs(&p.spec, &x, k)?;
        output(eigenvalues_out, k, "eigenvalues_out")?.copy_from_slice(&report.eigenvalues);
        Ok(())
    })
}

/// Truncated Robbins–Monro from `x0` (or from `restart` when `x0` is null).
/// Keeps every `record_every`-th trace row plus the last one.
#[no_mangle]
pub unsafe extern "C" fn rmfit_run(
    problem: *const RmfitProblem,
    policy: RmfitPolicyKind,
    region: *const RmfitRegion,
    restart: *const f64,
    x0: *const f64,
    len: usize,
    schedule: *const RmfitSchedule,
    n_iters: usize,
    seed: u64,
    record_every: usize,
    sigma_cap: usize,
    out: *mut *mut RmfitRun,
) -> RmfitStatus {
    guard(|| {
        let p = reference(problem, "problem")?;
        let region = reference(region, "region")?;
        let schedule = reference(schedule, "schedule")?;
        let shape = match region.shape {
            RmfitRegionShape::Interval => RegionShape::Interval {
                lo: region.lo,
                hi: region.hi,
                growth: region.growth,
            },
            RmfitRegionShape::H1Ball => RegionShape::H1Ball {
                radius: region.radius,
                growth: region.growth,
            },
        };
        let kind = match policy {
            RmfitPolicyKind::Fixed => PolicyKind::Fixed,
            RmfitPolicyKind::Expanding => PolicyKind::Expanding,
        };
        let restart = make_state(&p.spec, input(restart, len, "restart")?)?;
        let x0 = if x0.is_null() {
            restart.clone()
        } else {
            make_state(&p.spec, input(x0, len, "x0")?)?
        };
        let policy = TrustRegionPolicy::from_shape(kind, shape, restart)?;
        let schedule = StepSchedule::new(schedule.a0, schedule.n0, schedule.gamma)?;
        let options = TraceOptions {
            record_every,
            state_every: None,
            kl: None,
            sigma_cap,
        };
        let trace = rm_run(
            &p.spec,
            &policy,
            &schedule,
            &x0,
            &mut p.spec.sampler(seed),
            n_iters,
            &options,
        )?;
        store(out, RmfitRun { trace })
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmfit_run_free(run: *mut RmfitRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

#[no_mangle]
pub unsafe extern "C" fn rmfit_run_final_state(run: *const RmfitRun, out: *mut f64, len: usize) -> RmfitStatus {
    guard(|| {
        let r = reference(run, "run")?;
        write_state(&r.trace.final_state, output(out, len, "out")?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmfit_run_truncations(run: *const RmfitRun) -> usize {
    run.as_ref().map_or(0, |r| r.trace.total_truncations)
}

#[no_mangle]
pub unsafe extern "C" fn rmfit_run_iterations(run: *const RmfitRun) -> usize {
    run.as_ref().map_or(0, |r| r.trace.iterations)
}

#[no_mangle]
pub unsafe extern "C" fn rmfit_run_record_count(run: *const RmfitRun) -> usize {
    run.as_ref().map_or(0, |r| r.trace.records.len())
}

#[no_mangle]
pub unsafe extern "C" fn rmfit_run_record(run: *const RmfitRun, index: usize, out: *mut RmfitRecord) -> RmfitStatus {
    guard(|| {
        let r = reference(run, "run")?;
        let rec = r.trace.records.get(index).ok_or_else(|| {
            Failure(
                RmfitStatus::InvalidArgument,
                format!("record {index} out of range (have {})", r.trace.records.len()),
            )
        })?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = RmfitRecord {
            n: rec.n,
            sigma: rec.sigma,
            step_size: rec.a,
            truncated: rec.truncated,
            non_finite: rec.non_finite,
            norm_x: rec.norm_x,
        };
        Ok(())
    })
}
