//! C ABI for `pacomm`.
//!
//! Objects are opaque heap handles created by `*_new`/`*_parse` functions and
//! released with the matching `*_free`. Every function returns a
//! [`PacommStatus`]; on failure a message is available from
//! [`pacomm_last_error_message`] on the same thread. Array outputs take a
//! capacity and report the required length, so callers can size buffers with
//! a first call and a zero capacity.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pacomm::field::find_stationary_points;
use pacomm::sim::Colors;
use pacomm::{
    CommunityStructure, Error, FixedPointKind, FixedPointSet, Linearity, Simulation, TypeRule,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacommStatus {
    Ok = 0,
    NullPointer = 1,
    Invalid = 2,
    Numeric = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacommFixedPointKind {
    Stable = 0,
    Unstable = 1,
    Touchpoint = 2,
    BoundaryStable = 3,
    BoundaryUnstable = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacommStability {
    LinearlyStable = 0,
    LinearlyUnstable = 1,
    Marginal = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacommColors {
    /// Fair coin per seed vertex.
    Random = 0,
    /// One red and one blue seed vertex per community.
    Balanced = 1,
}

pub struct PacommRule(TypeRule);

pub struct PacommStructure(CommunityStructure);

pub struct PacommSimulation(Simulation);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(PacommStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_numeric() {
            PacommStatus::Numeric
        } else {
            PacommStatus::Invalid
        };
        Failure(status, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn null(name: &str) -> Failure {
    Failure(PacommStatus::NullPointer, format!("`{name}` is null"))
}

fn guard(f: impl FnOnce() -> Outcome) -> PacommStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PacommStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PacommStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn get_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, name: &str) -> Outcome {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

/// Writes `values` into `out[..cap]` and the length into `*len_out`. Fails
/// with `BufferTooSmall` (after setting `*len_out`) when `cap` is short.
unsafe fn put_array<T: Copy>(
    values: &[T],
    out: *mut T,
    cap: usize,
    len_out: *mut usize,
    name: &str,
) -> Outcome {
    if !len_out.is_null() {
        len_out.write(values.len());
    }
    if values.len() > cap {
        return Err(Failure(
            PacommStatus::BufferTooSmall,
            format!("`{name}` holds {cap} values, {} needed", values.len()),
        ));
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null(name));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

fn kind_code(k: FixedPointKind) -> PacommFixedPointKind {
    match k {
        FixedPointKind::Stable => PacommFixedPointKind::Stable,
        FixedPointKind::Unstable => PacommFixedPointKind::Unstable,
        FixedPointKind::Touchpoint => PacommFixedPointKind::Touchpoint,
        FixedPointKind::BoundaryStable => PacommFixedPointKind::BoundaryStable,
        FixedPointKind::BoundaryUnstable => PacommFixedPointKind::BoundaryUnstable,
    }
}

fn stability_code(s: Linearity) -> PacommStability {
    match s {
        Linearity::LinearlyStable => PacommStability::LinearlyStable,
        Linearity::LinearlyUnstable => PacommStability::LinearlyUnstable,
        Linearity::Marginal => PacommStability::Marginal,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pacomm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the most recent failed call on this thread, or NULL. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pacomm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a rule such as `"majority:m=3"` or `"explicit:p=[0,0.2,0.8,1]"`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pacomm_rule_parse(
    spec: *const c_char,
    out: *mut *mut PacommRule,
) -> PacommStatus {
    guard(|| {
        if spec.is_null() {
            return Err(null("spec"));
        }
        let text = CStr::from_ptr(spec)
            .to_str()
            .map_err(|_| Failure(PacommStatus::Invalid, "rule is not valid UTF-8".into()))?;
        let rule: TypeRule = text.parse()?;
        put(out, Box::into_raw(Box::new(PacommRule(rule))), "out")
    })
}

/// Rule from the probabilities `p[0..len]`, so `m = len - 1`.
///
/// # Safety
/// `p` must point to `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pacomm_rule_explicit(
    p: *const f64,
    len: usize,
    out: *mut *mut PacommRule,
) -> PacommStatus {
    guard(|| {
        let p = slice(p, len, "p")?;
        let rule = TypeRule::explicit(p.to_vec())?;
        put(out, Box::into_raw(Box::new(PacommRule(rule))), "out")
    })
}

/// # Safety
/// `rule` must come from this library and not be used afterwards. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn pacomm_rule_free(rule: *mut PacommRule) {
    if !rule.is_null() {
        drop(Box::from_raw(rule));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pacomm_rule_m(rule: *const PacommRule, m_out: *mut usize) -> PacommStatus {
    guard(|| put(m_out, get(rule, "rule")?.0.m(), "m_out"))
}

/// `R(z)` for `z` in `[0, 1]`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pacomm_rule_eval(
    rule: *const PacommRule,
    z: f64,
    value_out: *mut f64,
) -> PacommStatus {
    guard(|| {
        let rule = &get(rule, "rule")?.0;
        if !(0.0..=1.0).contains(&z) {
            return Err(Failure(
                PacommStatus::Invalid,
                format!("z = {z} is outside [0, 1]"),
            ));
        }
        put(value_out, rule.eval(z), "value_out")
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pacomm_rule_is_linear(
    rule: *const PacommRule,
    linear_out: *mut bool,
) -> PacommStatus {
    guard(|| put(linear_out, get(rule, "rule")?.0.is_linear(), "linear_out"))
}

/// Fixed points of `R` in `[0, 1]`, ascending, with their kinds. Linear rules
/// fix every point and return `Invalid`.
///
/// # Safety
/// `z_out` and `kind_out` must hold `cap` elements (either may be NULL when
/// `cap` is 0); `count_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pacomm_rule_fixed_points(
    rule: *const PacommRule,
    z_out: *mut f64,
    kind_out: *mut PacommFixedPointKind,
    cap: usize,
    count_out: *mut usize,
) -> PacommStatus {
    guard(|| {
        let rule = &get(rule, "rule")?.0;
        if count_out.is_null() {
            return Err(null("count_out"));
        }
        let points = match rule.fixed_points()? {
            FixedPointSet::Continuum => {
                return Err(Failure(
                    PacommStatus::Invalid,
                    "linear rule: every point of [0, 1] is fixed".into(),
                ))
            }
            FixedPointSet::Isolated(points) => points,
        };
        let z: Vec<f64> = points.iter().map(|p| p.z).collect();
        let kinds: Vec<PacommFixedPointKind> = points.iter().map(|p| kind_code(p.kind)).collect();
        put_array(&z, z_out, cap, count_out, "z_out")?;
        put_array(&kinds, kind_out, cap, count_out, "kind_out")
    })
}

/// Structure from a row-major `n x n` attractiveness matrix and community
/// measure `mu` (NULL for uniform).
///
/// # Safety
/// `a` must hold `n * n` doubles, `mu` NULL or `n` doubles, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pacomm_structure_new(
    a: *const f64,
    mu: *const f64,
    n: usize,
    out: *mut *mut PacommStructure,
) -> PacommStatus {
    guard(|| {
        let len = n
            .checked_mul(n)
            .ok_or_else(|| Failure(PacommStatus::Invalid, "n is too large".into()))?;
        let a = slice(a, len, "a")?;
        let rows: Vec<Vec<f64>> = a.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let cs = if mu.is_null() {
            CommunityStructure::uniform(&rows)?
        } else {
            CommunityStructure::from_rows(&rows, slice(mu, n, "mu")?.to_vec())?
        };
        put(out, Box::into_raw(Box::new(PacommStructure(cs))), "out")
    })
}

/// # Safety
/// `structure` must come from this library and not be used afterwards. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn pacomm_structure_free(structure: *mut PacommStructure) {
    if !structure.is_null() {
        drop(Box::from_raw(structure));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pacomm_structure_n(
    structure: *const PacommStructure,
    n_out: *mut usize,
) -> PacommStatus {
    guard(|| put(n_out, get(structure, "structure")?.0.n(), "n_out"))
}

/// Limiting edge-end measure `nu`, one value per community.
///
/// # Safety
/// `nu_out` must hold `cap` doubles; `len_out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn pacomm_structure_solve_nu(
    structure: *const PacommStructure,
    nu_out: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> PacommStatus {
    guard(|| {
        let nu = get(structure, "structure")?.0.solve_nu()?;
        put_array(&nu.nu, nu_out, cap, len_out, "nu_out")
    })
}

/// Stationary points of the restricted mean-field flow found by multistart
/// Newton on a `grid^n` lattice (`grid = 0` picks a default). Point `k` is
/// `z_out[k*n .. (k+1)*n]`; `cap` counts points, not doubles.
///
/// # Safety
/// `z_out` must hold `cap * n` doubles, `max_re_out` and `stability_out`
/// `cap` elements each (NULL allowed when `cap` is 0); `count_out` valid.
#[no_mangle]
pub unsafe extern "C" fn pacomm_stationary_points(
    rule: *const PacommRule,
    structure: *const PacommStructure,
    grid: usize,
    z_out: *mut f64,
    max_re_out: *mut f64,
    stability_out: *mut PacommStability,
    cap: usize,
    count_out: *mut usize,
) -> PacommStatus {
    guard(|| {
        let rule = &get(rule, "rule")?.0;
        let cs = &get(structure, "structure")?.0;
        if count_out.is_null() {
            return Err(null("count_out"));
        }
        let points = find_stationary_points(rule, cs, (grid > 0).then_some(grid))?;
        count_out.write(points.len());
        if points.len() > cap {
            return Err(Failure(
                PacommStatus::BufferTooSmall,
                format!("room for {cap} stationary points, {} found", points.len()),
            ));
        }
        let z: Vec<f64> = points.iter().flat_map(|p| p.z.iter().copied()).collect();
        let max_re: Vec<f64> = points.iter().map(|p| p.max_re).collect();
        let stability: Vec<PacommStability> =
            points.iter().map(|p| stability_code(p.stability)).collect();
        let mut len = 0;
        put_array(&z, z_out, cap * cs.n(), &mut len, "z_out")?;
        put_array(&max_re, max_re_out, cap, &mut len, "max_re_out")?;
        put_array(&stability, stability_out, cap, &mut len, "stability_out")
    })
}

/// New simulation from copies of `rule` and `structure`, starting from the
/// default initial graph.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pacomm_simulation_new(
    rule: *const PacommRule,
    structure: *const PacommStructure,
    seed: u64,
    colors: PacommColors,
    out: *mut *mut PacommSimulation,
) -> PacommStatus {
    guard(|| {
        let rule = get(rule, "rule")?.0.clone();
        let cs = get(structure, "structure")?.0.clone();
        let colors = match colors {
            PacommColors::Random => Colors::Random,
            PacommColors::Balanced => Colors::Balanced,
        };
        let sim = Simulation::new(rule, cs, &colors, seed)?;
        put(out, Box::into_raw(Box::new(PacommSimulation(sim))), "out")
    })
}

/// # Safety
/// `sim` must come from this library and not be used afterwards. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn pacomm_simulation_free(sim: *mut PacommSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Adds `steps` newcomers.
///
/// # Safety
/// `sim` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pacomm_simulation_step(
    sim: *mut PacommSimulation,
    steps: u64,
) -> PacommStatus {
    guard(|| {
        let sim = &mut get_mut(sim, "sim")?.0;
        for _ in 0..steps {
            sim.step();
        }
        Ok(())
    })
}

/// Current time `n` (initial graph size plus newcomers).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pacomm_simulation_n(
    sim: *const PacommSimulation,
    n_out: *mut u64,
) -> PacommStatus {
    guard(|| put(n_out, get(sim, "sim")?.0.state().n(), "n_out"))
}

/// Red fraction of edge ends per community, `Z_i`.
///
/// # Safety
/// `z_out` must hold `cap` doubles; `len_out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn pacomm_simulation_z(
    sim: *const PacommSimulation,
    z_out: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> PacommStatus {
    guard(|| {
        put_array(
            &get(sim, "sim")?.0.state().z(),
            z_out,
            cap,
            len_out,
            "z_out",
        )
    })
}

/// Share of all edge ends held by each community, `Y_i`.
///
/// # Safety
/// `y_out` must hold `cap` doubles; `len_out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn pacomm_simulation_y(
    sim: *const PacommSimulation,
    y_out: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> PacommStatus {
    guard(|| {
        put_array(
            &get(sim, "sim")?.0.state().y(),
            y_out,
            cap,
            len_out,
            "y_out",
        )
    })
}
