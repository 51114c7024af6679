//! C ABI over valvekit. Every fallible call returns a [`VkStatus`]; on failure a message is
//! available from [`vk_last_error`] on the same thread. Handles are opaque and must be released
//! with their matching `_free` function. Strings returned by the library are released with
//! [`vk_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use valvekit::manip::insertion_plan_for_angle;
use valvekit::mission::{run_mission, run_robustness, MissionRun, Outcome, RobustnessKind, Scenario};
use valvekit::valve::min_area_rect;
use valvekit::Error;

/// Result of a library call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Usage = 3,
    Io = 4,
    Format = 5,
    Geometry = 6,
    Perception = 7,
    Registration = 8,
    Internal = 9,
}

/// Outcome of one mission phase.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VkPhaseOutcome {
    Success = 0,
    Failure = 1,
    Skipped = 2,
}

/// Robustness sweep kind.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VkRobustnessKind {
    ValveDropout = 0,
    ValveNoise = 1,
    WrenchJitter = 2,
}

/// Opaque mission scenario.
pub struct VkScenario(Scenario);

/// Opaque result of a mission run.
pub struct VkMissionRun(MissionRun);

/// Minimum-area rectangle around a point set.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VkRotatedBox {
    pub center_x: f64,
    pub center_y: f64,
    /// Sorted side lengths, `extent_min <= extent_max`.
    pub extent_min: f64,
    pub extent_max: f64,
    /// Direction of one side in `[0, π/2)` (rad).
    pub angle: f64,
    pub area: f64,
}

/// Wrench insertion plan (rad).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VkInsertionPlan {
    pub approach_angle: f64,
    pub insertable_angles: [f64; 3],
    pub insertable_count: u32,
    pub turn_angle: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> VkStatus {
    match e {
        Error::InvalidInput(_) | Error::InvalidKeyframe(_) => VkStatus::InvalidInput,
        Error::Usage(_) => VkStatus::Usage,
        Error::Io(_) => VkStatus::Io,
        Error::Format(_) | Error::Json(_) => VkStatus::Format,
        Error::InvalidGeometry(_) | Error::DegenerateGeometry(_) => VkStatus::Geometry,
        Error::DegenerateRegistration | Error::RegistrationFailed => VkStatus::Registration,
        _ => VkStatus::Perception,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (VkStatus, String)>) -> VkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VkStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            VkStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (VkStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (VkStatus, String) {
    (VkStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (VkStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (VkStatus::InvalidInput, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn vk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by the library.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Built-in 50 m scenario.
#[no_mangle]
pub extern "C" fn vk_scenario_default() -> *mut VkScenario {
    Box::into_raw(Box::new(VkScenario(Scenario::default_50m())))
}

/// Parse a scenario from JSON text.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vk_scenario_from_json(json: *const c_char, out: *mut *mut VkScenario) -> VkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = Scenario::from_json(str_arg(json, "json")?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(VkScenario(s)));
        Ok(())
    })
}

/// Load a scenario file; a relative scene file resolves against its directory.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vk_scenario_load(path: *const c_char, out: *mut *mut VkScenario) -> VkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = Scenario::load(Path::new(str_arg(path, "path")?)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(VkScenario(s)));
        Ok(())
    })
}

/// # Safety
/// `scenario` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn vk_scenario_set_seed(scenario: *mut VkScenario, seed: u64) -> VkStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        s.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vk_scenario_free(scenario: *mut VkScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Run the full mission. Phase failures are not call failures: inspect the run.
///
/// # Safety
/// `scenario` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vk_mission_run(scenario: *const VkScenario, out: *mut *mut VkMissionRun) -> VkStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let run = run_mission(&s.0).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(VkMissionRun(run)));
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vk_mission_free(run: *mut VkMissionRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of phases in a report (always 12).
///
/// # Safety
/// `run` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn vk_mission_phase_count(run: *const VkMissionRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.report.phases.len())
}

/// Name, simulated duration (s) and outcome of phase `index`. `name` receives a static string.
///
/// # Safety
/// `run` must be a valid handle; output pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn vk_mission_phase(
    run: *const VkMissionRun,
    index: usize,
    name: *mut *const c_char,
    duration: *mut f64,
    outcome: *mut VkPhaseOutcome,
) -> VkStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let p = r.0.report.phases.get(index).ok_or_else(|| (VkStatus::InvalidInput, format!("phase index {index} out of range")))?;
        if !name.is_null() {
            *name = PHASE_NAMES[p.phase as usize].as_ptr();
        }
        if !duration.is_null() {
            *duration = p.duration;
        }
        if !outcome.is_null() {
            *outcome = match p.outcome {
                Outcome::Success => VkPhaseOutcome::Success,
                Outcome::Failure { .. } => VkPhaseOutcome::Failure,
                Outcome::Skipped => VkPhaseOutcome::Skipped,
            };
        }
        Ok(())
    })
}

const PHASE_NAMES: [&CStr; 12] = [
    c"Navigate",
    c"ApproachPanel",
    c"CyclePanel",
    c"ArrivePanel",
    c"SeeWrenches",
    c"SelectWrench",
    c"GraspWrench",
    c"SeeValve",
    c"DetectValve",
    c"ContactValve",
    c"InsertWrench",
    c"TurnValve",
];

/// Total simulated time (s), or NaN for a null handle.
///
/// # Safety
/// `run` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn vk_mission_total(run: *const VkMissionRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.0.report.total)
}

/// Whether every phase succeeded.
///
/// # Safety
/// `run` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn vk_mission_success(run: *const VkMissionRun) -> bool {
    run.as_ref().is_some_and(|r| r.0.report.success())
}

/// Report as JSON; release with [`vk_string_free`]. Null on failure.
///
/// # Safety
/// `run` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn vk_mission_report_json(run: *const VkMissionRun) -> *mut c_char {
    let mut out = ptr::null_mut();
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let json = r.0.report.to_json().map_err(lib_err)?;
        out = CString::new(json).map_err(|_| (VkStatus::Internal, "report contains NUL".into()))?.into_raw();
        Ok(())
    });
    out
}

/// Write report.json, trajectory.csv and compute.csv into `dir`.
///
/// # Safety
/// `run` must be a valid handle and `dir` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vk_mission_write(run: *const VkMissionRun, dir: *const c_char) -> VkStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        r.0.write(Path::new(str_arg(dir, "dir")?)).map_err(lib_err)
    })
}

/// Minimum-area enclosing rectangle of `n` points given as interleaved `x, y` pairs.
///
/// # Safety
/// `xy` must point to `2·n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vk_min_area_rect(xy: *const f64, n: usize, out: *mut VkRotatedBox) -> VkStatus {
    guard(|| {
        if xy.is_null() || out.is_null() {
            return Err(null("xy or out"));
        }
        let flat = std::slice::from_raw_parts(xy, 2 * n);
        let pts: Vec<[f64; 2]> = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let b = min_area_rect(&pts).map_err(lib_err)?;
        *out = VkRotatedBox {
            center_x: b.center[0],
            center_y: b.center[1],
            extent_min: b.extents[0],
            extent_max: b.extents[1],
            angle: b.angle,
            area: b.area(),
        };
        Ok(())
    })
}

/// Insertion plan for a stem rolled by `stem_angle` (rad).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vk_insertion_plan(stem_angle: f64, out: *mut VkInsertionPlan) -> VkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !stem_angle.is_finite() {
            return Err((VkStatus::InvalidInput, "stem angle is not finite".into()));
        }
        let p = insertion_plan_for_angle(stem_angle);
        let mut angles = [0.0; 3];
        angles[..p.insertable_angles.len()].copy_from_slice(&p.insertable_angles);
        *out = VkInsertionPlan {
            approach_angle: p.approach_angle,
            insertable_angles: angles,
            insertable_count: p.insertable_angles.len() as u32,
            turn_angle: p.turn_angle,
        };
        Ok(())
    })
}

/// Success rate at each of the `n` grid values, written to `rates`.
///
/// # Safety
/// `grid` and `rates` must each point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn vk_robustness(
    kind: VkRobustnessKind,
    grid: *const f64,
    n: usize,
    repeats: usize,
    seed: u64,
    rates: *mut f64,
) -> VkStatus {
    guard(|| {
        if n > 0 && (grid.is_null() || rates.is_null()) {
            return Err(null("grid or rates"));
        }
        let grid = if n == 0 { &[][..] } else { std::slice::from_raw_parts(grid, n) };
        let kind = match kind {
            VkRobustnessKind::ValveDropout => RobustnessKind::ValveDropout,
            VkRobustnessKind::ValveNoise => RobustnessKind::ValveNoise,
            VkRobustnessKind::WrenchJitter => RobustnessKind::WrenchJitter,
        };
        let rows = run_robustness(kind, grid, repeats, seed).map_err(lib_err)?;
        for (i, r) in rows.iter().enumerate() {
            *rates.add(i) = r.success_rate;
        }
        Ok(())
    })
}
