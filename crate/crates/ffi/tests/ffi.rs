use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;
use valvekit_ffi::*;

fn last_error() -> String {
    let p = vk_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn calipers_and_insertion() {
    let square = [0.0, 0.0, 2.0, 0.0, 2.0, 1.0, 0.0, 1.0];
    let mut b = VkRotatedBox::default();
    assert_eq!(unsafe { vk_min_area_rect(square.as_ptr(), 4, &mut b) }, VkStatus::Ok);
    assert!((b.area - 2.0).abs() < 1e-12 && (b.extent_min - 1.0).abs() < 1e-12);
    let collinear = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0];
    assert_eq!(unsafe { vk_min_area_rect(collinear.as_ptr(), 3, &mut b) }, VkStatus::Geometry);
    assert!(last_error().contains("degenerate"));
    assert_eq!(unsafe { vk_min_area_rect(ptr::null(), 3, &mut b) }, VkStatus::NullPointer);

    let mut p = VkInsertionPlan::default();
    assert_eq!(unsafe { vk_insertion_plan(std::f64::consts::FRAC_PI_4, &mut p) }, VkStatus::Ok);
    assert_eq!(p.insertable_count, 2);
    assert!(p.approach_angle.abs() < 1e-12);
    assert_eq!(unsafe { vk_insertion_plan(f64::NAN, &mut p) }, VkStatus::InvalidInput);
}

#[test]
fn scenario_and_mission_handles() {
    let s = vk_scenario_default();
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { vk_mission_run(s, &mut run) }, VkStatus::Ok);
    unsafe {
        assert!(vk_mission_success(run));
        assert_eq!(vk_mission_phase_count(run), 12);
        let total = vk_mission_total(run);
        let mut sum = 0.0;
        for i in 0..12 {
            let (mut name, mut d, mut o) = (ptr::null(), 0.0, VkPhaseOutcome::Skipped);
            assert_eq!(vk_mission_phase(run, i, &mut name, &mut d, &mut o), VkStatus::Ok);
            assert_eq!(o, VkPhaseOutcome::Success);
            sum += d;
            if i == 0 {
                assert_eq!(CStr::from_ptr(name).to_str().unwrap(), "Navigate");
            }
        }
        assert_eq!(sum, total);
        assert_eq!(vk_mission_phase(run, 12, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), VkStatus::InvalidInput);
        let json = vk_mission_report_json(run);
        assert!(CStr::from_ptr(json).to_str().unwrap().contains("\"TurnValve\""));
        vk_string_free(json);
        let dir = tempfile::tempdir().unwrap();
        let c = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(vk_mission_write(run, c.as_ptr()), VkStatus::Ok);
        assert!(dir.path().join("trajectory.csv").exists());
        vk_mission_free(run);
        vk_scenario_free(s);
    }
}

#[test]
fn scenario_json_errors() {
    let mut s = ptr::null_mut();
    let bad = CString::new("{\"name\": 3}").unwrap();
    assert_eq!(unsafe { vk_scenario_from_json(bad.as_ptr(), &mut s) }, VkStatus::Format);
    assert!(s.is_null());
    assert_eq!(unsafe { vk_scenario_from_json(ptr::null(), &mut s) }, VkStatus::NullPointer);
    let missing = CString::new("/nonexistent/scenario.json").unwrap();
    assert_eq!(unsafe { vk_scenario_load(missing.as_ptr(), &mut s) }, VkStatus::Io);
    let json = CString::new(valvekit::mission::Scenario::default_50m().to_json().unwrap()).unwrap();
    assert_eq!(unsafe { vk_scenario_from_json(json.as_ptr(), &mut s) }, VkStatus::Ok);
    assert_eq!(unsafe { vk_scenario_set_seed(s, 9) }, VkStatus::Ok);
    unsafe { vk_scenario_free(s) };
}

#[test]
fn robustness_sweep() {
    let grid = [0.0, 0.5];
    let mut rates = [f64::NAN; 2];
    let st = unsafe { vk_robustness(VkRobustnessKind::ValveDropout, grid.as_ptr(), 2, 5, 1, rates.as_mut_ptr()) };
    assert_eq!(st, VkStatus::Ok);
    assert_eq!(rates, [1.0, 1.0]);
    let st = unsafe { vk_robustness(VkRobustnessKind::ValveDropout, ptr::null(), 0, 5, 1, ptr::null_mut()) };
    assert_eq!(st, VkStatus::Usage);
}

/// Build the static library, then compile and run the C smoke program against the generated
/// header. Cargo has released the build lock by the time tests run, so the nested build reuses
/// the workspace target directory.
#[test]
fn c_program_links_and_runs() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // The test binary lives in <target>/<profile>/deps.
    let target = std::env::current_exe().unwrap().ancestors().nth(3).unwrap().to_path_buf();
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let status = Command::new(cargo)
        .args(["build", "--quiet", "-p", "valvekit-ffi", "--lib", "--target-dir"])
        .arg(&target)
        .current_dir(&root)
        .status()
        .expect("cargo");
    assert!(status.success());
    let lib = target.join("debug/libvalvekit_ffi.a");
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(root.join("include"))
        .arg(root.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("TurnValve"));
}
