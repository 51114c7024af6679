mod common;

use common::*;
use nalgebra::Point3;
use rand::Rng;
use std::f64::consts::PI;
use std::io::Write;
use std::process::Command;
use valvekit::approach::{circle_command, rsgn, simulate_approach, BaseState, ControllerParams, ControllerState};
use valvekit::detector::{detect_panels, kernel_sizes, DetectorParams};
use valvekit::geom::{angle_diff, Pose2};
use valvekit::manip::insertion_plan_for_angle;
use valvekit::mission::{run_robustness, wrench_trial, RobustnessKind, WrenchSetup};
use valvekit::registration::{register_panel, PanelModel, RegistrationParams};
use valvekit::rng::rng_from_seed;
use valvekit::scan_sim::{raycast_scan, LidarModel, PanelGeometry};
use valvekit::valve::{area_at_angle, min_area_rect};
use valvekit::wrench::stereo_agree;

type Verdict = (bool, String);

fn lidar() -> LidarModel {
    LidarModel { range_noise_sigma: 0.01, ..LidarModel::default() }
}

fn detector_recall_and_rejection() -> Verdict {
    let params = DetectorParams::panel();
    let hits = (0..100u64)
        .filter(|&seed| {
            let (scene, pose) = panel_ahead(seed);
            let scan = raycast_scan(&scene, &sensor_at_origin(), &lidar(), seed);
            detect_panels(&scan, &params).iter().any(|c| (c.centroid.x - pose.x).hypot(c.centroid.y - pose.y) < 1.0)
        })
        .count();
    let false_clusters = |width: f64| -> usize {
        (0..100u64)
            .map(|seed| {
                let (scene, _) = clutter_ahead(seed + 1000, width);
                detect_panels(&raycast_scan(&scene, &sensor_at_origin(), &lidar(), seed), &params).len()
            })
            .sum()
    };
    let (narrow, wide) = (false_clusters(0.25), false_clusters(4.0));
    (hits >= 95 && narrow <= 5 && wide <= 5, format!("recall {hits}/100, false clusters {narrow}/100 at 0.25x, {wide}/100 at 4x"))
}

fn kernel_table() -> Verdict {
    let cases: [(f64, f64, f64, usize, usize); 10] = [
        (0.5, 10.0, 0.2, 29, 45),
        (0.5, 5.0, 0.2, 59, 89),
        (1e-6, 10.0, 0.2, 3, 5),
        (1.0, 5.0, 0.2, 115, 173),
        (1.0, 40.0, 0.2, 15, 23),
        (0.8, 7.5, 0.2, 63, 95),
        (0.25, 3.0, 0.1, 97, 147),
        (2.0, 12.0, 0.4, 49, 75),
        (0.3, 30.0, 0.2, 7, 11),
        (0.8, 40.0, 0.2, 13, 21),
    ];
    let wrong: Vec<String> = cases
        .iter()
        .filter_map(|&(w, d, step, noise, bg)| match kernel_sizes(w, d, step.to_radians()) {
            Ok(got) if got == (noise, bg) => None,
            other => Some(format!("w={w} d={d}: {other:?}")),
        })
        .collect();
    (wrong.is_empty(), format!("{}/10 exact {}", 10 - wrong.len(), wrong.join("; ")))
}

fn registration_accuracy() -> Verdict {
    let model = PanelModel::from_geometry(&PanelGeometry::default(), 0.05).unwrap();
    let params = RegistrationParams::default();
    let (mut ok, mut front_back) = (0, 0);
    for seed in 0..100u64 {
        let (scene, truth) = panel_random(seed);
        let scan = raycast_scan(&scene, &sensor_at_origin(), &lidar(), seed);
        let cluster = points_near(&scan, [truth.x, truth.y], 1.2);
        if let Ok(p) = register_panel(&model, &cluster, &scan.sensor_pose, &params) {
            let dyaw = angle_diff(p.yaw, truth.yaw).abs();
            ok += ((p.x - truth.x).hypot(p.y - truth.y) <= 0.10 && dyaw <= 5f64.to_radians()) as usize;
            front_back += (dyaw < 0.5 * PI) as usize;
        }
    }
    (ok >= 95 && front_back >= 90, format!("{ok}/100 within 10 cm and 5 deg, front/back {front_back}/100"))
}

fn approach_from_50m() -> Verdict {
    let params = ControllerParams::default();
    let panel = Pose2::new(0.0, 0.0, 0.0);
    let trace = simulate_approach(&BaseState::at(&Pose2::new(-50.0, 0.0, 0.0)), vec![panel], &params, 0.02, 120.0, move |b: &BaseState| {
        ((b.x - panel.x).hypot(b.y - panel.y) <= 30.0).then_some(panel)
    });
    let trace = match trace {
        Ok(t) => t,
        Err(e) => return (false, format!("simulation failed: {e}")),
    };
    let max_speed = trace.samples.iter().map(|s| s.speed).fold(0.0, f64::max);
    let faded = trace.samples.iter().position(|s| s.alpha >= 1.0);
    let max_bearing = faded.map(|i| trace.samples[i..].iter().filter_map(|s| s.bearing).map(f64::abs).fold(0.0, f64::max));
    let pass = trace.front_time.is_some_and(|t| (12.0..=40.0).contains(&t))
        && max_speed <= 4.17
        && max_bearing.is_some_and(|b| b <= 15f64.to_radians());
    (
        pass,
        format!(
            "front at {:?} s, max speed {max_speed:.3} m/s, max bearing after fade-in {:?} deg",
            trace.front_time.map(|t| (t * 100.0).round() / 100.0),
            max_bearing.map(|b| (b.to_degrees() * 100.0).round() / 100.0)
        ),
    )
}

/// Hysteresis signum as a two-state automaton.
fn rsgn_oracle(trace: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(trace.len());
    let mut state: Option<f64> = None;
    for &p in trace {
        let s = if p > h / 2.0 {
            1.0
        } else if p < -h / 2.0 {
            -1.0
        } else {
            state.unwrap_or(if p >= 0.0 { 1.0 } else { -1.0 })
        };
        state = Some(s);
        out.push(s);
    }
    out
}

fn controller_commands() -> Verdict {
    let params = ControllerParams::default();
    let mut state = ControllerState { alpha: 1.0, rsgn_sign: Some(1.0), ..Default::default() };
    let cmd = circle_command(&Pose2::new(10.0, 0.0, PI - 0.5), &params, &mut state, 0.02);
    let exact_vy = 2.0 * PI * params.circle_radius / params.period;
    let commands_ok = cmd.vx == 0.8 && (cmd.vy - exact_vy).abs() <= 1e-9 && (cmd.vy - 1.5708).abs() < 1e-4;

    let h = params.hysteresis;
    let mut rng = rng_from_seed(55);
    let mut p = 0.0;
    let trace: Vec<f64> = (0..20_000)
        .map(|_| {
            p = (p + rng.random_range(-0.3 * h..0.3 * h)).clamp(-2.0 * h, 2.0 * h);
            p
        })
        .collect();
    let mut st = ControllerState::default();
    let got: Vec<f64> = trace.iter().map(|&x| rsgn(x, &mut st, h)).collect();
    let trace_ok = got == rsgn_oracle(&trace, h);
    let mut st = ControllerState::default();
    let example: Vec<f64> = [15f64, 5.0, -5.0, -15.0].iter().map(|d| rsgn(d.to_radians(), &mut st, 20f64.to_radians())).collect();
    let example_ok = example == [1.0, 1.0, 1.0, -1.0];
    (
        commands_ok && trace_ok && example_ok,
        format!("vx {} vy {:.10} (exact {:.10}), rsgn trace {} of 20000, example {example:?}", cmd.vx, cmd.vy, exact_vy, if trace_ok { "matches" } else { "differs" }),
    )
}

fn oracle_area(pts: &[[f64; 2]]) -> (f64, f64) {
    let step = 0.01f64.to_radians();
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for i in 0..9000 {
        let a = area_at_angle(pts, i as f64 * step);
        if a < best {
            best = a;
            best_i = i;
        }
    }
    let (mut lo, mut hi) = ((best_i as f64 - 1.0) * step, (best_i as f64 + 1.0) * step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let (m1, m2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if area_at_angle(pts, m1) < area_at_angle(pts, m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    (best, best.min(area_at_angle(pts, 0.5 * (lo + hi))))
}

fn random_point_set(seed: u64) -> Vec<[f64; 2]> {
    let mut rng = rng_from_seed(seed);
    let n = rng.random_range(3..=500usize);
    let (sx, sy) = (rng.random_range(0.01..2.0), rng.random_range(0.01..2.0));
    let (s, c) = rng.random_range(0.0..PI).sin_cos();
    let ring = seed % 3 == 0;
    (0..n)
        .map(|_| {
            let (u, v) = if ring {
                let t: f64 = rng.random_range(0.0..2.0 * PI);
                (t.cos(), t.sin())
            } else {
                (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            };
            let (x, y) = (sx * u, sy * v);
            [c * x - s * y + 3.0, s * x + c * y - 1.0]
        })
        .collect()
}

fn calipers_vs_brute_force() -> Verdict {
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get());
    let failures: Vec<String> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                scope.spawn(move || {
                    let mut bad = Vec::new();
                    for seed in (t as u64..1000).step_by(threads) {
                        let pts = random_point_set(seed);
                        match min_area_rect(&pts) {
                            Ok(b) => {
                                let (grid, refined) = oracle_area(&pts);
                                let ok = b.area() <= grid * (1.0 + 1e-9)
                                    && (b.area() - refined).abs() <= 1e-6 * refined
                                    && pts.iter().all(|&p| b.contains(p, 1e-9));
                                if !ok {
                                    bad.push(format!("set {seed}: {} vs {refined}", b.area()));
                                }
                            }
                            Err(e) => bad.push(format!("set {seed}: {e}")),
                        }
                    }
                    bad
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    (failures.is_empty(), format!("{}/1000 within 1e-6 of brute force with containment {}", 1000 - failures.len(), failures.join("; ")))
}

fn valve_robustness() -> Verdict {
    let dropout: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
    let noise = [0.0, 0.001, 0.002, 0.003, 0.004, 0.005, 0.006, 0.007, 0.02];
    let (d, n) = match (run_robustness(RobustnessKind::ValveDropout, &dropout, 5, 0), run_robustness(RobustnessKind::ValveNoise, &noise, 5, 0)) {
        (Ok(d), Ok(n)) => (d, n),
        (Err(e), _) | (_, Err(e)) => return (false, format!("sweep failed: {e}")),
    };
    let rate = |rows: &[valvekit::mission::RobustnessRow], x: f64| rows.iter().find(|r| (r.param - x).abs() < 1e-12).map_or(f64::NAN, |r| r.success_rate);
    let low_ok = d.iter().filter(|r| r.param <= 0.5 + 1e-12).all(|r| r.success_rate == 1.0)
        && n.iter().filter(|r| r.param <= 0.007 + 1e-12).all(|r| r.success_rate == 1.0);
    let high_ok = rate(&d, 0.9) <= 0.9 && rate(&n, 0.02) <= 0.9;
    (
        low_ok && high_ok,
        format!(
            "rate 1.0 up to p=0.5 and sigma=7 mm: {low_ok}, rate at p=0.9 {}, at sigma=20 mm {}",
            rate(&d, 0.9),
            rate(&n, 0.02)
        ),
    )
}

fn wrench_selection() -> Verdict {
    let rate = wrench_trial(&WrenchSetup::default(), 0.005, 100, 0);
    let a = Point3::new(0.3, 0.2, 1.0);
    let accept = stereo_agree(&a, &Point3::new(0.32, 0.2, 1.0), 0.025).is_some();
    let reject = stereo_agree(&a, &Point3::new(0.33, 0.2, 1.0), 0.025).is_none();
    let pass = rate.as_ref().is_ok_and(|r| *r == 1.0) && accept && reject;
    (pass, format!("success rate {rate:?} over 100 scenes, stereo accepts 2 cm: {accept}, rejects 3 cm: {reject}"))
}

fn insertion_angles() -> Verdict {
    let mut bad = Vec::new();
    for k in -1800i32..=1800 {
        let phi = (k as f64 / 10.0).to_radians();
        let plan = insertion_plan_for_angle(phi);
        let want = if k % 900 == 0 { 3 } else { 2 };
        let offset_ok = plan.insertable_angles.iter().any(|&a| ((plan.approach_angle - a).abs() - PI / 4.0).abs() < 1e-9);
        if plan.insertable_angles.len() != want || !offset_ok {
            bad.push(k);
        }
    }
    (bad.is_empty(), format!("{}/3601 stem angles correct {:?}", 3601 - bad.len(), bad.iter().take(5).collect::<Vec<_>>()))
}

fn mission_determinism() -> Verdict {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_mission")).args(["run", "default", "--seed", "1", "--out"]).arg(d.path()).output();
        if !status.as_ref().is_ok_and(|o| o.status.success()) {
            return (false, format!("mission run failed: {:?}", status.map(|o| o.status)));
        }
    }
    let same = |name: &str| std::fs::read(dirs[0].path().join(name)).unwrap() == std::fs::read(dirs[1].path().join(name)).unwrap();
    let (report, traj) = (same("report.json"), same("trajectory.csv"));
    (report && traj, format!("report.json identical: {report}, trajectory.csv identical: {traj}"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("detector recall and width rejection", detector_recall_and_rejection),
        ("kernel size table", kernel_table),
        ("registration accuracy", registration_accuracy),
        ("approach from 50 m", approach_from_50m),
        ("circling commands and hysteresis", controller_commands),
        ("rotating calipers vs brute force", calipers_vs_brute_force),
        ("valve perception robustness", valve_robustness),
        ("wrench selection and stereo", wrench_selection),
        ("insertion angles", insertion_angles),
        ("mission determinism", mission_determinism),
    ];
    let verdicts: Vec<Verdict> = std::thread::scope(|scope| {
        let handles: Vec<_> = criteria.iter().map(|(_, f)| scope.spawn(f)).collect();
        handles.into_iter().map(|h| h.join().unwrap_or((false, "panicked".into()))).collect()
    });
    // Written to the raw handle so the lines appear even when the harness captures output.
    let mut err = std::io::stderr().lock();
    for (i, ((name, _), (pass, detail))) in criteria.iter().zip(&verdicts).enumerate() {
        writeln!(err, "{} {:>2} {name}: {detail}", if *pass { "PASS" } else { "FAIL" }, i + 1).unwrap();
    }
    drop(err);
    let failed: Vec<usize> = verdicts.iter().enumerate().filter(|(_, v)| !v.0).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
