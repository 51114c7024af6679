#![allow(dead_code)]

use rand::Rng;
use std::f64::consts::PI;
use valvekit::geom::{Pose2, Pose6};
use valvekit::rng::rng_from_seed;
use valvekit::scan_sim::{BoxObject, PanelGeometry, Rect, Scene};

pub const SENSOR_HEIGHT: f64 = 1.0;

pub fn arena() -> Rect {
    Rect::new(-60.0, -60.0, 60.0, 60.0)
}

pub fn sensor_at_origin() -> Pose6 {
    Pose6::from_translation(0.0, 0.0, SENSOR_HEIGHT)
}

/// Panel placed straight ahead of the origin sensor, roughly facing it.
pub fn panel_ahead(seed: u64) -> (Scene, Pose2) {
    let mut rng = rng_from_seed(seed);
    let d: f64 = rng.random_range(5.0..40.0);
    let bearing: f64 = rng.random_range(-5f64..5.0).to_radians();
    let yaw_off: f64 = rng.random_range(-10f64..10.0).to_radians();
    let pose = Pose2::new(d * bearing.cos(), d * bearing.sin(), bearing + PI + yaw_off);
    let mut scene = Scene::new(arena());
    scene.objects = PanelGeometry::default().boxes_at(&pose);
    (scene, pose)
}

/// A single box of the given width straight ahead, facing the sensor within ±20°.
pub fn clutter_ahead(seed: u64, width: f64) -> (Scene, Pose2) {
    let mut rng = rng_from_seed(seed);
    let d: f64 = rng.random_range(5.0..40.0);
    let bearing: f64 = rng.random_range(-5f64..5.0).to_radians();
    let yaw_off: f64 = rng.random_range(-20f64..20.0).to_radians();
    let pose = Pose2::new(d * bearing.cos(), d * bearing.sin(), bearing + PI + yaw_off);
    let mut scene = Scene::new(arena());
    scene.objects.push(BoxObject::new([pose.x, pose.y, 0.6], [0.3, width, 1.2], pose.yaw));
    (scene, pose)
}

/// Panel at a random pose 4–12 m from the origin sensor, any bearing and yaw.
pub fn panel_random(seed: u64) -> (Scene, Pose2) {
    let mut rng = rng_from_seed(seed);
    let d: f64 = rng.random_range(4.0..12.0);
    let bearing: f64 = rng.random_range(-PI..PI);
    let yaw: f64 = rng.random_range(-PI..PI);
    let pose = Pose2::new(d * bearing.cos(), d * bearing.sin(), yaw);
    let mut scene = Scene::new(arena());
    scene.objects = PanelGeometry::default().boxes_at(&pose);
    (scene, pose)
}

/// Scan returns within `radius` of `center` (planar) and above the ground.
pub fn points_near(scan: &valvekit::scan_sim::Scan, center: [f64; 2], radius: f64) -> Vec<nalgebra::Point3<f64>> {
    scan.points()
        .into_iter()
        .filter(|p| (p.x - center[0]).hypot(p.y - center[1]) < radius && p.z > 0.02)
        .collect()
}
