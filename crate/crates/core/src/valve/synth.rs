use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use super::StemPose;
use crate::geom::Pose6;
use crate::scan_sim::{render_depth_frame, BoxObject, DepthFrame, DepthFrameSpec, Rect, Scene};

/// Close-range valve view from the end-effector camera: a wrench mouth held above the stem
/// face, a mounting plate behind the stem and the ground beyond.
///
/// The scene is modelled with the stem axis vertical and the camera looking straight down,
/// so image right is world +x and image down is world -y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValveScene {
    pub stem_width: f64,
    pub stem_length: f64,
    /// Roll of the stem face in the image (rad).
    pub roll: f64,
    pub stem_depth: f64,
    pub mouth_depth: f64,
    pub plate_depth: f64,
    pub camera_height: f64,
    /// Stem position on the camera plane relative to the optical axis (m, image axes of the
    /// unrolled camera).
    pub stem_offset: [f64; 2],
    /// Camera roll about its optical axis (rad). The scene stays fixed, so a roll of `φ` turns
    /// the image content by `-φ`.
    pub camera_roll: f64,
}

impl Default for ValveScene {
    fn default() -> Self {
        Self {
            stem_width: 0.019,
            stem_length: 0.05,
            roll: 0.0,
            stem_depth: 0.15,
            mouth_depth: 0.12,
            plate_depth: 0.33,
            camera_height: 1.0,
            stem_offset: [0.0, 0.03],
            camera_roll: 0.0,
        }
    }
}

/// Mouth prong half-spacing, prong width, prong length and bridge depth (m, image axes).
const PRONG_HALF_SPACING: f64 = 0.019;
const PRONG_WIDTH: f64 = 0.012;
const PRONG_LENGTH: f64 = 0.03;
const BRIDGE: f64 = 0.012;
const MOUTH_BOTTOM: f64 = -0.01;
const WRENCH_THICKNESS: f64 = 0.004;

impl ValveScene {
    pub fn camera_pose(&self) -> Pose6 {
        Pose6::new(0.0, 0.0, self.camera_height, PI, 0.0, -self.camera_roll)
    }

    /// World point of camera-plane coordinates `(x, y)` of the unrolled camera at height `z`.
    fn world(&self, x: f64, y: f64, z: f64) -> [f64; 3] {
        [x, -y, z]
    }

    fn image_box(&self, center: [f64; 2], size: [f64; 2], roll: f64, top: f64, bottom: f64) -> BoxObject {
        let c = self.world(center[0], center[1], 0.5 * (top + bottom));
        BoxObject::new(c, [size[0], size[1], top - bottom], -roll)
    }

    pub fn scene(&self) -> Scene {
        let h = self.camera_height;
        let mut scene = Scene::new(Rect::new(-2.0, -2.0, 2.0, 2.0));
        let plate_top = h - self.plate_depth;
        let stem_top = h - self.stem_depth;
        let mouth_top = h - self.mouth_depth;
        scene.objects.push(self.image_box(self.stem_offset, [0.25, 0.25], 0.0, plate_top, 0.0).with_label("plate"));
        scene.objects.push(
            self.image_box(self.stem_offset, [self.stem_length, self.stem_width], self.roll, stem_top, plate_top).with_label("stem"),
        );
        let thick = WRENCH_THICKNESS;
        let prong_y = MOUTH_BOTTOM - 0.5 * PRONG_LENGTH;
        for sx in [-1.0, 1.0] {
            scene.objects.push(
                self.image_box([sx * PRONG_HALF_SPACING, prong_y], [PRONG_WIDTH, PRONG_LENGTH], 0.0, mouth_top, mouth_top - thick)
                    .with_label("mouth"),
            );
        }
        let bridge_y = MOUTH_BOTTOM - PRONG_LENGTH - 0.5 * BRIDGE;
        let bridge_w = 2.0 * PRONG_HALF_SPACING + PRONG_WIDTH;
        scene.objects.push(self.image_box([0.0, bridge_y], [bridge_w, BRIDGE], 0.0, mouth_top, mouth_top - thick).with_label("mouth"));
        let shaft_y = MOUTH_BOTTOM - PRONG_LENGTH - BRIDGE - 0.05;
        scene.objects.push(self.image_box([0.0, shaft_y], [0.015, 0.1], 0.0, mouth_top, mouth_top - thick).with_label("shaft"));
        scene
    }

    pub fn render(&self, spec: &DepthFrameSpec, seed: u64) -> DepthFrame {
        render_depth_frame(&self.scene(), &self.camera_pose(), spec, seed)
    }

    /// Camera-frame point of image-plane coordinates at optical depth `depth`.
    fn camera_point(&self, x: f64, y: f64, depth: f64) -> Point3<f64> {
        let w = self.world(x, y, self.camera_height - depth);
        self.camera_pose().to_isometry().inverse_transform_point(&Point3::from(w))
    }

    /// Ground-truth stem face pose in the camera frame.
    pub fn truth(&self) -> StemPose {
        let (w, l) = if self.stem_width <= self.stem_length { (self.stem_width, self.stem_length) } else { (self.stem_length, self.stem_width) };
        StemPose {
            position: self.camera_point(self.stem_offset[0], self.stem_offset[1], self.stem_depth),
            angle: (self.roll - self.camera_roll).rem_euclid(FRAC_PI_2),
            normal: -Vector3::z(),
            width: w,
            length: l,
        }
    }

    /// Ground-truth prong ends in the camera frame, left then right.
    pub fn tips(&self) -> [Point3<f64>; 2] {
        [-1.0, 1.0].map(|sx| self.camera_point(sx * PRONG_HALF_SPACING, MOUTH_BOTTOM, self.mouth_depth))
    }

    /// Four frames with different stem rolls and offsets, used by the robustness harness.
    pub fn robustness_set() -> Vec<ValveScene> {
        [(0.0, [0.0, 0.03]), (20.0, [0.01, 0.035]), (45.0, [-0.01, 0.03]), (70.0, [0.005, 0.025])]
            .iter()
            .map(|&(deg, off)| ValveScene { roll: f64::to_radians(deg), stem_offset: off, ..Default::default() })
            .collect()
    }
}
