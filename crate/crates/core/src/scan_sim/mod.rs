//! Deterministic synthetic sensors: a spinning multi-ring LiDAR, a pinhole depth camera, and
//! measurement perturbations. Scenes are built from yawed boxes over an optional ground plane.

mod depth;
pub mod io;
mod lidar;
mod scene;

pub use depth::{perturb_depth, render_depth_frame, DepthFrame, DepthFrameSpec, Intrinsics};
pub use lidar::{raycast_scan, LidarModel, Scan, ScanRing};
pub use scene::{BoxObject, PanelGeometry, Rect, Scene};
