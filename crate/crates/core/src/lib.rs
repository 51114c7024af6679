//! Simulated autonomy pipeline for a valve-turning ground robot.
//!
//! The crate is organised along the robot's task sequence:
//!
//! * [`scan_sim`] renders deterministic LiDAR scans and close-range depth frames from box scenes
//!   and applies measurement perturbations. It is the ground truth for every perception module.
//! * [`detector`] finds width-matched objects in individual scan rings using two median filters,
//!   clusters the detections across rings and tracks them over time.
//! * [`registration`] aligns a panel model to a detected cluster with planar ICP started from
//!   several yaw seeds, and ranks the results with a visibility- and ground-weighted score.
//! * [`approach`] contains the omnidirectional base simulator, differential GPS localization,
//!   waypoint following and the circling approach controller.
//! * [`wrench`] post-processes head/mouth detections into wrench hypotheses and selects the
//!   wrench whose metric length matches the requested size.
//! * [`valve`] estimates the valve stem pose from a depth frame (thresholding, region split,
//!   rotating calipers) and runs perturbation robustness trials.
//! * [`manip`] holds keyframe motion primitives and the gravity-assisted insertion planner.
//! * [`mission`] composes everything into a scenario runner with timing reports and
//!   robustness sweeps.

pub mod approach;
pub mod detector;
pub mod error;
pub mod geom;
pub mod manip;
pub mod mission;
pub mod registration;
pub mod rng;
pub mod scan_sim;
pub mod spatial;
pub mod valve;
pub mod wrench;

pub use error::{Error, Result};
