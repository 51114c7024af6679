use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{synth_detections, CameraModel, Detection, IntensityImage, RackGeometry};
use crate::error::{Error, Result};
use crate::registration::PanelPose;
use crate::rng::derive_seed;

/// Detections from one image, with the image itself when available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capture {
    pub heads: Vec<Detection>,
    pub mouths: Vec<Detection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<IntensityImage>,
}

/// Any source of wrench detections, one capture per call.
pub trait DetectionProvider {
    fn capture(&mut self) -> Result<Capture>;
}

/// Synthetic detections with a fresh noise seed per capture.
#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    pub rack: RackGeometry,
    pub panel: PanelPose,
    pub camera: CameraModel,
    pub sigma: f64,
    pub seed: u64,
    captures: u64,
}

impl SyntheticProvider {
    pub fn new(rack: RackGeometry, panel: PanelPose, camera: CameraModel, sigma: f64, seed: u64) -> Self {
        Self { rack, panel, camera, sigma, seed, captures: 0 }
    }
}

impl DetectionProvider for SyntheticProvider {
    fn capture(&mut self) -> Result<Capture> {
        let seed = derive_seed(self.seed, self.captures);
        self.captures += 1;
        synth_detections(&self.rack, &self.panel, &self.camera, self.sigma, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CaptureFile {
    captures: Vec<Capture>,
}

/// Replays recorded detections from a JSON file `{"captures": [{"heads": [...], "mouths": [...]}]}`.
#[derive(Debug, Clone)]
pub struct FileProvider {
    captures: Vec<Capture>,
    next: usize,
}

impl FileProvider {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: CaptureFile = serde_json::from_str(text)?;
        Ok(Self { captures: f.captures, next: 0 })
    }

    pub fn open(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(captures: &[Capture]) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CaptureFile { captures: captures.to_vec() })?)
    }
}

impl DetectionProvider for FileProvider {
    fn capture(&mut self) -> Result<Capture> {
        let c = self.captures.get(self.next).cloned().ok_or_else(|| Error::Format("no more recorded captures".into()))?;
        self.next += 1;
        Ok(c)
    }
}
