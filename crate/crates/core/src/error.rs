use std::fmt;

/// Which half-frame region could not be found by the valve perception.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Mouth,
    Stem,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Mouth => f.write_str("mouth"),
            Region::Stem => f.write_str("stem"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate registration: no correspondences within cutoff")]
    DegenerateRegistration,
    #[error("registration failed: every yaw seed was degenerate")]
    RegistrationFailed,
    #[error("gps fix is stale ({age:.2} s old)")]
    GpsStale { age: f64 },
    #[error("waypoint list exhausted without finding the panel")]
    SearchExhausted,
    #[error("insufficient detections: need at least {needed}, got {got}")]
    InsufficientDetections { needed: usize, got: usize },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("wrench selection failed: no observed wrench maps to expected length #{0}")]
    SelectionFailed(usize),
    #[error("region missing: {0}")]
    RegionMissing(Region),
    #[error("wrench tips not found")]
    TipsNotFound,
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid keyframe: {0}")]
    InvalidKeyframe(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
