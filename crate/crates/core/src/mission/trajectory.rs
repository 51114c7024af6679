use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

/// One control step of the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub speed: f64,
    pub phase: String,
}

const HEADER: &str = "t,x,y,yaw,speed,phase";

/// CSV text with shortest round-trip float formatting, so re-import is bit-exact.
pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.t, r.x, r.y, r.yaw, r.speed, r.phase));
    }
    out
}

pub fn export_trajectory(rows: &[TrajectoryRow], path: &Path) -> Result<()> {
    std::fs::write(path, trajectory_csv(rows))?;
    Ok(())
}

pub fn parse_trajectory(text: &str) -> Result<Vec<TrajectoryRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(HEADER) {
        return Err(Error::Format(format!("trajectory header must be `{HEADER}`")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::Format(format!("trajectory line {}: expected 6 fields", i + 2)));
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|e| Error::Format(format!("trajectory line {}: {e}", i + 2)));
            Ok(TrajectoryRow { t: num(0)?, x: num(1)?, y: num(2)?, yaw: num(3)?, speed: num(4)?, phase: f[5].to_string() })
        })
        .collect()
}

pub fn import_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    parse_trajectory(&std::fs::read_to_string(path)?)
}
