//! File formats for scenes, scans and depth frames.
//!
//! Scenes are JSON documents tagged with a format name and schema version. Scans and depth frames
//! have a flat little-endian binary layout (fixed header followed by `f32` payload) and a CSV
//! dump for debugging.
//!
//! Scan binary layout:
//! ```text
//! magic "VKSCAN01" | u32 ring_count | u32 samples_per_ring
//! f32 max_range | f64 timestamp | f32×6 sensor pose (x y z roll pitch yaw)
//! per ring: f32 elevation | f32×n azimuths | f32×n ranges
//! ```
//! Depth frame binary layout:
//! ```text
//! magic "VKDEPTH1" | u32 width | u32 height | f32 focal cx cy | f32×6 camera pose
//! f32×(width·height) depth, row-major, 0 = missing
//! ```

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use super::{DepthFrame, Intrinsics, Scan, ScanRing, Scene};
use crate::error::{Error, Result};
use crate::geom::Pose6;

pub const SCENE_FORMAT: &str = "valvekit-scene";
pub const SCENE_VERSION: u32 = 1;

const SCAN_MAGIC: &[u8; 8] = b"VKSCAN01";
const DEPTH_MAGIC: &[u8; 8] = b"VKDEPTH1";

#[derive(Serialize, Deserialize)]
struct SceneFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    scene: Scene,
}

pub fn scene_to_string(scene: &Scene) -> Result<String> {
    let file = SceneFile { format: SCENE_FORMAT.into(), version: SCENE_VERSION, scene: scene.clone() };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn scene_from_str(s: &str) -> Result<Scene> {
    let file: SceneFile = serde_json::from_str(s)?;
    if file.format != SCENE_FORMAT {
        return Err(Error::Format(format!("expected format {SCENE_FORMAT:?}, found {:?}", file.format)));
    }
    if file.version != SCENE_VERSION {
        return Err(Error::Format(format!("unsupported scene version {}", file.version)));
    }
    file.scene.validate()?;
    Ok(file.scene)
}

pub fn read_scene(path: &Path) -> Result<Scene> {
    scene_from_str(&std::fs::read_to_string(path)?)
}

pub fn write_scene(path: &Path, scene: &Scene) -> Result<()> {
    std::fs::write(path, scene_to_string(scene)?)?;
    Ok(())
}

fn put_f32(out: &mut Vec<u8>, v: f32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_pose(out: &mut Vec<u8>, p: &Pose6) {
    for v in [p.x, p.y, p.z, p.roll, p.pitch, p.yaw] {
        put_f32(out, v as f32);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len()).ok_or_else(|| Error::Format("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn pose(&mut self) -> Result<Pose6> {
        let mut v = [0.0; 6];
        for x in &mut v {
            *x = self.f32()? as f64;
        }
        Ok(Pose6::new(v[0], v[1], v[2], v[3], v[4], v[5]))
    }

    fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>> {
        (0..n).map(|_| self.f32()).collect()
    }
}

pub fn encode_scan(scan: &Scan) -> Vec<u8> {
    let n = scan.rings.first().map_or(0, |r| r.len());
    let mut out = Vec::with_capacity(48 + scan.rings.len() * (4 + 8 * n));
    out.extend_from_slice(SCAN_MAGIC);
    out.extend_from_slice(&(scan.rings.len() as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    put_f32(&mut out, scan.max_range);
    out.extend_from_slice(&scan.timestamp.to_le_bytes());
    put_pose(&mut out, &scan.sensor_pose);
    for ring in &scan.rings {
        put_f32(&mut out, ring.elevation);
        ring.azimuths.iter().for_each(|a| put_f32(&mut out, *a));
        ring.ranges.iter().for_each(|r| put_f32(&mut out, *r));
    }
    out
}

pub fn decode_scan(buf: &[u8]) -> Result<Scan> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != SCAN_MAGIC {
        return Err(Error::Format("not a scan file".into()));
    }
    let rings_n = r.u32()? as usize;
    let n = r.u32()? as usize;
    let max_range = r.f32()?;
    let timestamp = r.f64()?;
    let sensor_pose = r.pose()?;
    let mut rings = Vec::with_capacity(rings_n);
    for _ in 0..rings_n {
        let elevation = r.f32()?;
        let azimuths = r.f32_vec(n)?;
        let ranges = r.f32_vec(n)?;
        rings.push(ScanRing { ranges, azimuths, elevation });
    }
    if r.pos != buf.len() {
        return Err(Error::Format("trailing bytes after scan".into()));
    }
    Ok(Scan { rings, sensor_pose, timestamp, max_range })
}

pub fn write_scan(path: &Path, scan: &Scan) -> Result<()> {
    std::fs::File::create(path)?.write_all(&encode_scan(scan))?;
    Ok(())
}

pub fn read_scan(path: &Path) -> Result<Scan> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_scan(&buf)
}

pub fn scan_to_csv(scan: &Scan) -> String {
    let mut s = String::from("ring,index,azimuth,elevation,range\n");
    for (k, ring) in scan.rings.iter().enumerate() {
        for i in 0..ring.len() {
            s.push_str(&format!("{k},{i},{},{},{}\n", ring.azimuths[i], ring.elevation, ring.ranges[i]));
        }
    }
    s
}

pub fn encode_depth(frame: &DepthFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(48 + 4 * frame.depth.len());
    out.extend_from_slice(DEPTH_MAGIC);
    out.extend_from_slice(&(frame.width as u32).to_le_bytes());
    out.extend_from_slice(&(frame.height as u32).to_le_bytes());
    let k = frame.intrinsics;
    for v in [k.focal, k.cx, k.cy] {
        put_f32(&mut out, v as f32);
    }
    put_pose(&mut out, &frame.camera_pose);
    frame.depth.iter().for_each(|d| put_f32(&mut out, *d));
    out
}

pub fn decode_depth(buf: &[u8]) -> Result<DepthFrame> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != DEPTH_MAGIC {
        return Err(Error::Format("not a depth frame file".into()));
    }
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let intrinsics = Intrinsics { focal: r.f32()? as f64, cx: r.f32()? as f64, cy: r.f32()? as f64 };
    if intrinsics.focal <= 0.0 {
        return Err(Error::Format("focal length must be positive".into()));
    }
    let camera_pose = r.pose()?;
    let depth = r.f32_vec(width * height)?;
    if r.pos != buf.len() {
        return Err(Error::Format("trailing bytes after depth frame".into()));
    }
    Ok(DepthFrame { width, height, depth, intrinsics, camera_pose })
}

pub fn write_depth(path: &Path, frame: &DepthFrame) -> Result<()> {
    std::fs::write(path, encode_depth(frame))?;
    Ok(())
}

pub fn read_depth(path: &Path) -> Result<DepthFrame> {
    decode_depth(&std::fs::read(path)?)
}

pub fn depth_to_csv(frame: &DepthFrame) -> String {
    let mut s = String::from("u,v,depth\n");
    for v in 0..frame.height {
        for u in 0..frame.width {
            s.push_str(&format!("{u},{v},{}\n", frame.at(u, v)));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan_sim::{raycast_scan, BoxObject, LidarModel, Rect};
    use proptest::prelude::*;

    fn scene() -> Scene {
        let mut s = Scene::new(Rect::new(-20.0, -20.0, 20.0, 20.0));
        s.objects.push(BoxObject::new([5.0, 1.0, 0.5], [1.0, 0.5, 1.0], 0.2).with_label("crate"));
        s
    }

    #[test]
    fn scene_json_roundtrip_and_version_check() {
        let s = scene();
        let text = scene_to_string(&s).unwrap();
        assert!(text.contains("\"format\": \"valvekit-scene\""));
        assert_eq!(scene_from_str(&text).unwrap(), s);
        let bumped = text.replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(scene_from_str(&bumped), Err(Error::Format(_))));
    }

    #[test]
    fn scan_binary_roundtrip() {
        let model = LidarModel { ring_count: 4, azimuth_step: 1f64.to_radians(), ..LidarModel::default() };
        let mut scan = raycast_scan(&scene(), &Pose6::from_translation(0.0, 0.0, 1.0), &model, 3);
        scan.timestamp = 12.25;
        let bytes = encode_scan(&scan);
        let back = decode_scan(&bytes).unwrap();
        assert_eq!(back.rings, scan.rings);
        assert_eq!(back.timestamp, 12.25);
        assert!(decode_scan(&bytes[..bytes.len() - 1]).is_err());
        assert_eq!(scan_to_csv(&scan).lines().count(), 1 + 4 * 360);
    }

    proptest! {
        #[test]
        fn depth_binary_roundtrip(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let depth: Vec<f32> = (0..w * h).map(|i| ((seed.wrapping_add(i as u64) % 97) as f32) * 0.01).collect();
            let f = DepthFrame {
                width: w,
                height: h,
                depth,
                intrinsics: Intrinsics { focal: 200.0, cx: w as f64 / 2.0, cy: h as f64 / 2.0 },
                camera_pose: Pose6::new(0.5, -0.25, 1.0, 0.0, 0.0, 1.5),
            };
            let back = decode_depth(&encode_depth(&f)).unwrap();
            prop_assert_eq!(&back.depth, &f.depth);
            prop_assert_eq!(back.width, w);
        }
    }
}
