//! JSON records for camera poses and intrinsics.
//!
//! Poses serialize as `{"convention": "world_to_camera", "poses": [{id,
//! rotation: [9 row-major], translation: [3]}]}`.

use super::IoError;
use crate::math::{Mat3, Vec3};
use crate::scene::{Intrinsics, Pose};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseRecord {
    pub id: u32,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct PoseFile {
    convention: String,
    poses: Vec<PoseRecord>,
}

impl PoseRecord {
    pub fn from_pose(id: u32, pose: &Pose) -> Self {
        let m = &pose.rotation.m;
        PoseRecord {
            id,
            rotation: [
                m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
            ],
            translation: pose.translation.to_array(),
        }
    }

    pub fn to_pose(&self) -> Pose {
        let r = &self.rotation;
        Pose::new(
            Mat3 {
                m: [
                    [r[0], r[1], r[2]],
                    [r[3], r[4], r[5]],
                    [r[6], r[7], r[8]],
                ],
            },
            Vec3::from_array(self.translation),
        )
    }
}

pub fn write_poses_json(path: &Path, poses: &[(u32, Pose)]) -> Result<(), IoError> {
    let file = PoseFile {
        convention: "world_to_camera".to_string(),
        poses: poses
            .iter()
            .map(|(id, p)| PoseRecord::from_pose(*id, p))
            .collect(),
    };
    let text = serde_json::to_string_pretty(&file).expect("pose serialization cannot fail");
    std::fs::write(path, text).map_err(|e| IoError::file(path, e))
}

pub fn read_poses_json(path: &Path) -> Result<Vec<(u32, Pose)>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    let file: PoseFile =
        serde_json::from_str(&text).map_err(|e| IoError::parse(path, e.to_string()))?;
    if file.convention != "world_to_camera" {
        return Err(IoError::parse(
            path,
            format!("unsupported pose convention {:?}", file.convention),
        ));
    }
    Ok(file
        .poses
        .iter()
        .map(|rec| (rec.id, rec.to_pose()))
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct IntrinsicsFile {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
}

pub fn write_intrinsics_json(path: &Path, intr: &Intrinsics) -> Result<(), IoError> {
    let file = IntrinsicsFile {
        fx: intr.fx,
        fy: intr.fy,
        cx: intr.cx,
        cy: intr.cy,
        width: intr.width,
        height: intr.height,
    };
    let text = serde_json::to_string_pretty(&file).expect("intrinsics serialization cannot fail");
    std::fs::write(path, text).map_err(|e| IoError::file(path, e))
}

pub fn read_intrinsics_json(path: &Path) -> Result<Intrinsics, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    let file: IntrinsicsFile =
        serde_json::from_str(&text).map_err(|e| IoError::parse(path, e.to_string()))?;
    Ok(Intrinsics {
        fx: file.fx,
        fy: file.fy,
        cx: file.cx,
        cy: file.cy,
        width: file.width,
        height: file.height,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::so3_exp;
    use tempfile::tempdir;

    #[test]
    fn poses_round_trip_exactly() {
        let poses = vec![
            (0, Pose::IDENTITY),
            (
                7,
                Pose::new(so3_exp(Vec3::new(0.1, 0.2, 0.3)), Vec3::new(1.0, -2.0, 3.0)),
            ),
        ];
        let dir = tempdir().unwrap();
        let path = dir.path().join("poses.json");
        write_poses_json(&path, &poses).unwrap();
        let back = read_poses_json(&path).unwrap();
        assert_eq!(back.len(), 2);
        for ((ia, pa), (ib, pb)) in poses.iter().zip(&back) {
            assert_eq!(ia, ib);
            assert_eq!(pa.rotation, pb.rotation);
            assert_eq!(pa.translation, pb.translation);
        }
    }

    #[test]
    fn wrong_convention_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("poses.json");
        std::fs::write(&path, r#"{"convention": "camera_to_world", "poses": []}"#).unwrap();
        assert!(matches!(read_poses_json(&path), Err(IoError::Parse { .. })));
    }

    #[test]
    fn intrinsics_round_trip() {
        let intr = Intrinsics {
            fx: 128.0,
            fy: 127.5,
            cx: 64.0,
            cy: 63.5,
            width: 128,
            height: 128,
        };
        let dir = tempdir().unwrap();
        let path = dir.path().join("intrinsics.json");
        write_intrinsics_json(&path, &intr).unwrap();
        assert_eq!(read_intrinsics_json(&path).unwrap(), intr);
    }
}
