//! Core scene data: triangle meshes, textures, images, cameras, and scans.

mod camera;
mod frame;
mod image;
mod mesh;

pub use camera::{
    project_point, rotation_angle_deg, unproject_pixel, Intrinsics, Pose, PoseDelta,
};
pub use frame::{RgbdFrame, ScanSet};
pub use image::{ImageGray, ImageRgb};
pub use mesh::{uniform_laplacian, validate_mesh, SparseMatrix, Texture, TriMesh};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("point is behind the camera (z = {z:.3e})")]
    BehindCamera { z: f64 },
    #[error("scan set needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("duplicate frame id {0}")]
    DuplicateFrameId(u32),
    #[error("frame {id}: image size {got_w}x{got_h} does not match intrinsics {want_w}x{want_h}")]
    FrameSizeMismatch {
        id: u32,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("invalid intrinsics: {0}")]
    BadIntrinsics(String),
}
