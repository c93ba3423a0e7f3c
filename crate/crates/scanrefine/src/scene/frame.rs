//! RGB-D frames and scan sets.

use super::{ImageGray, ImageRgb, Intrinsics, Pose, SceneError};

/// One captured view: color, depth (0 = invalid), binary silhouette, and the
/// estimated pose that came with the scan.
#[derive(Debug, Clone)]
pub struct RgbdFrame {
    pub id: u32,
    pub color: ImageRgb,
    pub depth: ImageGray,
    pub silhouette: ImageGray,
    pub pose: Pose,
}

/// A set of RGB-D frames sharing one set of intrinsics.
#[derive(Debug, Clone)]
pub struct ScanSet {
    pub frames: Vec<RgbdFrame>,
    pub intrinsics: Intrinsics,
}

impl ScanSet {
    /// Validates frame count, id uniqueness, and image sizes.
    pub fn new(frames: Vec<RgbdFrame>, intrinsics: Intrinsics) -> Result<Self, SceneError> {
        intrinsics.validate()?;
        if frames.len() < 2 {
            return Err(SceneError::TooFewFrames(frames.len()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for f in &frames {
            if !seen.insert(f.id) {
                return Err(SceneError::DuplicateFrameId(f.id));
            }
            for (w, h) in [
                (f.color.width, f.color.height),
                (f.depth.width, f.depth.height),
                (f.silhouette.width, f.silhouette.height),
            ] {
                if w != intrinsics.width || h != intrinsics.height {
                    return Err(SceneError::FrameSizeMismatch {
                        id: f.id,
                        got_w: w,
                        got_h: h,
                        want_w: intrinsics.width,
                        want_h: intrinsics.height,
                    });
                }
            }
        }
        Ok(ScanSet { frames, intrinsics })
    }

    pub fn frame_by_id(&self, id: u32) -> Option<&RgbdFrame> {
        self.frames.iter().find(|f| f.id == id)
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.frames.iter().position(|f| f.id == id)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}
