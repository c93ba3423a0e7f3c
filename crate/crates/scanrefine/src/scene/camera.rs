//! Pinhole camera model and rigid poses.
//!
//! Poses map world coordinates to camera coordinates: `p_cam = R p_world + t`.
//! The camera looks down +z; a point projects to pixel
//! `(fx x/z + cx, fy y/z + cy)` with the image origin at the top-left.

use super::SceneError;
use crate::math::{so3_exp, Mat3, Vec2, Vec3};

pub const MIN_CAMERA_DEPTH: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(SceneError::BadIntrinsics(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(0.0 <= self.cx && self.cx < self.width as f64)
            || !(0.0 <= self.cy && self.cy < self.height as f64)
        {
            return Err(SceneError::BadIntrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }
}

/// World-to-camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        rotation: Mat3::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn transform_point(&self, p_world: Vec3) -> Vec3 {
        self.rotation.mul_vec(p_world) + self.translation
    }

    /// Inverse transform: camera coordinates back to world.
    pub fn inverse_transform_point(&self, p_cam: Vec3) -> Vec3 {
        self.rotation.transpose_mul_vec(p_cam - self.translation)
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -rt.mul_vec(self.translation),
        }
    }

    /// Camera center in world coordinates (-R^T t).
    pub fn camera_center(&self) -> Vec3 {
        -self.rotation.transpose_mul_vec(self.translation)
    }

    pub fn orthonormality_error(&self) -> f64 {
        self.rotation.orthonormality_error()
    }
}

/// Optimizable pose increment, applied as a left-multiplied exponential
/// update: `R <- exp([axis_angle]_x) R`, `t <- t + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseDelta {
    pub axis_angle: Vec3,
    pub translation: Vec3,
}

impl PoseDelta {
    pub const ZERO: PoseDelta = PoseDelta {
        axis_angle: Vec3::ZERO,
        translation: Vec3::ZERO,
    };

    pub fn from_slice(s: &[f64]) -> Self {
        assert_eq!(s.len(), 6);
        PoseDelta {
            axis_angle: Vec3::new(s[0], s[1], s[2]),
            translation: Vec3::new(s[3], s[4], s[5]),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.axis_angle.x,
            self.axis_angle.y,
            self.axis_angle.z,
            self.translation.x,
            self.translation.y,
            self.translation.z,
        ]
    }

    /// Fold the increment into a base pose, re-orthonormalizing the rotation
    /// so repeated folds cannot drift off the manifold.
    pub fn apply_to(&self, base: &Pose) -> Pose {
        debug_assert!(self.axis_angle.norm() < std::f64::consts::PI);
        let r = so3_exp(self.axis_angle).mul_mat(&base.rotation);
        Pose {
            rotation: r.orthonormalized(),
            translation: base.translation + self.translation,
        }
    }
}

/// Angle in degrees between two rotations: arccos((trace(Ra^T Rb) - 1) / 2),
/// with the cosine clamped to [-1, 1].
pub fn rotation_angle_deg(ra: &Mat3, rb: &Mat3) -> f64 {
    // trace(Ra^T Rb) = sum_ij Ra[i][j] * Rb[i][j], symmetric in the arguments.
    let mut tr = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            tr += ra.m[i][j] * rb.m[i][j];
        }
    }
    let c = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

/// Project a world point; returns the pixel and the camera-space depth.
pub fn project_point(
    pose: &Pose,
    intr: &Intrinsics,
    p_world: Vec3,
) -> Result<(Vec2, f64), SceneError> {
    let p = pose.transform_point(p_world);
    if p.z <= MIN_CAMERA_DEPTH {
        return Err(SceneError::BehindCamera { z: p.z });
    }
    let pixel = Vec2::new(
        intr.fx * p.x / p.z + intr.cx,
        intr.fy * p.y / p.z + intr.cy,
    );
    Ok((pixel, p.z))
}

/// Lift a pixel with known depth back to a world point: pose^-1 (d K^-1 q~).
pub fn unproject_pixel(pose: &Pose, intr: &Intrinsics, pixel: Vec2, depth: f64) -> Vec3 {
    let cam = Vec3::new(
        depth * (pixel.x - intr.cx) / intr.fx,
        depth * (pixel.y - intr.cy) / intr.fy,
        depth,
    );
    pose.inverse_transform_point(cam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn test_intrinsics() -> Intrinsics {
        Intrinsics {
            fx: 100.0,
            fy: 100.0,
            cx: 50.0,
            cy: 50.0,
            width: 100,
            height: 100,
        }
    }

    #[test]
    fn on_axis_point_projects_to_principal_point() {
        let (px, d) =
            project_point(&Pose::IDENTITY, &test_intrinsics(), Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(px, Vec2::new(50.0, 50.0));
        assert_eq!(d, 1.0);
    }

    #[test]
    fn off_axis_point_matches_hand_multiply() {
        // Oracle: K [0.1, 0, 1]^T => x = 100 * 0.1 / 1 + 50 = 60.
        let (px, d) =
            project_point(&Pose::IDENTITY, &test_intrinsics(), Vec3::new(0.1, 0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(px.x, 60.0, epsilon = 1e-12);
        assert_abs_diff_eq!(px.y, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn behind_camera_is_an_error() {
        let result = project_point(&Pose::IDENTITY, &test_intrinsics(), Vec3::new(0.0, 0.0, -1.0));
        assert!(matches!(result, Err(SceneError::BehindCamera { .. })));
    }

    #[test]
    fn rotation_angle_identity_is_zero() {
        let r = so3_exp(Vec3::new(0.3, -0.2, 0.9));
        assert!(rotation_angle_deg(&r, &r) < 1e-5);
        assert_eq!(rotation_angle_deg(&Mat3::IDENTITY, &Mat3::IDENTITY), 0.0);
    }

    #[test]
    fn rotation_angle_composed_20_degrees() {
        // Oracle: closed-form axis-angle construction about z.
        let ra = so3_exp(Vec3::new(0.4, 0.1, -0.3));
        let rb = so3_exp(Vec3::new(0.0, 0.0, 20f64.to_radians())).mul_mat(&ra);
        assert_abs_diff_eq!(rotation_angle_deg(&ra, &rb), 20.0, epsilon = 1e-6);
    }

    #[test]
    fn rotation_angle_180_about_x() {
        let ra = Mat3::IDENTITY;
        let rb = so3_exp(Vec3::new(std::f64::consts::PI, 0.0, 0.0));
        assert_abs_diff_eq!(rotation_angle_deg(&ra, &rb), 180.0, epsilon = 1e-6);
    }

    #[test]
    fn project_unproject_round_trip() {
        let pose = Pose::new(
            so3_exp(Vec3::new(0.2, -0.7, 0.4)),
            Vec3::new(0.3, -0.1, 2.0),
        );
        let intr = test_intrinsics();
        let q = Vec2::new(31.25, 72.5);
        let d = 1.75;
        let world = unproject_pixel(&pose, &intr, q, d);
        let (q2, d2) = project_point(&pose, &intr, world).unwrap();
        assert_abs_diff_eq!(q2.x, q.x, epsilon = 1e-5);
        assert_abs_diff_eq!(q2.y, q.y, epsilon = 1e-5);
        assert_abs_diff_eq!(d2, d, epsilon = 1e-6);
    }

    #[test]
    fn pose_delta_fold_keeps_rotation_orthonormal() {
        let base = Pose::new(so3_exp(Vec3::new(0.1, 0.2, 0.3)), Vec3::new(1.0, 2.0, 3.0));
        let delta = PoseDelta {
            axis_angle: Vec3::new(0.05, -0.02, 0.01),
            translation: Vec3::new(0.1, 0.0, -0.1),
        };
        let folded = delta.apply_to(&base);
        assert!(folded.orthonormality_error() < 1e-6);
        assert_eq!(folded.translation, Vec3::new(1.1, 2.0, 2.9));
    }
}
