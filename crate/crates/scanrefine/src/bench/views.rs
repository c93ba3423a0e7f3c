//! Camera placement on a viewing sphere.

use crate::math::{Mat3, Vec3};
use crate::scene::Pose;

/// World-to-camera look-at pose: camera at `eye`, optical axis toward
/// `target`, with `up` fixing the roll (image y runs against `up`).
pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Pose {
    let z = (target - eye).normalized();
    let x_dir = z.cross(up);
    let x = if x_dir.norm() < 1e-9 {
        // degenerate: axis parallel to up; fall back to another up vector
        z.cross(Vec3::new(0.0, 0.0, 1.0)).normalized()
    } else {
        x_dir.normalized()
    };
    let y = z.cross(x);
    let rotation = Mat3::from_rows(x, y, z);
    let translation = -rotation.mul_vec(eye);
    Pose::new(rotation, translation)
}

/// `count` cameras on a Fibonacci spiral over the sphere of `radius`, all
/// looking at the origin with up (0,1,0) (poles fall back to (0,0,1)).
pub fn sample_sphere_views(count: usize, radius: f64) -> Vec<Pose> {
    assert!(count >= 2, "need at least two views");
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..count)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - y * y).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            let eye = Vec3::new(r * phi.cos(), y, r * phi.sin()) * radius;
            look_at(eye, Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{project_point, Intrinsics};

    #[test]
    fn forty_views_are_well_separated() {
        // brute-force pairwise spacing of the spiral
        let poses = sample_sphere_views(40, 1.0);
        let centers: Vec<Vec3> = poses.iter().map(|p| p.camera_center()).collect();
        let mut min_dist = f64::INFINITY;
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                min_dist = min_dist.min((centers[i] - centers[j]).norm());
            }
        }
        assert!(min_dist > 0.3, "minimum spacing {min_dist}");
    }

    #[test]
    fn every_view_centers_the_origin() {
        let intr = Intrinsics {
            fx: 100.0,
            fy: 100.0,
            cx: 60.0,
            cy: 50.0,
            width: 120,
            height: 100,
        };
        for pose in sample_sphere_views(40, 2.5) {
            assert!(pose.orthonormality_error() < 1e-12);
            let (px, depth) = project_point(&pose, &intr, Vec3::ZERO).unwrap();
            assert!((px.x - 60.0).abs() < 1e-3, "{px:?}");
            assert!((px.y - 50.0).abs() < 1e-3, "{px:?}");
            assert!((depth - 2.5).abs() < 1e-9);
        }
    }

    #[test]
    fn two_views_are_nearly_antipodal() {
        let poses = sample_sphere_views(2, 1.0);
        let d0 = poses[0].rotation.row(2);
        let d1 = poses[1].rotation.row(2);
        // angle between view directions exceeds 90 degrees
        assert!(d0.dot(d1) < 0.0);
    }
}
