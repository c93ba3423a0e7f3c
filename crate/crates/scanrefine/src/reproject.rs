//! Depth-based forward warping of auxiliary color frames into a target view,
//! plus rotation-neighborhood selection of auxiliary views.
//!
//! Warping is gradient-free: re-projected images serve as references for the
//! losses, never as differentiated quantities.

use crate::math::Vec2;
use crate::scene::{
    project_point, rotation_angle_deg, unproject_pixel, ImageGray, ImageRgb, Intrinsics, Pose,
    RgbdFrame, ScanSet, SceneError,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReprojectError {
    #[error("frame {0} has no neighbors within the angle limit")]
    NoNeighbors(u32),
    #[error("unknown frame id {0}")]
    UnknownFrame(u32),
}

/// Default maximum rotation deviation for auxiliary view selection (degrees).
pub const DEFAULT_MAX_NEIGHBOR_ANGLE: f64 = 15.0;

#[derive(Debug, Clone, Copy)]
pub struct ReprojectParams {
    /// Samples farther behind the target's own depth than this are occluded.
    pub depth_tolerance: f64,
    /// Pixels that gather less total splat weight than this are invalid.
    pub min_splat_weight: f64,
}

impl Default for ReprojectParams {
    fn default() -> Self {
        ReprojectParams {
            depth_tolerance: 0.01,
            min_splat_weight: 0.25,
        }
    }
}

/// An auxiliary frame warped into the target view. Color is only meaningful
/// where `validity` is 1.
#[derive(Debug, Clone)]
pub struct ReprojectedImage {
    pub color: ImageRgb,
    pub validity: ImageGray,
}

impl ReprojectedImage {
    pub fn valid_count(&self) -> usize {
        self.validity.data.iter().filter(|v| **v > 0.5).count()
    }
}

/// Frames whose rotation lies within `max_angle_deg` of the target's.
/// Never includes the target itself.
pub fn neighbor_views(
    target_id: u32,
    scanset: &ScanSet,
    max_angle_deg: f64,
) -> Result<Vec<u32>, ReprojectError> {
    neighbor_views_with_poses(target_id, scanset, None, max_angle_deg)
}

/// Same selection against externally refined poses (indexed like
/// `scanset.frames`) instead of the poses stored on the frames.
pub fn neighbor_views_with_poses(
    target_id: u32,
    scanset: &ScanSet,
    poses: Option<&[Pose]>,
    max_angle_deg: f64,
) -> Result<Vec<u32>, ReprojectError> {
    let target_idx = scanset
        .index_of(target_id)
        .ok_or(ReprojectError::UnknownFrame(target_id))?;
    let pose_of = |idx: usize| match poses {
        Some(p) => p[idx],
        None => scanset.frames[idx].pose,
    };
    let target_rot = pose_of(target_idx).rotation;
    let mut out = Vec::new();
    for (idx, frame) in scanset.frames.iter().enumerate() {
        if frame.id == target_id {
            continue;
        }
        if rotation_angle_deg(&target_rot, &pose_of(idx).rotation) <= max_angle_deg {
            out.push(frame.id);
        }
    }
    if out.is_empty() {
        return Err(ReprojectError::NoNeighbors(target_id));
    }
    Ok(out)
}

/// Warp a single auxiliary pixel into view A: K P_A P_B^-1 (d K^-1 q~).
/// Returns the continuous pixel in A and the camera-A depth.
pub fn reproject_pixel(
    q_b: Vec2,
    d_b: f64,
    intr: &Intrinsics,
    pose_a: &Pose,
    pose_b: &Pose,
) -> Result<(Vec2, f64), SceneError> {
    assert!(d_b > 0.0, "reproject_pixel requires a valid source depth");
    let world = unproject_pixel(pose_b, intr, q_b, d_b);
    project_point(pose_a, intr, world)
}

/// Forward-warp every valid-depth pixel of `frame_b` into view A with
/// bilinear splatting, z-buffered against both the warped samples themselves
/// and the target's own depth.
pub fn reproject_image(
    frame_b: &RgbdFrame,
    frame_a: &RgbdFrame,
    intr: &Intrinsics,
    params: &ReprojectParams,
) -> ReprojectedImage {
    reproject_image_with_poses(
        frame_b,
        &frame_b.pose,
        frame_a,
        &frame_a.pose,
        intr,
        params,
    )
}

/// [`reproject_image`] with explicit (e.g. refined) poses.
pub fn reproject_image_with_poses(
    frame_b: &RgbdFrame,
    pose_b: &Pose,
    frame_a: &RgbdFrame,
    pose_a: &Pose,
    intr: &Intrinsics,
    params: &ReprojectParams,
) -> ReprojectedImage {
    let (w, h) = (intr.width, intr.height);
    struct Splat {
        x0: isize,
        y0: isize,
        fx: f64,
        fy: f64,
        z: f64,
        rgb: [f64; 3],
    }
    let mut splats: Vec<Splat> = Vec::new();
    for sy in 0..h {
        for sx in 0..w {
            let d = frame_b.depth.get(sx, sy);
            if d <= 0.0 {
                continue; // invalid-depth sentinel
            }
            let q = Vec2::new(sx as f64 + 0.5, sy as f64 + 0.5);
            let Ok((p, z)) = reproject_pixel(q, d, intr, pose_a, pose_b) else {
                continue;
            };
            // bilinear footprint over pixel centers
            let xf = p.x - 0.5;
            let yf = p.y - 0.5;
            let x0 = xf.floor();
            let y0 = yf.floor();
            splats.push(Splat {
                x0: x0 as isize,
                y0: y0 as isize,
                fx: xf - x0,
                fy: yf - y0,
                z,
                rgb: frame_b.color.get(sx, sy),
            });
        }
    }

    let taps = |s: &Splat| {
        [
            (s.x0, s.y0, (1.0 - s.fx) * (1.0 - s.fy)),
            (s.x0 + 1, s.y0, s.fx * (1.0 - s.fy)),
            (s.x0, s.y0 + 1, (1.0 - s.fx) * s.fy),
            (s.x0 + 1, s.y0 + 1, s.fx * s.fy),
        ]
    };
    let in_bounds =
        |x: isize, y: isize| x >= 0 && y >= 0 && x < w as isize && y < h as isize;

    // Pass 1: nearest warped depth per target pixel.
    let mut min_z = vec![f64::INFINITY; w * h];
    for s in &splats {
        for (x, y, wgt) in taps(s) {
            if wgt <= 0.0 || !in_bounds(x, y) {
                continue;
            }
            let idx = y as usize * w + x as usize;
            if s.z < min_z[idx] {
                min_z[idx] = s.z;
            }
        }
    }

    // Pass 2: accumulate weights and colors for surviving samples.
    let mut weight = vec![0.0; w * h];
    let mut accum = vec![0.0; w * h * 3];
    for s in &splats {
        for (x, y, wgt) in taps(s) {
            if wgt <= 0.0 || !in_bounds(x, y) {
                continue;
            }
            let idx = y as usize * w + x as usize;
            if s.z > min_z[idx] + params.depth_tolerance {
                continue; // behind a nearer warped sample
            }
            let a_depth = frame_a.depth.data[idx];
            if a_depth > 0.0 && s.z > a_depth + params.depth_tolerance {
                continue; // occluded by the target's own surface
            }
            weight[idx] += wgt;
            for c in 0..3 {
                accum[idx * 3 + c] += wgt * s.rgb[c];
            }
        }
    }

    let mut color = ImageRgb::new(w, h);
    let mut validity = ImageGray::new(w, h);
    for idx in 0..w * h {
        if weight[idx] >= params.min_splat_weight {
            validity.data[idx] = 1.0;
            for c in 0..3 {
                color.data[idx * 3 + c] = accum[idx * 3 + c] / weight[idx];
            }
        }
    }
    ReprojectedImage { color, validity }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{so3_exp, Vec3};
    use approx::assert_abs_diff_eq;

    fn intr100() -> Intrinsics {
        Intrinsics {
            fx: 100.0,
            fy: 100.0,
            cx: 50.0,
            cy: 50.0,
            width: 100,
            height: 100,
        }
    }

    fn frame(id: u32, pose: Pose, w: usize, h: usize) -> RgbdFrame {
        let mut color = ImageRgb::new(w, h);
        for y in 0..h {
            for x in 0..w {
                color.set(x, y, [x as f64 / w as f64, y as f64 / h as f64, 0.25]);
            }
        }
        RgbdFrame {
            id,
            color,
            depth: ImageGray::filled(w, h, 1.0),
            silhouette: ImageGray::filled(w, h, 1.0),
            pose,
        }
    }

    #[test]
    fn identity_warp_maps_pixels_exactly() {
        let (p, z) = reproject_pixel(
            Vec2::new(31.5, 72.25),
            1.6,
            &intr100(),
            &Pose::IDENTITY,
            &Pose::IDENTITY,
        )
        .unwrap();
        assert_abs_diff_eq!(p.x, 31.5, epsilon = 1e-10);
        assert_abs_diff_eq!(p.y, 72.25, epsilon = 1e-10);
        assert_abs_diff_eq!(z, 1.6, epsilon = 1e-12);
    }

    #[test]
    fn shifted_camera_matches_hand_matrix_chain() {
        // Auxiliary camera center moved by (-0.1, 0, 0): t_B = (0.1, 0, 0).
        // Hand chain: cam_B point (0,0,1) -> world (-0.1, 0, 1) -> pixel_A
        // x = 100 * (-0.1) / 1 + 50 = 40.
        let pose_b = Pose::new(crate::math::Mat3::IDENTITY, Vec3::new(0.1, 0.0, 0.0));
        let (p, z) = reproject_pixel(
            Vec2::new(50.0, 50.0),
            1.0,
            &intr100(),
            &Pose::IDENTITY,
            &pose_b,
        )
        .unwrap();
        assert_abs_diff_eq!(p.x, 40.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.y, 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(z, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn behind_camera_is_an_error() {
        // Point 1 m in front of B sits behind A when A faces the other way.
        let pose_a = Pose::new(so3_exp(Vec3::new(0.0, std::f64::consts::PI, 0.0)), Vec3::ZERO);
        let r = reproject_pixel(
            Vec2::new(50.0, 50.0),
            1.0,
            &intr100(),
            &pose_a,
            &Pose::IDENTITY,
        );
        assert!(matches!(r, Err(SceneError::BehindCamera { .. })));
    }

    #[test]
    fn identity_reprojection_reproduces_the_frame() {
        let intr = Intrinsics {
            fx: 16.0,
            fy: 16.0,
            cx: 8.0,
            cy: 8.0,
            width: 16,
            height: 16,
        };
        let mut fa = frame(0, Pose::IDENTITY, 16, 16);
        fa.depth.set(3, 3, 0.0); // one invalid-depth pixel
        let fb = fa.clone();
        let out = reproject_image(&fb, &fa, &intr, &ReprojectParams::default());
        for y in 0..16 {
            for x in 0..16 {
                if fa.depth.get(x, y) > 0.0 {
                    assert_eq!(out.validity.get(x, y), 1.0);
                    let a = out.color.get(x, y);
                    let b = fa.color.get(x, y);
                    for k in 0..3 {
                        assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-3);
                    }
                } else {
                    // no sample lands exactly there with full weight
                    assert_eq!(out.validity.get(x, y), 0.0);
                }
            }
        }
    }

    #[test]
    fn occluded_region_is_invalid() {
        let intr = Intrinsics {
            fx: 16.0,
            fy: 16.0,
            cx: 8.0,
            cy: 8.0,
            width: 16,
            height: 16,
        };
        let fa = frame(0, Pose::IDENTITY, 16, 16); // surface at depth 1
        let mut fb = frame(1, Pose::IDENTITY, 16, 16);
        // B's surface lies 2x tolerance behind A's on the right half.
        let params = ReprojectParams::default();
        for y in 0..16 {
            for x in 8..16 {
                fb.depth.set(x, y, 1.0 + 2.0 * params.depth_tolerance);
            }
        }
        let out = reproject_image(&fb, &fa, &intr, &params);
        for y in 0..16 {
            for x in 0..16 {
                let expect = if x < 8 { 1.0 } else { 0.0 };
                assert_eq!(
                    out.validity.get(x, y),
                    expect,
                    "validity wrong at ({x}, {y})"
                );
            }
        }
    }

    #[test]
    fn neighbor_selection_respects_angle_limit() {
        let mk = |id: u32, deg: f64| {
            frame(
                id,
                Pose::new(so3_exp(Vec3::new(0.0, deg.to_radians(), 0.0)), Vec3::ZERO),
                4,
                4,
            )
        };
        let intr = Intrinsics {
            fx: 4.0,
            fy: 4.0,
            cx: 2.0,
            cy: 2.0,
            width: 4,
            height: 4,
        };
        let scanset =
            ScanSet::new(vec![mk(0, 0.0), mk(1, 10.0), mk(2, 20.0)], intr).unwrap();
        let n = neighbor_views(0, &scanset, 15.0).unwrap();
        assert_eq!(n, vec![1]);
        // symmetric under the metric
        let n1 = neighbor_views(1, &scanset, 15.0).unwrap();
        assert_eq!(n1, vec![0, 2]);
    }

    #[test]
    fn identical_rotations_are_mutual_neighbors() {
        let intr = Intrinsics {
            fx: 4.0,
            fy: 4.0,
            cx: 2.0,
            cy: 2.0,
            width: 4,
            height: 4,
        };
        let scanset = ScanSet::new(
            vec![frame(0, Pose::IDENTITY, 4, 4), frame(1, Pose::IDENTITY, 4, 4)],
            intr,
        )
        .unwrap();
        assert_eq!(neighbor_views(0, &scanset, 15.0).unwrap(), vec![1]);
        assert_eq!(neighbor_views(1, &scanset, 15.0).unwrap(), vec![0]);
    }

    #[test]
    fn isolated_frame_has_no_neighbors() {
        let intr = Intrinsics {
            fx: 4.0,
            fy: 4.0,
            cx: 2.0,
            cy: 2.0,
            width: 4,
            height: 4,
        };
        let far = Pose::new(so3_exp(Vec3::new(0.0, 1.0, 0.0)), Vec3::ZERO);
        let scanset =
            ScanSet::new(vec![frame(0, Pose::IDENTITY, 4, 4), frame(1, far, 4, 4)], intr).unwrap();
        assert!(matches!(
            neighbor_views(0, &scanset, 15.0),
            Err(ReprojectError::NoNeighbors(0))
        ));
    }
}
