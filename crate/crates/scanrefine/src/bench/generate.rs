//! Ground-truth scan synthesis and model corruption.

use super::noise::{corrupt_texture, perturb_geometry, perturb_poses, NoiseSpec};
use super::views::sample_sphere_views;
use crate::render::{rasterize, RenderError, SoftParams};
use crate::scene::{ImageGray, Intrinsics, Pose, RgbdFrame, ScanSet, Texture, TriMesh};

pub const CAMERA_RADIUS: f64 = 2.5;

#[derive(Debug, Clone)]
pub struct BenchmarkModel {
    pub mesh: TriMesh,
    pub texture: Texture,
    pub poses: Vec<Pose>,
}

/// A synthetic benchmark: the ground truth, the corrupted copy handed to the
/// optimizer, and the scan set rendered from the ground truth. Scan frames
/// carry the corrupted pose estimates (in reality only estimates exist).
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub ground_truth: BenchmarkModel,
    pub initial: BenchmarkModel,
    pub scanset: ScanSet,
    pub spec: NoiseSpec,
}

/// Render the ground-truth model into `views` poses with near-hard
/// rasterization, then corrupt a copy of mesh/texture/poses per `spec`.
/// The ground-truth mesh is expected to fit the unit sphere at the origin.
pub fn generate_benchmark(
    gt_mesh: &TriMesh,
    gt_texture: &Texture,
    spec: &NoiseSpec,
    views: usize,
    resolution: usize,
) -> Result<Benchmark, RenderError> {
    let intrinsics = Intrinsics {
        fx: resolution as f64,
        fy: resolution as f64,
        cx: resolution as f64 / 2.0,
        cy: resolution as f64 / 2.0,
        width: resolution,
        height: resolution,
    };
    let gt_poses = sample_sphere_views(views, CAMERA_RADIUS);
    let noisy_poses = perturb_poses(&gt_poses, spec);
    let noisy_mesh = perturb_geometry(gt_mesh, spec);
    let noisy_texture = if spec.corrupt_texture {
        corrupt_texture(gt_texture, spec.seed)
    } else {
        gt_texture.clone()
    };

    let hard = SoftParams::hard();
    let mut frames = Vec::with_capacity(views);
    for (i, (gt_pose, noisy_pose)) in gt_poses.iter().zip(&noisy_poses).enumerate() {
        let out = rasterize(gt_mesh, gt_texture, gt_pose, &intrinsics, &hard)?;
        // simulate the file round trip: 8-bit color, binary mask, f32 depth
        let color = out.color.quantized();
        let mut silhouette = ImageGray::new(resolution, resolution);
        let mut depth = ImageGray::new(resolution, resolution);
        for idx in 0..silhouette.data.len() {
            if out.silhouette.data[idx] > 0.5 {
                silhouette.data[idx] = 1.0;
                depth.data[idx] = out.depth.data[idx] as f32 as f64;
            }
        }
        frames.push(RgbdFrame {
            id: i as u32,
            color,
            depth,
            silhouette,
            pose: *noisy_pose,
        });
    }
    let scanset = ScanSet::new(frames, intrinsics).expect("generated scan set is valid");
    Ok(Benchmark {
        ground_truth: BenchmarkModel {
            mesh: gt_mesh.clone(),
            texture: gt_texture.clone(),
            poses: gt_poses,
        },
        initial: BenchmarkModel {
            mesh: noisy_mesh,
            texture: noisy_texture,
            poses: noisy_poses,
        },
        scanset,
        spec: *spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::metrics::psnr;
    use crate::bench::shapes::icosphere;
    use crate::bench::textures::checkerboard;
    use crate::math::Vec3;

    fn checker64() -> Texture {
        checkerboard(64, 64, 8, [0.9, 0.3, 0.2], [0.95, 0.95, 0.9])
    }

    #[test]
    fn noiseless_spec_reproduces_ground_truth() {
        let mesh = icosphere(1);
        let tex = checker64();
        let b =
            generate_benchmark(&mesh, &tex, &NoiseSpec::noiseless(3), 4, 48).unwrap();
        assert_eq!(b.initial.mesh.vertices, b.ground_truth.mesh.vertices);
        assert_eq!(b.initial.texture.texels, b.ground_truth.texture.texels);
        for (a, c) in b.initial.poses.iter().zip(&b.ground_truth.poses) {
            assert_eq!(a.translation, c.translation);
        }
    }

    #[test]
    fn silhouettes_are_threshold_of_soft_coverage() {
        let mesh = icosphere(1);
        let b = generate_benchmark(&mesh, &checker64(), &NoiseSpec::noiseless(1), 3, 48)
            .unwrap();
        for f in &b.scanset.frames {
            for v in &f.silhouette.data {
                assert!(*v == 0.0 || *v == 1.0);
            }
            let inside = f.silhouette.data.iter().filter(|v| **v > 0.5).count();
            assert!(inside > 100, "silhouette unexpectedly small: {inside}");
            // depth valid exactly on the silhouette
            for (d, s) in f.depth.data.iter().zip(&f.silhouette.data) {
                assert_eq!(*d > 0.0, *s > 0.5);
            }
        }
    }

    #[test]
    fn noisy_benchmark_starts_misaligned() {
        // n = 1.5: rendering the corrupted model at its estimated poses must
        // differ clearly from the scans
        let mesh = icosphere(2);
        let tex = checkerboard(64, 64, 8, [0.9, 0.1, 0.1], [0.95, 0.95, 0.95]);
        let spec = NoiseSpec::new(1.5, 21);
        let b = generate_benchmark(&mesh, &tex, &spec, 4, 64).unwrap();
        let hard = SoftParams::hard();
        let mut worst = f64::INFINITY;
        for (i, frame) in b.scanset.frames.iter().enumerate() {
            let out = rasterize(
                &b.initial.mesh,
                &b.initial.texture,
                &b.initial.poses[i],
                &b.scanset.intrinsics,
                &hard,
            )
            .unwrap();
            worst = worst.min(psnr(&out.color.quantized(), &frame.color));
        }
        assert!(worst < 25.0, "initial PSNR suspiciously high: {worst}");
    }

    #[test]
    fn scan_depth_matches_analytic_sphere() {
        // finely subdivided icosphere vs the exact ray-sphere depth
        let mesh = icosphere(5);
        let b = generate_benchmark(&mesh, &checker64(), &NoiseSpec::noiseless(0), 2, 64)
            .unwrap();
        let intr = b.scanset.intrinsics;
        let frame = &b.scanset.frames[0];
        let pose = b.ground_truth.poses[0];
        let center_cam = pose.transform_point(Vec3::ZERO);
        let mut checked = 0;
        for py in 0..intr.height {
            for px in 0..intr.width {
                let d = frame.depth.get(px, py);
                if d <= 0.0 {
                    continue;
                }
                let dir = Vec3::new(
                    (px as f64 + 0.5 - intr.cx) / intr.fx,
                    (py as f64 + 0.5 - intr.cy) / intr.fy,
                    1.0,
                )
                .normalized();
                // |t dir - c| = 1
                let b_term = dir.dot(center_cam);
                let c_term = center_cam.norm_sq() - 1.0;
                let disc = b_term * b_term - c_term;
                if disc <= 0.0 {
                    continue;
                }
                let t = b_term - disc.sqrt();
                let impact_sq = center_cam.norm_sq() - b_term * b_term;
                if impact_sq > 0.36 {
                    continue; // oblique rays: facet error is amplified by 1/cos
                }
                let analytic_depth = t * dir.z;
                assert!(
                    (d - analytic_depth).abs() < 1e-3,
                    "depth {d} vs analytic {analytic_depth} at ({px},{py})"
                );
                checked += 1;
            }
        }
        assert!(checked > 200, "too few interior pixels checked: {checked}");
    }
}
