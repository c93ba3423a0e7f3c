//! Model evaluation: rendered-vs-scan image metrics and a deterministic
//! whole-set common loss for strategy comparisons.

use crate::bench::{hausdorff_avg, psnr, ssim};
use crate::losses::{common_loss, depth_loss, iou_loss, rgb_loss};
use crate::optim::{JointModel, RunParams};
use crate::render::{rasterize, RenderError, SoftParams};
use crate::reproject::{reproject_image_with_poses, ReprojectParams};
use crate::scene::{rotation_angle_deg, ScanSet, TriMesh};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewMetrics {
    pub id: u32,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_view: Vec<ViewMetrics>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hausdorff: Option<f64>,
}

/// Render the model into every scan view (near-hard rasterization, 8-bit
/// quantized like the scan files) and compare against the scanned colors.
/// Hausdorff distance to `gt_mesh` is appended when provided.
pub fn evaluate_model(
    scanset: &ScanSet,
    model: &JointModel,
    gt_mesh: Option<&TriMesh>,
) -> Result<EvalReport, RenderError> {
    let hard = SoftParams::hard();
    let mut per_view = Vec::with_capacity(scanset.len());
    let mut sum_psnr = 0.0;
    let mut sum_ssim = 0.0;
    for (idx, frame) in scanset.frames.iter().enumerate() {
        let out = rasterize(
            &model.mesh,
            &model.texture,
            &model.poses[idx],
            &scanset.intrinsics,
            &hard,
        )?;
        let rendered = out.color.quantized();
        let p = psnr(&rendered, &frame.color);
        let s = ssim(&rendered, &frame.color);
        sum_psnr += p;
        sum_ssim += s;
        per_view.push(ViewMetrics {
            id: frame.id,
            psnr: p,
            ssim: s,
        });
    }
    let n = scanset.len() as f64;
    Ok(EvalReport {
        per_view,
        mean_psnr: sum_psnr / n,
        mean_ssim: sum_ssim / n,
        hausdorff: gt_mesh.map(|gt| hausdorff_avg(&model.mesh, gt, 10_000)),
    })
}

/// Deterministic common loss over all views: each target pairs with its
/// nearest-by-rotation neighbor (within the configured cone when possible),
/// rendered at the run's soft settings. Used to compare strategy outcomes
/// without batch-sampling noise.
pub fn eval_common_loss(
    scanset: &ScanSet,
    model: &JointModel,
    params: &RunParams,
) -> Result<f64, RenderError> {
    let soft = SoftParams {
        sigma: params.sigma,
        gamma: params.gamma,
        ..SoftParams::default()
    };
    let rp = ReprojectParams {
        depth_tolerance: params.depth_tolerance,
        ..ReprojectParams::default()
    };
    let mut total = 0.0;
    for (idx, frame) in scanset.frames.iter().enumerate() {
        // nearest neighbor by rotation angle, ties to the lowest id
        let mut best: Option<(f64, usize)> = None;
        for (jdx, other) in scanset.frames.iter().enumerate() {
            if jdx == idx {
                continue;
            }
            let angle =
                rotation_angle_deg(&model.poses[idx].rotation, &model.poses[jdx].rotation);
            let better = match best {
                None => true,
                Some((a, _)) => {
                    angle < a - 1e-12
                        || ((angle - a).abs() <= 1e-12 && other.id < scanset.frames[best.unwrap().1].id)
                }
            };
            if better {
                best = Some((angle, jdx));
            }
        }
        let aux = best.expect("scan sets have at least two frames").1;
        let reproj = reproject_image_with_poses(
            &scanset.frames[aux],
            &model.poses[aux],
            frame,
            &model.poses[idx],
            &scanset.intrinsics,
            &rp,
        );
        let out = rasterize(
            &model.mesh,
            &model.texture,
            &model.poses[idx],
            &scanset.intrinsics,
            &soft,
        )?;
        let (rgb, _) = rgb_loss(&reproj, &out.color);
        let depth = depth_loss(&frame.depth, &out.depth, &out.silhouette);
        let iou = iou_loss(&frame.silhouette, &out.silhouette);
        total += common_loss(rgb, depth, iou, &params.weights, params.rgb_only);
    }
    Ok(total / scanset.len() as f64)
}
