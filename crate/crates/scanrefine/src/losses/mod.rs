//! Loss functions: the common objective (masked RGB L1, depth L1, silhouette
//! IoU), the Laplacian smoothness regularizer, and the conditional patch
//! adversarial objective.

mod discriminator;

pub use discriminator::{
    adversarial_losses, record_adversarial_pair, record_neg_mean_log, record_neg_mean_log1m,
    record_patch_map, AdversarialNodes, DiscriminatorState, ImgInput, PatchDiscriminator,
    DISC_BETA1, LOG_CLAMP,
};

use crate::diff::{GradStore, Graph, GraphOp, GroupKind, NodeId, ParamGroup, Value};
use crate::reproject::ReprojectedImage;
use crate::scene::{ImageGray, ImageRgb, SparseMatrix};

/// Weights of the combined objective. `lambda_c/d/s` follow the common
/// objective; `lambda_lap` and `lambda_adv` scale the stage-specific extras.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    pub lambda_c: f64,
    pub lambda_d: f64,
    pub lambda_s: f64,
    pub lambda_lap: f64,
    pub lambda_adv: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_c: 0.1,
            lambda_d: 1.0,
            lambda_s: 1.0,
            lambda_lap: 0.5,
            lambda_adv: 0.1,
        }
    }
}

/// Mean absolute color difference over re-projection-valid pixels, averaged
/// over the three channels. Returns the loss and the valid-pixel count
/// (zero count means the loss is a hole-free 0).
pub fn rgb_loss(reproj: &ReprojectedImage, rendered: &ImageRgb) -> (f64, usize) {
    assert!(reproj.color.same_size(rendered), "image shape mismatch");
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, v) in reproj.validity.data.iter().enumerate() {
        if *v > 0.5 {
            count += 1;
            for c in 0..3 {
                sum += (rendered.data[i * 3 + c] - reproj.color.data[i * 3 + c]).abs();
            }
        }
    }
    if count == 0 {
        (0.0, 0)
    } else {
        (sum / (3.0 * count as f64), count)
    }
}

/// Mean absolute depth difference where both the scan depth is valid (> 0)
/// and the rendered silhouette exceeds one half.
pub fn depth_loss(scan_depth: &ImageGray, rendered_depth: &ImageGray, rendered_sil: &ImageGray) -> f64 {
    assert!(scan_depth.same_size(rendered_depth), "image shape mismatch");
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..scan_depth.data.len() {
        if scan_depth.data[i] > 0.0 && rendered_sil.data[i] > 0.5 {
            count += 1;
            sum += (rendered_depth.data[i] - scan_depth.data[i]).abs();
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// 1 - |S_gt * S_r|_1 / |S_gt + S_r - S_gt * S_r|_1 with the denominator
/// floored at 1e-8.
pub fn iou_loss(s_gt: &ImageGray, s_rendered: &ImageGray) -> f64 {
    assert!(s_gt.same_size(s_rendered), "image shape mismatch");
    let mut inter = 0.0;
    let mut union = 0.0;
    for (g, r) in s_gt.data.iter().zip(&s_rendered.data) {
        inter += g * r;
        union += g + r - g * r;
    }
    1.0 - inter / union.max(1e-8)
}

/// Weighted sum of the three common terms; RGB-only mode drops depth.
pub fn common_loss(rgb: f64, depth: f64, iou: f64, w: &LossWeights, rgb_only: bool) -> f64 {
    let depth_term = if rgb_only { 0.0 } else { w.lambda_d * depth };
    w.lambda_c * rgb + depth_term + w.lambda_s * iou
}

/// Frobenius norm of W V: the L2 norm of the Laplacian coordinates
/// accumulated over the x, y, z columns.
pub fn laplacian_loss(w: &SparseMatrix, vertices: &[f64]) -> f64 {
    let y = w.mul_vec3_buffer(vertices);
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Graph ops
// ---------------------------------------------------------------------------

struct RgbLossOp {
    reproj_color: ImageRgb,
    validity: ImageGray,
    color: NodeId,
    count: usize,
    output: NodeId,
}

impl GraphOp for RgbLossOp {
    fn backward(&self, values: &[Value], store: &mut GradStore) {
        let up = store.scalar_grad(self.output);
        if up == 0.0 || self.count == 0 {
            return;
        }
        let rendered = values[self.color.0].as_rgb().data.clone();
        let scale = up / (3.0 * self.count as f64);
        let g = store.buffer_grad_mut(self.color);
        for (i, v) in self.validity.data.iter().enumerate() {
            if *v > 0.5 {
                for c in 0..3 {
                    let diff = rendered[i * 3 + c] - self.reproj_color.data[i * 3 + c];
                    g[i * 3 + c] += scale * sign(diff);
                }
            }
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Record the masked RGB L1 against a re-projected reference.
pub fn record_rgb_loss(graph: &mut Graph, reproj: &ReprojectedImage, color: NodeId) -> NodeId {
    let rendered = graph.value(color).as_rgb();
    let (value, count) = rgb_loss(reproj, rendered);
    let op = RgbLossOp {
        reproj_color: reproj.color.clone(),
        validity: reproj.validity.clone(),
        color,
        count,
        output: NodeId(graph.next_node_index()),
    };
    graph.push_op(Box::new(op), vec![Value::Scalar(value)])[0]
}

struct DepthLossOp {
    scan: ImageGray,
    mask: Vec<bool>,
    depth: NodeId,
    count: usize,
    output: NodeId,
}

impl GraphOp for DepthLossOp {
    fn backward(&self, values: &[Value], store: &mut GradStore) {
        let up = store.scalar_grad(self.output);
        if up == 0.0 || self.count == 0 {
            return;
        }
        let rendered = values[self.depth.0].as_gray().data.clone();
        let scale = up / self.count as f64;
        let g = store.buffer_grad_mut(self.depth);
        for (i, m) in self.mask.iter().enumerate() {
            if *m {
                g[i] += scale * sign(rendered[i] - self.scan.data[i]);
            }
        }
    }
}

/// Record the masked depth L1. The silhouette mask is treated as a constant;
/// gradients flow through depth values only.
pub fn record_depth_loss(
    graph: &mut Graph,
    scan_depth: &ImageGray,
    depth: NodeId,
    silhouette: NodeId,
) -> NodeId {
    let rendered_depth = graph.value(depth).as_gray();
    let rendered_sil = graph.value(silhouette).as_gray();
    let value = depth_loss(scan_depth, rendered_depth, rendered_sil);
    let mask: Vec<bool> = scan_depth
        .data
        .iter()
        .zip(&rendered_sil.data)
        .map(|(s, r)| *s > 0.0 && *r > 0.5)
        .collect();
    let count = mask.iter().filter(|m| **m).count();
    let op = DepthLossOp {
        scan: scan_depth.clone(),
        mask,
        depth,
        count,
        output: NodeId(graph.next_node_index()),
    };
    graph.push_op(Box::new(op), vec![Value::Scalar(value)])[0]
}

struct IouLossOp {
    gt: ImageGray,
    silhouette: NodeId,
    output: NodeId,
}

impl GraphOp for IouLossOp {
    fn backward(&self, values: &[Value], store: &mut GradStore) {
        let up = store.scalar_grad(self.output);
        if up == 0.0 {
            return;
        }
        let rendered = values[self.silhouette.0].as_gray().data.clone();
        let mut inter = 0.0;
        let mut union = 0.0;
        for (g, r) in self.gt.data.iter().zip(&rendered) {
            inter += g * r;
            union += g + r - g * r;
        }
        let floored = union < 1e-8;
        let union = union.max(1e-8);
        let g = store.buffer_grad_mut(self.silhouette);
        for (i, gt) in self.gt.data.iter().enumerate() {
            let d_union = if floored { 0.0 } else { 1.0 - gt };
            g[i] += up * (-(gt * union - inter * d_union) / (union * union));
        }
    }
}

/// Record the silhouette IoU loss against a binary ground-truth mask.
pub fn record_iou_loss(graph: &mut Graph, s_gt: &ImageGray, silhouette: NodeId) -> NodeId {
    let value = iou_loss(s_gt, graph.value(silhouette).as_gray());
    let op = IouLossOp {
        gt: s_gt.clone(),
        silhouette,
        output: NodeId(graph.next_node_index()),
    };
    graph.push_op(Box::new(op), vec![Value::Scalar(value)])[0]
}

struct LaplacianLossOp {
    w: SparseMatrix,
    vertices: Vec<f64>,
    output: NodeId,
}

impl GraphOp for LaplacianLossOp {
    fn backward(&self, _values: &[Value], store: &mut GradStore) {
        let up = store.scalar_grad(self.output);
        if up == 0.0 {
            return;
        }
        let y = self.w.mul_vec3_buffer(&self.vertices);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 0.0 {
            return; // subgradient 0 at the cone tip
        }
        let grad = store.group_grad_mut(GroupKind::Vertices, self.vertices.len());
        self.w.transpose_mul_vec3_into(&y, up / norm, grad);
    }
}

/// Record the Laplacian smoothness loss on the vertex group.
pub fn record_laplacian_loss(
    graph: &mut Graph,
    w: &SparseMatrix,
    vertices: &ParamGroup,
) -> NodeId {
    assert_eq!(vertices.kind, GroupKind::Vertices);
    assert_eq!(vertices.values.len(), w.size * 3);
    graph.register_group(vertices);
    let value = laplacian_loss(w, &vertices.values);
    let op = LaplacianLossOp {
        w: w.clone(),
        vertices: vertices.values.clone(),
        output: NodeId(graph.next_node_index()),
    };
    graph.push_op(Box::new(op), vec![Value::Scalar(value)])[0]
}

#[cfg(test)]
mod tests;
