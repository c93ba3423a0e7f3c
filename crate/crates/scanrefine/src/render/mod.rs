//! Differentiable soft rasterization of a textured mesh into color, depth,
//! and soft silhouette images.

mod raster;
mod texture;

pub use texture::sample_texture;

use crate::diff::{GradStore, Graph, GraphOp, GroupKind, NodeId, Value};
use crate::math::{Vec2, Vec3};
use crate::scene::{ImageGray, ImageRgb, Intrinsics, Pose, PoseDelta, Texture, TriMesh};
use raster::{GradRequest, RasterScene};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("vertex {0} is not finite")]
    NonFiniteVertex(usize),
}

/// Soft-rasterization controls.
#[derive(Debug, Clone, Copy)]
pub struct SoftParams {
    /// Coverage sharpness in squared NDC-distance units.
    pub sigma: f64,
    /// Depth-aggregation softmax temperature.
    pub gamma: f64,
    pub background_color: [f64; 3],
    /// Depth normalization range for the aggregation scores. Fixed constants
    /// (not scene-derived) so gradients stay exact.
    pub z_near: f64,
    pub z_far: f64,
}

impl Default for SoftParams {
    fn default() -> Self {
        SoftParams {
            sigma: 1e-4,
            gamma: 1e-4,
            background_color: [0.0, 0.0, 0.0],
            z_near: 0.1,
            z_far: 100.0,
        }
    }
}

impl SoftParams {
    /// Near-hard settings used for ground-truth rendering and evaluation.
    pub fn hard() -> Self {
        SoftParams {
            sigma: 1e-6,
            gamma: 1e-6,
            ..SoftParams::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub color: ImageRgb,
    pub depth: ImageGray,
    pub silhouette: ImageGray,
}

fn check_vertices(mesh: &TriMesh) -> Result<(), RenderError> {
    for (i, v) in mesh.vertices.iter().enumerate() {
        if !v.is_finite() {
            return Err(RenderError::NonFiniteVertex(i));
        }
    }
    Ok(())
}

/// Render a textured mesh under a world-to-camera pose.
pub fn rasterize(
    mesh: &TriMesh,
    texture: &Texture,
    pose: &Pose,
    intr: &Intrinsics,
    soft: &SoftParams,
) -> Result<RenderOutput, RenderError> {
    check_vertices(mesh)?;
    let vertices = mesh.vertex_buffer();
    let scene = RasterScene {
        vertices: &vertices,
        faces: &mesh.faces,
        uvs: &mesh.uvs,
        texture,
        base_pose: *pose,
        omega: Vec3::ZERO,
        tau: Vec3::ZERO,
        intr: *intr,
        soft: *soft,
    };
    let (color, depth, silhouette) = raster::forward(&scene);
    Ok(RenderOutput {
        color,
        depth,
        silhouette,
    })
}

/// Handles of a recorded render: one node per output image.
#[derive(Debug, Clone, Copy)]
pub struct RenderNodes {
    pub color: NodeId,
    pub depth: NodeId,
    pub silhouette: NodeId,
}

/// Which parameter groups a recorded render differentiates against.
#[derive(Debug, Clone, Copy, Default)]
pub struct LiveParams {
    pub vertices: bool,
    pub texels: bool,
    /// Pose-delta group slot: (frame index, total frame count).
    pub pose_frame: Option<(usize, usize)>,
}

struct RenderOp {
    vertices: Vec<f64>,
    faces: Vec<[usize; 3]>,
    uvs: Vec<[Vec2; 3]>,
    texture: Texture,
    base_pose: Pose,
    delta: PoseDelta,
    intr: Intrinsics,
    soft: SoftParams,
    live: LiveParams,
    deterministic: bool,
    out_color: NodeId,
    out_depth: NodeId,
    out_sil: NodeId,
}

impl GraphOp for RenderOp {
    fn backward(&self, _values: &[Value], store: &mut GradStore) {
        let g_color = store.buffer_grad(self.out_color).map(|g| g.to_vec());
        let g_depth = store.buffer_grad(self.out_depth).map(|g| g.to_vec());
        let g_sil = store.buffer_grad(self.out_sil).map(|g| g.to_vec());
        if g_color.is_none() && g_depth.is_none() && g_sil.is_none() {
            return;
        }
        let scene = RasterScene {
            vertices: &self.vertices,
            faces: &self.faces,
            uvs: &self.uvs,
            texture: &self.texture,
            base_pose: self.base_pose,
            omega: self.delta.axis_angle,
            tau: self.delta.translation,
            intr: self.intr,
            soft: self.soft,
        };
        let want = GradRequest {
            vertices: self.live.vertices,
            texels: self.live.texels,
            pose: self.live.pose_frame.is_some(),
        };
        let grads = raster::backward(
            &scene,
            g_color.as_deref(),
            g_depth.as_deref(),
            g_sil.as_deref(),
            &want,
            self.deterministic,
        );
        if let Some(gv) = grads.vertices {
            let buf = store.group_grad_mut(GroupKind::Vertices, gv.len());
            for (a, b) in buf.iter_mut().zip(&gv) {
                *a += b;
            }
        }
        if let Some(gt) = grads.texels {
            let buf = store.group_grad_mut(GroupKind::Texels, gt.len());
            for (a, b) in buf.iter_mut().zip(&gt) {
                *a += b;
            }
        }
        if let Some(gp) = grads.pose {
            let (frame, frames) = self.live.pose_frame.unwrap();
            let buf = store.group_grad_mut(GroupKind::PoseDelta, frames * 6);
            for (k, g) in gp.iter().enumerate() {
                buf[frame * 6 + k] += g;
            }
        }
    }
}

/// Record a render on the graph. `delta` applies on top of `pose` as the
/// optimizable increment; pass [`PoseDelta::ZERO`] when poses are frozen.
#[allow(clippy::too_many_arguments)]
pub fn record_render(
    graph: &mut Graph,
    mesh: &TriMesh,
    texture: &Texture,
    pose: &Pose,
    delta: &PoseDelta,
    intr: &Intrinsics,
    soft: &SoftParams,
    live: LiveParams,
) -> Result<RenderNodes, RenderError> {
    check_vertices(mesh)?;
    let vertices = mesh.vertex_buffer();
    let scene = RasterScene {
        vertices: &vertices,
        faces: &mesh.faces,
        uvs: &mesh.uvs,
        texture,
        base_pose: *pose,
        omega: delta.axis_angle,
        tau: delta.translation,
        intr: *intr,
        soft: *soft,
    };
    let (color, depth, silhouette) = raster::forward(&scene);
    let base = graph.next_node_index();
    let op = RenderOp {
        vertices,
        faces: mesh.faces.clone(),
        uvs: mesh.uvs.clone(),
        texture: texture.clone(),
        base_pose: *pose,
        delta: *delta,
        intr: *intr,
        soft: *soft,
        live,
        deterministic: graph.deterministic(),
        out_color: NodeId(base),
        out_depth: NodeId(base + 1),
        out_sil: NodeId(base + 2),
    };
    let ids = graph.push_op(
        Box::new(op),
        vec![Value::Rgb(color), Value::Gray(depth), Value::Gray(silhouette)],
    );
    Ok(RenderNodes {
        color: ids[0],
        depth: ids[1],
        silhouette: ids[2],
    })
}

/// Probe loss over direct texture lookups: sum_k |sample(uv_k) - target_k|^2.
/// Differentiable with respect to the texel group; used by gradient checks.
pub fn record_sample_probe(
    graph: &mut Graph,
    texture: &Texture,
    probes: &[(Vec2, [f64; 3])],
    texel_group: &crate::diff::ParamGroup,
) -> NodeId {
    assert_eq!(texel_group.values.len(), texture.texels.len());
    graph.register_group(texel_group);
    let mut value = 0.0;
    for (uv, target) in probes {
        let c = sample_texture(texture, *uv);
        for k in 0..3 {
            value += (c[k] - target[k]).powi(2);
        }
    }
    let op = SampleProbeOp {
        texture: texture.clone(),
        probes: probes.to_vec(),
        output: NodeId(graph.next_node_index()),
    };
    graph.push_op(Box::new(op), vec![Value::Scalar(value)])[0]
}

struct SampleProbeOp {
    texture: Texture,
    probes: Vec<(Vec2, [f64; 3])>,
    output: NodeId,
}

impl GraphOp for SampleProbeOp {
    fn backward(&self, _values: &[Value], store: &mut GradStore) {
        let up = store.scalar_grad(self.output);
        if up == 0.0 {
            return;
        }
        let len = self.texture.texels.len();
        let grad = store.group_grad_mut(GroupKind::Texels, len);
        for (uv, target) in &self.probes {
            let (c, taps) = texture::sample_with_taps(&self.texture, *uv);
            let g = [
                up * 2.0 * (c[0] - target[0]),
                up * 2.0 * (c[1] - target[1]),
                up * 2.0 * (c[2] - target[2]),
            ];
            taps.backward(&self.texture, g, Some(grad));
        }
    }
}
