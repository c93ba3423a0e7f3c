//! Stage machinery: batched loss assembly, per-stage Adam updates, and the
//! external cycle.

use super::controller::{controller_step, AdaptiveState, Decision};
use super::trace::TraceRow;
use super::{OptimError, RunParams, Schedule};
use crate::diff::{adam_step, AdamState, GroupKind, Graph, NodeId, ParamGroup};
use crate::losses::{
    record_depth_loss, record_iou_loss, record_laplacian_loss, record_neg_mean_log,
    record_neg_mean_log1m, record_patch_map, record_rgb_loss, DiscriminatorState, ImgInput,
};
use crate::render::{record_render, LiveParams, RenderNodes, SoftParams};
use crate::reproject::{
    neighbor_views_with_poses, reproject_image_with_poses, ReprojectParams, ReprojectedImage,
};
use crate::scene::{ImageRgb, Pose, PoseDelta, ScanSet, SparseMatrix, Texture, TriMesh};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Pose,
    Geometry,
    Texture,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Pose => "pose",
            Stage::Geometry => "geometry",
            Stage::Texture => "texture",
        }
    }
}

/// Stage termination: the adaptive controller or a fixed step count.
#[derive(Debug, Clone, Copy)]
pub enum StageLimit {
    Adaptive,
    Fixed(usize),
}

/// The optimizable model state.
#[derive(Debug, Clone)]
pub struct JointModel {
    pub mesh: TriMesh,
    pub texture: Texture,
    /// One pose per scan frame, aligned with `scanset.frames`.
    pub poses: Vec<Pose>,
}

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub stage: Stage,
    pub steps: usize,
    pub final_common: f64,
}

pub struct JointOptimizer<'a> {
    scanset: &'a ScanSet,
    params: RunParams,
    mesh: TriMesh,
    vertex_group: ParamGroup,
    texel_group: ParamGroup,
    texture_dims: (usize, usize),
    pose_group: ParamGroup,
    pose_bases: Vec<Pose>,
    laplacian: SparseMatrix,
    disc: DiscriminatorState,
    rng: ChaCha8Rng,
    trace: Vec<TraceRow>,
    global_step: usize,
}

struct StepRecord {
    l_rgb: f64,
    l_depth: f64,
    l_iou: f64,
    l_common: f64,
    l_lap: Option<f64>,
    d_loss: Option<f64>,
    g_loss: Option<f64>,
}

impl<'a> JointOptimizer<'a> {
    pub fn new(
        scanset: &'a ScanSet,
        model: JointModel,
        params: RunParams,
    ) -> Result<Self, OptimError> {
        if model.poses.len() != scanset.len() {
            return Err(OptimError::PoseCountMismatch {
                model: model.poses.len(),
                scan: scanset.len(),
            });
        }
        let laplacian = crate::scene::uniform_laplacian(&model.mesh);
        let lr_vertices = params.lr_vertices * model.mesh.bbox_diagonal().max(1e-9);
        let vertex_group =
            ParamGroup::new(GroupKind::Vertices, model.mesh.vertex_buffer(), lr_vertices);
        let texel_group = ParamGroup::new(
            GroupKind::Texels,
            model.texture.texels.clone(),
            params.lr_texture,
        );
        let pose_group = ParamGroup::new(
            GroupKind::PoseDelta,
            vec![0.0; model.poses.len() * 6],
            params.lr_pose,
        );
        let disc = DiscriminatorState::new(params.lr_discriminator, params.seed ^ 0x64697363);
        let rng = ChaCha8Rng::seed_from_u64(params.seed);
        Ok(JointOptimizer {
            scanset,
            mesh: model.mesh,
            texture_dims: (model.texture.width, model.texture.height),
            vertex_group,
            texel_group,
            pose_group,
            pose_bases: model.poses,
            laplacian,
            disc,
            rng,
            trace: Vec::new(),
            global_step: 0,
            params,
        })
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn global_step(&self) -> usize {
        self.global_step
    }

    fn soft(&self) -> SoftParams {
        SoftParams {
            sigma: self.params.sigma,
            gamma: self.params.gamma,
            ..SoftParams::default()
        }
    }

    fn reproject_params(&self) -> ReprojectParams {
        ReprojectParams {
            depth_tolerance: self.params.depth_tolerance,
            ..ReprojectParams::default()
        }
    }

    fn current_mesh(&self) -> TriMesh {
        let mut mesh = self.mesh.clone();
        mesh.set_vertices_from_buffer(&self.vertex_group.values);
        mesh
    }

    fn current_texture(&self) -> Texture {
        Texture {
            width: self.texture_dims.0,
            height: self.texture_dims.1,
            texels: self.texel_group.values.clone(),
        }
    }

    fn delta_of(&self, frame_idx: usize) -> PoseDelta {
        PoseDelta::from_slice(&self.pose_group.values[frame_idx * 6..frame_idx * 6 + 6])
    }

    /// Pose estimate including any unfolded delta.
    fn effective_pose(&self, frame_idx: usize) -> Pose {
        self.delta_of(frame_idx).apply_to(&self.pose_bases[frame_idx])
    }

    fn effective_poses(&self) -> Vec<Pose> {
        (0..self.pose_bases.len())
            .map(|i| self.effective_pose(i))
            .collect()
    }

    /// Fold accumulated pose deltas into the base poses and reset them.
    fn fold_pose_deltas(&mut self) {
        for i in 0..self.pose_bases.len() {
            self.pose_bases[i] = self.delta_of(i).apply_to(&self.pose_bases[i]);
        }
        self.pose_group.values.fill(0.0);
    }

    pub fn current_model(&self) -> JointModel {
        JointModel {
            mesh: self.current_mesh(),
            texture: self.current_texture(),
            poses: self.effective_poses(),
        }
    }

    pub fn into_model_and_trace(self) -> (JointModel, Vec<TraceRow>) {
        let model = self.current_model();
        (model, self.trace)
    }

    /// Frames that have at least one auxiliary neighbor, with their
    /// candidate lists (frame indices).
    fn eligible_targets(&self) -> Result<Vec<(usize, Vec<usize>)>, OptimError> {
        let poses = self.effective_poses();
        let mut out = Vec::new();
        for (idx, frame) in self.scanset.frames.iter().enumerate() {
            match neighbor_views_with_poses(
                frame.id,
                self.scanset,
                Some(&poses),
                self.params.max_neighbor_angle,
            ) {
                Ok(ids) => {
                    let indices = ids
                        .iter()
                        .map(|id| self.scanset.index_of(*id).expect("neighbor id exists"))
                        .collect();
                    out.push((idx, indices));
                }
                Err(_) => continue, // excluded target
            }
        }
        if out.is_empty() {
            return Err(OptimError::NoEligibleTargets(self.params.max_neighbor_angle));
        }
        Ok(out)
    }

    /// Draw a batch of (target, auxiliary) frame-index pairs.
    fn draw_batch(&mut self, eligible: &[(usize, Vec<usize>)]) -> Vec<(usize, usize)> {
        let count = self.params.batch_size.min(eligible.len());
        let picks: Vec<&(usize, Vec<usize>)> =
            eligible.choose_multiple(&mut self.rng, count).collect();
        picks
            .into_iter()
            .map(|(target, candidates)| {
                let aux = *candidates.choose(&mut self.rng).expect("non-empty");
                (*target, aux)
            })
            .collect()
    }

    /// Re-projected references for a batch, using current pose estimates.
    fn batch_reprojections(&self, batch: &[(usize, usize)]) -> Vec<ReprojectedImage> {
        let rp = self.reproject_params();
        batch
            .iter()
            .map(|&(target, aux)| {
                reproject_image_with_poses(
                    &self.scanset.frames[aux],
                    &self.effective_pose(aux),
                    &self.scanset.frames[target],
                    &self.effective_pose(target),
                    &self.scanset.intrinsics,
                    &rp,
                )
            })
            .collect()
    }

    /// Record renders and the common objective for a batch. Returns the
    /// batch-common node, per-view render nodes, and component means.
    #[allow(clippy::type_complexity)]
    fn record_batch_common(
        &self,
        graph: &mut Graph,
        batch: &[(usize, usize)],
        reprojections: &[ReprojectedImage],
        live_for: &dyn Fn(usize) -> LiveParams,
    ) -> Result<(NodeId, Vec<RenderNodes>, [f64; 3]), OptimError> {
        let mesh = self.current_mesh();
        let texture = self.current_texture();
        let soft = self.soft();
        let mut commons = Vec::with_capacity(batch.len());
        let mut renders = Vec::with_capacity(batch.len());
        let mut sums = [0.0; 3];
        for (k, &(target, _aux)) in batch.iter().enumerate() {
            let frame = &self.scanset.frames[target];
            let nodes = record_render(
                graph,
                &mesh,
                &texture,
                &self.pose_bases[target],
                &self.delta_of(target),
                &self.scanset.intrinsics,
                &soft,
                live_for(target),
            )?;
            let rgb = record_rgb_loss(graph, &reprojections[k], nodes.color);
            let depth = record_depth_loss(graph, &frame.depth, nodes.depth, nodes.silhouette);
            let iou = record_iou_loss(graph, &frame.silhouette, nodes.silhouette);
            let w = &self.params.weights;
            let mut terms = vec![(w.lambda_c, rgb), (w.lambda_s, iou)];
            if !self.params.rgb_only {
                terms.push((w.lambda_d, depth));
            }
            let common = graph.affine(&terms, 0.0);
            sums[0] += graph.scalar(rgb);
            sums[1] += graph.scalar(depth);
            sums[2] += graph.scalar(iou);
            commons.push(common);
            renders.push(nodes);
        }
        let batch_common = graph.mean(&commons);
        let n = batch.len() as f64;
        Ok((
            batch_common,
            renders,
            [sums[0] / n, sums[1] / n, sums[2] / n],
        ))
    }

    /// Fill re-projection holes with the target's own pixels so the
    /// discriminator's "real" input is artifact-free where the warp is
    /// undefined.
    fn filled_reprojection(reproj: &ReprojectedImage, target: &ImageRgb) -> ImageRgb {
        let mut out = reproj.color.clone();
        for (i, v) in reproj.validity.data.iter().enumerate() {
            if *v <= 0.5 {
                for c in 0..3 {
                    out.data[i * 3 + c] = target.data[i * 3 + c];
                }
            }
        }
        out
    }

    /// One optimization step of `stage`. Returns the record and the batch
    /// common loss.
    fn stage_step(
        &mut self,
        stage: Stage,
        batch: &[(usize, usize)],
        adam: &mut AdamState,
    ) -> Result<StepRecord, OptimError> {
        let reprojections = self.batch_reprojections(batch);
        let mut graph = Graph::new(self.params.deterministic);
        let n_frames = self.scanset.len();
        let live_for: Box<dyn Fn(usize) -> LiveParams> = match stage {
            Stage::Pose => Box::new(move |target| LiveParams {
                pose_frame: Some((target, n_frames)),
                ..LiveParams::default()
            }),
            Stage::Geometry => Box::new(|_| LiveParams {
                vertices: true,
                ..LiveParams::default()
            }),
            Stage::Texture => Box::new(|_| LiveParams {
                texels: true,
                ..LiveParams::default()
            }),
        };
        match stage {
            Stage::Pose => graph.register_group(&self.pose_group),
            Stage::Geometry => graph.register_group(&self.vertex_group),
            Stage::Texture => graph.register_group(&self.texel_group),
        }
        let (batch_common, renders, comps) =
            self.record_batch_common(&mut graph, batch, &reprojections, live_for.as_ref())?;

        let mut stage_loss = batch_common;
        let mut l_lap = None;
        let mut d_loss = None;
        let mut g_loss = None;

        if stage == Stage::Geometry {
            let lap = record_laplacian_loss(&mut graph, &self.laplacian, &self.vertex_group);
            l_lap = Some(graph.scalar(lap));
            stage_loss = graph.affine(&[(1.0, stage_loss), (self.params.weights.lambda_lap, lap)], 0.0);
        }

        if stage == Stage::Texture {
            // discriminator update first, on detached rendered images
            let mut d_graph = Graph::new(self.params.deterministic);
            let mut d_views = Vec::with_capacity(batch.len());
            for (k, &(target, _)) in batch.iter().enumerate() {
                let cond = &self.scanset.frames[target].color;
                let real = Self::filled_reprojection(&reprojections[k], cond);
                let fake = graph.value(renders[k].color).as_rgb().clone();
                let real_map = record_patch_map(
                    &mut d_graph,
                    &self.disc.arch,
                    &self.disc.weights,
                    true,
                    cond,
                    ImgInput::Image(&real),
                )?;
                let fake_map = record_patch_map(
                    &mut d_graph,
                    &self.disc.arch,
                    &self.disc.weights,
                    true,
                    cond,
                    ImgInput::Image(&fake),
                )?;
                let l_real = record_neg_mean_log(&mut d_graph, real_map);
                let l_fake = record_neg_mean_log1m(&mut d_graph, fake_map);
                d_views.push(d_graph.add(l_real, l_fake));
            }
            let d_total = d_graph.mean(&d_views);
            d_loss = Some(d_graph.scalar(d_total));
            let d_grads = d_graph.gradients(d_total, &[&self.disc.weights])?;
            self.disc.apply_gradient(&d_grads[0])?;

            // generator objective with the updated discriminator
            let mut g_views = Vec::with_capacity(batch.len());
            for (k, &(target, _)) in batch.iter().enumerate() {
                let cond = self.scanset.frames[target].color.clone();
                let map = record_patch_map(
                    &mut graph,
                    &self.disc.arch,
                    &self.disc.weights,
                    false,
                    &cond,
                    ImgInput::Node(renders[k].color),
                )?;
                g_views.push(record_neg_mean_log(&mut graph, map));
            }
            let g_mean = graph.mean(&g_views);
            g_loss = Some(graph.scalar(g_mean));
            stage_loss = graph.affine(
                &[(1.0, stage_loss), (self.params.weights.lambda_adv, g_mean)],
                0.0,
            );
        }

        let l_common = graph.scalar(batch_common);
        let stage_loss_value = graph.scalar(stage_loss);
        let group = match stage {
            Stage::Pose => &mut self.pose_group,
            Stage::Geometry => &mut self.vertex_group,
            Stage::Texture => &mut self.texel_group,
        };
        // a non-finite loss discards the step: no parameter update
        if stage_loss_value.is_finite() {
            let grads = graph.gradients(stage_loss, &[group])?;
            match adam_step(group, &grads[0], adam) {
                Ok(()) => {}
                Err(crate::diff::DiffError::NonFiniteGradient(kind)) => {
                    eprintln!(
                        "warning: non-finite gradient for {kind:?} in {} stage; step discarded",
                        stage.name()
                    );
                }
                Err(e) => return Err(e.into()),
            }
        }

        Ok(StepRecord {
            l_rgb: comps[0],
            l_depth: comps[1],
            l_iou: comps[2],
            l_common,
            l_lap,
            d_loss,
            g_loss,
        })
    }

    fn stage_adam(&self, stage: Stage) -> AdamState {
        match stage {
            Stage::Pose => AdamState::new(self.pose_group.len()),
            Stage::Geometry => AdamState::new(self.vertex_group.len()),
            Stage::Texture => AdamState::new(self.texel_group.len()),
        }
    }

    /// Run one stage to completion under `limit`, appending trace rows.
    /// `budget` caps the global step count across the whole run.
    pub fn run_stage(
        &mut self,
        stage: Stage,
        cycle: usize,
        limit: StageLimit,
        budget: Option<usize>,
    ) -> Result<StageOutcome, OptimError> {
        let eligible = self.eligible_targets()?;
        let mut adam = self.stage_adam(stage);
        let mut controller = AdaptiveState::new(
            self.params.delta,
            self.params.patience,
            match limit {
                StageLimit::Adaptive => self.params.t_max,
                StageLimit::Fixed(k) => k,
            },
        );
        let mut steps = 0;
        let mut final_common = f64::NAN;
        loop {
            if let Some(b) = budget {
                if self.global_step >= b {
                    break;
                }
            }
            let batch = self.draw_batch(&eligible);
            let record = self.stage_step(stage, &batch, &mut adam)?;
            let decision = if record.l_common.is_finite() {
                match limit {
                    StageLimit::Adaptive => controller_step(&mut controller, record.l_common)
                        .expect("finite loss"),
                    StageLimit::Fixed(_) => {
                        // fixed internal iterations: only the cap terminates
                        controller.step += 1;
                        if controller.step >= controller.t_max {
                            Decision::Next
                        } else {
                            Decision::Keep
                        }
                    }
                }
            } else {
                eprintln!(
                    "warning: non-finite loss {} in {} stage (step discarded)",
                    record.l_common,
                    stage.name()
                );
                controller.record_no_improvement()
            };
            self.global_step += 1;
            steps += 1;
            final_common = record.l_common;
            self.trace.push(TraceRow {
                step: self.global_step,
                cycle,
                stage: stage.name(),
                l_rgb: Some(record.l_rgb),
                l_depth: Some(record.l_depth),
                l_iou: Some(record.l_iou),
                l_common: record.l_common,
                l_lap: record.l_lap,
                d_loss: record.d_loss,
                g_loss: record.g_loss,
                decision: match decision {
                    Decision::Keep => "keep",
                    Decision::Next => "next",
                },
            });
            if decision == Decision::Next {
                break;
            }
        }
        if stage == Stage::Pose {
            self.fold_pose_deltas();
        }
        Ok(StageOutcome {
            stage,
            steps,
            final_common,
        })
    }

    /// Naive joint updates: all three parameter groups step together on the
    /// common objective alone, for exactly `budget` steps.
    pub fn run_hybrid(&mut self, budget: usize) -> Result<(), OptimError> {
        let mut adam_pose = AdamState::new(self.pose_group.len());
        let mut adam_vert = AdamState::new(self.vertex_group.len());
        let mut adam_tex = AdamState::new(self.texel_group.len());
        let n_frames = self.scanset.len();
        for _ in 0..budget {
            let eligible = self.eligible_targets()?;
            let batch = self.draw_batch(&eligible);
            let reprojections = self.batch_reprojections(&batch);
            let mut graph = Graph::new(self.params.deterministic);
            graph.register_group(&self.pose_group);
            graph.register_group(&self.vertex_group);
            graph.register_group(&self.texel_group);
            let live = move |target: usize| LiveParams {
                vertices: true,
                texels: true,
                pose_frame: Some((target, n_frames)),
            };
            let (batch_common, _renders, comps) =
                self.record_batch_common(&mut graph, &batch, &reprojections, &live)?;
            let l_common = graph.scalar(batch_common);
            if l_common.is_finite() {
                let grads = graph
                    .gradients(
                        batch_common,
                        &[&self.pose_group, &self.vertex_group, &self.texel_group],
                    )?;
                adam_step(&mut self.pose_group, &grads[0], &mut adam_pose)?;
                adam_step(&mut self.vertex_group, &grads[1], &mut adam_vert)?;
                adam_step(&mut self.texel_group, &grads[2], &mut adam_tex)?;
            } else {
                eprintln!("warning: non-finite loss {l_common} in hybrid step (discarded)");
            }
            self.global_step += 1;
            self.trace.push(TraceRow {
                step: self.global_step,
                cycle: 1,
                stage: "hybrid",
                l_rgb: Some(comps[0]),
                l_depth: Some(comps[1]),
                l_iou: Some(comps[2]),
                l_common,
                l_lap: None,
                d_loss: None,
                g_loss: None,
                decision: if self.global_step >= budget { "next" } else { "keep" },
            });
        }
        self.fold_pose_deltas();
        Ok(())
    }

    /// Run the whole schedule (stage list x external cycles).
    pub fn run_schedule(
        &mut self,
        schedule: &Schedule,
        limit: StageLimit,
        budget: Option<usize>,
    ) -> Result<(), OptimError> {
        for cycle in 1..=schedule.external_cycles {
            for &stage in &schedule.stages {
                if let Some(b) = budget {
                    if self.global_step >= b {
                        return Ok(());
                    }
                }
                self.run_stage(stage, cycle, limit, budget)?;
            }
        }
        Ok(())
    }
}
