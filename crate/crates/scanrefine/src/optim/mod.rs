//! Joint optimization: adaptive interleaving of pose, geometry, and texture
//! stages, plus the alternative strategies used for ablation.

mod controller;
mod stage;
mod strategy;
mod trace;

pub use controller::{controller_step, AdaptiveState, ControllerError, Decision};
pub use stage::{JointModel, JointOptimizer, Stage, StageLimit, StageOutcome};
pub use strategy::{run_strategy, StrategyKind, StrategyOutcome};
pub use trace::{trace_to_csv, write_trace_csv, TraceRow};

use crate::diff::DiffError;
use crate::losses::LossWeights;
use crate::render::RenderError;
use crate::scene::ScanSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("no optimizable targets: every frame lacks neighbors within {0} degrees")]
    NoEligibleTargets(f64),
    #[error("model has {model} poses but the scan set has {scan} frames")]
    PoseCountMismatch { model: usize, scan: usize },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

/// Everything tunable about a run. Defaults follow the shipped configuration.
#[derive(Debug, Clone)]
pub struct RunParams {
    pub weights: LossWeights,
    /// Controller improvement threshold (relative).
    pub delta: f64,
    /// Controller patience in steps.
    pub patience: usize,
    /// Per-stage step cap.
    pub t_max: usize,
    pub external_cycles: usize,
    /// Target views per optimization step.
    pub batch_size: usize,
    pub seed: u64,
    /// Drop the depth term from the common objective.
    pub rgb_only: bool,
    pub lr_pose: f64,
    /// Scaled by the mesh bounding-box diagonal at setup.
    pub lr_vertices: f64,
    pub lr_texture: f64,
    pub lr_discriminator: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub depth_tolerance: f64,
    pub max_neighbor_angle: f64,
    pub deterministic: bool,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            weights: LossWeights::default(),
            delta: 1e-3,
            patience: 50,
            t_max: 1000,
            external_cycles: 3,
            batch_size: 4,
            seed: 0,
            rgb_only: false,
            lr_pose: 1e-3,
            lr_vertices: 1e-3,
            lr_texture: 1e-2,
            lr_discriminator: 1e-4,
            sigma: 1e-4,
            gamma: 1e-4,
            depth_tolerance: 0.01,
            max_neighbor_angle: 15.0,
            deterministic: true,
        }
    }
}

/// Stage order of one external cycle; ablations drop entries.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub external_cycles: usize,
    pub stages: Vec<Stage>,
}

impl Schedule {
    pub fn full(external_cycles: usize) -> Self {
        assert!(external_cycles >= 1);
        Schedule {
            external_cycles,
            stages: vec![Stage::Pose, Stage::Geometry, Stage::Texture],
        }
    }

    pub fn without(mut self, stage: Stage) -> Self {
        self.stages.retain(|s| *s != stage);
        self
    }
}

/// Run the full adaptive pipeline: pose, geometry, texture stages in order,
/// `external_cycles` times, folding pose deltas after each pose stage.
pub fn joint_optimize(
    scanset: &ScanSet,
    model: JointModel,
    params: &RunParams,
    schedule: &Schedule,
) -> Result<(JointModel, Vec<TraceRow>), OptimError> {
    let mut opt = JointOptimizer::new(scanset, model, params.clone())?;
    opt.run_schedule(schedule, StageLimit::Adaptive, None)?;
    Ok(opt.into_model_and_trace())
}
