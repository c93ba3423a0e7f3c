//! Optimization strategies for the scheduling ablation.

use super::stage::{JointModel, JointOptimizer, StageLimit};
use super::{OptimError, RunParams, Schedule, TraceRow};
use crate::eval::eval_common_loss;
use crate::scene::ScanSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    /// Patience-controlled interleaving (the full method).
    Adaptive,
    /// All three parameter groups updated together each step, common loss
    /// only.
    Hybrid,
    /// Interleaved stages with exactly this many internal steps each.
    Fixed(usize),
}

impl StrategyKind {
    pub fn name(self) -> String {
        match self {
            StrategyKind::Adaptive => "adaptive".to_string(),
            StrategyKind::Hybrid => "hybrid".to_string(),
            StrategyKind::Fixed(k) => format!("fixed:{k}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StrategyOutcome {
    pub kind: StrategyKind,
    pub model: JointModel,
    pub trace: Vec<TraceRow>,
    pub steps: usize,
    /// Deterministic whole-set common loss of the final model.
    pub final_common: f64,
}

/// Run one strategy from a deep copy of the initial model. `budget` caps the
/// total step count (hybrid runs exactly that many steps and requires it).
pub fn run_strategy(
    kind: StrategyKind,
    scanset: &ScanSet,
    initial: &JointModel,
    params: &RunParams,
    schedule: &Schedule,
    budget: Option<usize>,
) -> Result<StrategyOutcome, OptimError> {
    let mut opt = JointOptimizer::new(scanset, initial.clone(), params.clone())?;
    match kind {
        StrategyKind::Adaptive => {
            opt.run_schedule(schedule, StageLimit::Adaptive, budget)?;
        }
        StrategyKind::Fixed(k) => {
            opt.run_schedule(schedule, StageLimit::Fixed(k), budget)?;
        }
        StrategyKind::Hybrid => {
            let steps = budget.expect("the hybrid strategy needs an explicit step budget");
            opt.run_hybrid(steps)?;
        }
    }
    let steps = opt.global_step();
    let (model, trace) = opt.into_model_and_trace();
    let final_common = eval_common_loss(scanset, &model, params)?;
    Ok(StrategyOutcome {
        kind,
        model,
        trace,
        steps,
        final_common,
    })
}
