//! Differentiation and optimization contract.
//!
//! Losses are built as scalar nodes on a [`Graph`] that records coarse-grained
//! operations (render, loss reductions, discriminator passes). Each recorded
//! op carries a hand-derived adjoint; [`Graph::gradients`] replays them in
//! reverse. The correctness contract is agreement with central finite
//! differences, enforced by [`finite_diff_check`].

mod adam;
mod graph;

pub use adam::{adam_step, AdamState};
pub use graph::{GradStore, Graph, GraphOp, NodeId, Value};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("parameter group {0:?} was never recorded by the computation")]
    GroupNotRecorded(GroupKind),
    #[error("non-finite gradient for group {0:?}")]
    NonFiniteGradient(GroupKind),
    #[error("non-finite loss value {0}")]
    NonFiniteLoss(f64),
    #[error("discriminator input {0}x{1} is below the 16-pixel minimum")]
    InputTooSmall(usize, usize),
}

/// The four optimizable parameter families of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKind {
    Vertices,
    Texels,
    PoseDelta,
    DiscriminatorWeights,
}

impl GroupKind {
    pub const ALL: [GroupKind; 4] = [
        GroupKind::Vertices,
        GroupKind::Texels,
        GroupKind::PoseDelta,
        GroupKind::DiscriminatorWeights,
    ];

    pub(crate) fn index(self) -> usize {
        match self {
            GroupKind::Vertices => 0,
            GroupKind::Texels => 1,
            GroupKind::PoseDelta => 2,
            GroupKind::DiscriminatorWeights => 3,
        }
    }
}

/// A flat parameter buffer with its learning rate.
#[derive(Debug, Clone)]
pub struct ParamGroup {
    pub kind: GroupKind,
    pub values: Vec<f64>,
    pub learning_rate: f64,
}

impl ParamGroup {
    pub fn new(kind: GroupKind, values: Vec<f64>, learning_rate: f64) -> Self {
        assert!(learning_rate > 0.0, "learning rate must be positive");
        ParamGroup {
            kind,
            values,
            learning_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Max relative error between an analytic gradient and central differences of
/// `f`, with the relative denominator floored by max(|a|, |n|, 1e-6).
pub fn finite_diff_check<F>(mut f: F, params: &[f64], analytic: &[f64], eps: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let all: Vec<usize> = (0..params.len()).collect();
    finite_diff_check_sampled(&mut f, params, analytic, eps, &all)
}

/// Same check restricted to a subset of parameter indices (used where a full
/// sweep would be prohibitively slow, e.g. discriminator weights).
pub fn finite_diff_check_sampled<F>(
    f: &mut F,
    params: &[f64],
    analytic: &[f64],
    eps: f64,
    indices: &[usize],
) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len());
    assert!(eps > 0.0);
    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for &i in indices {
        let p0 = work[i];
        work[i] = p0 + eps;
        let fp = f(&work);
        work[i] = p0 - eps;
        let fm = f(&work);
        work[i] = p0;
        let numeric = (fp - fm) / (2.0 * eps);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}
