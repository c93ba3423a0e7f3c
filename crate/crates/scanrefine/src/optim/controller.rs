//! Patience-based stage termination.
//!
//! Tracks the best loss seen in the stage; a step improves only if it beats
//! the best by the relative threshold. After `patience` consecutive
//! non-improvements, or at the step cap, the controller emits `Next`.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("non-finite loss {0}")]
    NonFiniteLoss(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Keep,
    Next,
}

#[derive(Debug, Clone)]
pub struct AdaptiveState {
    /// Best value seen (None before the first loss arrives; the first call
    /// initializes it and counts as a non-improvement against itself).
    pub best_value: Option<f64>,
    pub counter: usize,
    pub threshold: f64,
    pub patience: usize,
    /// Steps consumed.
    pub step: usize,
    pub t_max: usize,
}

impl AdaptiveState {
    pub fn new(threshold: f64, patience: usize, t_max: usize) -> Self {
        assert!(threshold > 0.0);
        assert!(patience >= 1);
        AdaptiveState {
            best_value: None,
            counter: 0,
            threshold,
            patience,
            step: 0,
            t_max,
        }
    }

    fn decide(&self) -> Decision {
        if self.counter >= self.patience || self.step >= self.t_max {
            Decision::Next
        } else {
            Decision::Keep
        }
    }

    /// Count a discarded step (e.g. a non-finite loss) as a non-improvement.
    pub fn record_no_improvement(&mut self) -> Decision {
        self.counter = (self.counter + 1).min(self.patience);
        self.step += 1;
        self.decide()
    }
}

/// One controller update: improvement iff `loss < best * (1 - threshold)`.
pub fn controller_step(
    state: &mut AdaptiveState,
    loss: f64,
) -> Result<Decision, ControllerError> {
    if !loss.is_finite() {
        return Err(ControllerError::NonFiniteLoss(loss));
    }
    let best = state.best_value.get_or_insert(loss);
    if loss < *best * (1.0 - state.threshold) {
        state.counter = 0;
        *best = loss;
    } else {
        state.counter = (state.counter + 1).min(state.patience);
    }
    state.step += 1;
    Ok(state.decide())
}
