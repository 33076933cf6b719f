//! Deployment rule for a prediction set.

use serde::{Deserialize, Serialize};

use crate::types::{ActionId, IntentId, PredictionSet, SetKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Execute(ActionId),
    /// Empty prediction set: the robot stops and the task fails.
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepDecision {
    pub outcome: Outcome,
    pub help_triggered: bool,
}

/// Singleton: act. Several actions: ask the human, who reveals `oracle_intent`,
/// then act on it. Empty: fail.
pub fn policy_step(
    pred_set: &PredictionSet,
    oracle_intent: IntentId,
    intent_to_action: &[ActionId],
) -> StepDecision {
    match pred_set.kind() {
        SetKind::Singleton => StepDecision {
            outcome: Outcome::Execute(pred_set.single().expect("singleton")),
            help_triggered: false,
        },
        SetKind::Help => StepDecision {
            outcome: Outcome::Execute(intent_to_action[oracle_intent.0]),
            help_triggered: true,
        },
        SetKind::Empty => StepDecision {
            outcome: Outcome::Failure,
            help_triggered: false,
        },
    }
}
