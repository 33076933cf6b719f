//! Domain types shared by every module.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a human intent within one decision step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntentId(pub usize);

/// Index of a discrete robot action within one decision step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

impl fmt::Display for IntentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}", self.0)
    }
}

/// One decision step: raw predictor logits per intent, the intent to
/// optimal-action map, and the ground-truth intent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepContext {
    pub logits: Vec<f64>,
    pub intent_to_action: Vec<ActionId>,
    pub true_intent: IntentId,
}

impl StepContext {
    pub fn new(
        logits: Vec<f64>,
        intent_to_action: Vec<ActionId>,
        true_intent: IntentId,
    ) -> Result<Self> {
        let step = StepContext {
            logits,
            intent_to_action,
            true_intent,
        };
        step.validate()?;
        Ok(step)
    }

    pub fn num_intents(&self) -> usize {
        self.logits.len()
    }

    /// The action induced by the true intent.
    pub fn true_action(&self) -> ActionId {
        self.intent_to_action[self.true_intent.0]
    }

    /// Distinct actions referenced by the intent map, ascending.
    pub fn distinct_actions(&self) -> Vec<ActionId> {
        let mut actions = self.intent_to_action.clone();
        actions.sort_unstable();
        actions.dedup();
        actions
    }

    pub fn validate(&self) -> Result<()> {
        if self.logits.is_empty() {
            return Err(Error::invalid("step has no intents"));
        }
        if let Some(bad) = self.logits.iter().find(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite logit {bad}")));
        }
        if self.intent_to_action.len() != self.logits.len() {
            return Err(Error::invalid(format!(
                "intent_to_action has {} entries but there are {} logits",
                self.intent_to_action.len(),
                self.logits.len()
            )));
        }
        if self.true_intent.0 >= self.logits.len() {
            return Err(Error::invalid(format!(
                "true intent {} out of range for {} intents",
                self.true_intent.0,
                self.logits.len()
            )));
        }
        Ok(())
    }
}

/// One i.i.d. scenario: a sequence of decision steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub scenario_id: String,
    pub steps: Vec<StepContext>,
}

impl ScenarioRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn true_intents(&self) -> Vec<IntentId> {
        self.steps.iter().map(|s| s.true_intent).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::invalid(format!(
                "scenario {} has no decision steps",
                self.scenario_id
            )));
        }
        for (t, step) in self.steps.iter().enumerate() {
            step.validate().map_err(|e| {
                Error::invalid(format!("scenario {} step {t}: {e}", self.scenario_id))
            })?;
        }
        Ok(())
    }
}

/// Checks every record and that scenario ids are unique.
pub fn validate_dataset(records: &[ScenarioRecord]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(records.len());
    for r in records {
        r.validate()?;
        if !seen.insert(r.scenario_id.as_str()) {
            return Err(Error::invalid(format!(
                "duplicate scenario id {}",
                r.scenario_id
            )));
        }
    }
    Ok(())
}

/// A `(lambda, theta)` hypothesis: confidence threshold and temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPair {
    pub lambda: f64,
    pub theta: f64,
}

impl ParamPair {
    pub fn new(lambda: f64, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(format!("lambda {lambda} outside [0, 1]")));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::invalid(format!("theta {theta} must be positive")));
        }
        Ok(ParamPair { lambda, theta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Empty,
    Singleton,
    Help,
}

impl SetKind {
    pub fn from_len(len: usize) -> Self {
        match len {
            0 => SetKind::Empty,
            1 => SetKind::Singleton,
            _ => SetKind::Help,
        }
    }
}

/// A set of candidate actions with their aggregated confidence scores.
///
/// The kind is derived from the cardinality and can't drift from it.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    scores: BTreeMap<ActionId, f64>,
}

impl PredictionSet {
    pub fn empty() -> Self {
        PredictionSet {
            scores: BTreeMap::new(),
        }
    }

    pub fn from_scores(scores: impl IntoIterator<Item = (ActionId, f64)>) -> Self {
        PredictionSet {
            scores: scores.into_iter().collect(),
        }
    }

    pub fn kind(&self) -> SetKind {
        SetKind::from_len(self.scores.len())
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn contains(&self, action: ActionId) -> bool {
        self.scores.contains_key(&action)
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> + '_ {
        self.scores.keys().copied()
    }

    pub fn scores(&self) -> &BTreeMap<ActionId, f64> {
        &self.scores
    }

    /// The unique action of a singleton set.
    pub fn single(&self) -> Option<ActionId> {
        if self.scores.len() == 1 {
            self.scores.keys().next().copied()
        } else {
            None
        }
    }
}
