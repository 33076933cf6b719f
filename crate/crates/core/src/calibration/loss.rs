//! Per-record losses and empirical risk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::{causal_action_set, sequence_confidence};
use crate::types::{ParamPair, ScenarioRecord};

/// How help is counted within one multi-step record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HelpLevel {
    /// 1 if any step asks for help.
    #[default]
    Plan,
    /// Fraction of steps that ask for help.
    Step,
}

/// 0 when every step's true induced action is covered, else 1.
pub fn miscoverage_loss(record: &ScenarioRecord, params: ParamPair) -> Result<f64> {
    let conf = sequence_confidence(record, &record.true_intents(), params.theta)?;
    Ok(if conf >= params.lambda { 0.0 } else { 1.0 })
}

pub fn help_loss(record: &ScenarioRecord, params: ParamPair, level: HelpLevel) -> Result<f64> {
    let sets = causal_action_set(record, params)?;
    let helped = sets.iter().filter(|s| s.len() > 1).count();
    Ok(match level {
        HelpLevel::Plan => f64::from(u8::from(helped > 0)),
        HelpLevel::Step => helped as f64 / sets.len() as f64,
    })
}

/// Mean loss over the records.
pub fn empirical_risk<F>(records: &[ScenarioRecord], params: ParamPair, loss: F) -> Result<f64>
where
    F: Fn(&ScenarioRecord, ParamPair) -> Result<f64>,
{
    if records.is_empty() {
        return Err(Error::invalid("empirical risk over an empty dataset"));
    }
    let mut total = 0.0;
    for r in records {
        total += loss(r, params)?;
    }
    Ok(total / records.len() as f64)
}
