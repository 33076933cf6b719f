//! Comparison methods at a fixed temperature of 1.
//!
//! All of them act on aggregated action scores, so their set sizes compare
//! directly with the calibrated sets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::{sequence_confidence, step_action_scores};
use crate::types::{ActionId, PredictionSet, ScenarioRecord, StepContext};

pub const THETA_FIXED: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    /// Split conformal threshold on sequence-level nonconformity.
    #[serde(alias = "knowno")]
    KnowNo,
    /// Top actions until a cumulative mass target is reached.
    #[serde(alias = "simple")]
    SimpleSet,
    /// Top action when the score entropy is below a cutoff, else everything.
    #[serde(alias = "entropy")]
    EntropySet,
    /// Always the top action.
    #[serde(alias = "nohelp")]
    NoHelp,
}

/// `threshold` is the conformal quantile, the mass target or the entropy
/// cutoff depending on the method; No Help ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub method: BaselineMethod,
    pub threshold: f64,
    pub theta_fixed: f64,
}

impl BaselineParams {
    pub fn new(method: BaselineMethod, threshold: f64) -> Result<Self> {
        let params = BaselineParams {
            method,
            threshold,
            theta_fixed: THETA_FIXED,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn no_help() -> Self {
        BaselineParams {
            method: BaselineMethod::NoHelp,
            threshold: 0.0,
            theta_fixed: THETA_FIXED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.threshold;
        let ok = match self.method {
            BaselineMethod::KnowNo => (0.0..=1.0).contains(&t),
            BaselineMethod::SimpleSet => t > 0.0 && t <= 1.0,
            BaselineMethod::EntropySet => t >= 0.0,
            BaselineMethod::NoHelp => true,
        };
        if !ok {
            return Err(Error::invalid(format!(
                "threshold {t} out of range for {:?}",
                self.method
            )));
        }
        if !(self.theta_fixed > 0.0) {
            return Err(Error::invalid("theta_fixed must be positive"));
        }
        Ok(())
    }

    /// The prediction set this baseline builds for one step.
    pub fn step_set(&self, step: &StepContext) -> Result<PredictionSet> {
        let scores = step_action_scores(step, self.theta_fixed)?;
        Ok(match self.method {
            BaselineMethod::KnowNo => knowno_from_scores(&scores, self.threshold),
            BaselineMethod::SimpleSet => simple_from_scores(&scores, self.threshold),
            BaselineMethod::EntropySet => entropy_from_scores(&scores, self.threshold),
            BaselineMethod::NoHelp => top_action(&scores),
        })
    }
}

/// Conformal quantile index `ceil((m + 1)(1 - alpha))`, 1-based.
fn conformal_rank(m: usize, alpha: f64) -> usize {
    ((m as f64 + 1.0) * (1.0 - alpha) - 1e-9).ceil().max(1.0) as usize
}

/// Split conformal calibration with nonconformity `1 - sequence confidence`
/// of the true intents.
pub fn knowno_calibrate(records: &[ScenarioRecord], alpha: f64) -> Result<BaselineParams> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    let m = records.len();
    let rank = conformal_rank(m, alpha);
    if rank > m {
        let min_m = (1..)
            .find(|&n| conformal_rank(n, alpha) <= n)
            .unwrap_or(usize::MAX);
        return Err(Error::Infeasible(format!(
            "conformal quantile at alpha {alpha} needs at least {min_m} calibration records, got {m}"
        )));
    }
    let mut scores = records
        .iter()
        .map(|r| Ok(1.0 - sequence_confidence(r, &r.true_intents(), THETA_FIXED)?))
        .collect::<Result<Vec<f64>>>()?;
    scores.sort_by(f64::total_cmp);
    BaselineParams::new(BaselineMethod::KnowNo, scores[rank - 1])
}

/// Actions whose nonconformity `1 - score` is at most `qhat`; the same as
/// `score >= 1 - qhat` without the round trip through subtraction.
fn knowno_from_scores(scores: &BTreeMap<ActionId, f64>, qhat: f64) -> PredictionSet {
    PredictionSet::from_scores(
        scores
            .iter()
            .filter(|(_, &s)| 1.0 - s <= qhat)
            .map(|(&a, &s)| (a, s)),
    )
}

/// Scores sorted descending, ties to the lower action id.
fn ranked(scores: &BTreeMap<ActionId, f64>) -> Vec<(ActionId, f64)> {
    let mut v: Vec<(ActionId, f64)> = scores.iter().map(|(&a, &s)| (a, s)).collect();
    v.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    v
}

fn simple_from_scores(scores: &BTreeMap<ActionId, f64>, mass_target: f64) -> PredictionSet {
    let mut picked = Vec::new();
    let mut mass = 0.0;
    for (a, s) in ranked(scores) {
        if mass >= mass_target || s <= 0.0 {
            break;
        }
        picked.push((a, s));
        mass += s;
    }
    PredictionSet::from_scores(picked)
}

/// Natural-log Shannon entropy with `0 ln 0 = 0`.
pub fn entropy(scores: impl IntoIterator<Item = f64>) -> f64 {
    scores
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

fn entropy_from_scores(scores: &BTreeMap<ActionId, f64>, cutoff: f64) -> PredictionSet {
    if entropy(scores.values().copied()) < cutoff {
        top_action(scores)
    } else {
        PredictionSet::from_scores(scores.iter().map(|(&a, &s)| (a, s)))
    }
}

fn top_action(scores: &BTreeMap<ActionId, f64>) -> PredictionSet {
    let mut best: Option<(ActionId, f64)> = None;
    for (&a, &s) in scores {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((a, s));
        }
    }
    PredictionSet::from_scores(best)
}

pub fn simple_set(step: &StepContext, mass_target: f64) -> Result<PredictionSet> {
    BaselineParams::new(BaselineMethod::SimpleSet, mass_target)?.step_set(step)
}

pub fn entropy_set(step: &StepContext, entropy_cutoff: f64) -> Result<PredictionSet> {
    BaselineParams::new(BaselineMethod::EntropySet, entropy_cutoff)?.step_set(step)
}

pub fn no_help(step: &StepContext) -> Result<PredictionSet> {
    BaselineParams::no_help().step_set(step)
}

/// Fraction of records whose true induced action is in every step's set.
pub fn plan_coverage(records: &[ScenarioRecord], params: &BaselineParams) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::invalid("coverage over an empty dataset"));
    }
    let mut covered = 0usize;
    for r in records {
        let mut all = true;
        for step in &r.steps {
            if !params.step_set(step)?.contains(step.true_action()) {
                all = false;
                break;
            }
        }
        covered += usize::from(all);
    }
    Ok(covered as f64 / records.len() as f64)
}

/// Mass targets searched by [`simple_calibrate`].
pub const SIMPLE_MASS_GRID: usize = 1000;

/// Smallest mass target on a 1/1000 grid whose empirical plan coverage on
/// `records` reaches `target`. No statistical guarantee.
pub fn simple_calibrate(records: &[ScenarioRecord], target: f64) -> Result<Option<BaselineParams>> {
    let grid: Vec<f64> = (1..=SIMPLE_MASS_GRID)
        .map(|k| k as f64 / SIMPLE_MASS_GRID as f64)
        .collect();
    // coverage is non-decreasing in the mass target
    let mut lo = 0;
    let mut hi = grid.len();
    while lo < hi {
        let mid = (lo + hi) / 2;
        let p = BaselineParams::new(BaselineMethod::SimpleSet, grid[mid])?;
        if plan_coverage(records, &p)? >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    if lo == grid.len() {
        return Ok(None);
    }
    Ok(Some(BaselineParams::new(
        BaselineMethod::SimpleSet,
        grid[lo],
    )?))
}

/// Largest entropy cutoff whose empirical plan coverage on `records` reaches
/// `target`, searched over the observed step entropies. No statistical
/// guarantee.
pub fn entropy_calibrate(
    records: &[ScenarioRecord],
    target: f64,
) -> Result<Option<BaselineParams>> {
    let mut cutoffs = vec![0.0];
    for r in records {
        for step in &r.steps {
            let scores = step_action_scores(step, THETA_FIXED)?;
            cutoffs.push(entropy(scores.values().copied()));
        }
    }
    cutoffs.push(f64::MAX);
    cutoffs.sort_by(f64::total_cmp);
    cutoffs.dedup();
    let covers = |c: f64| -> Result<bool> {
        Ok(plan_coverage(
            records,
            &BaselineParams::new(BaselineMethod::EntropySet, c)?,
        )? >= target)
    };
    if !covers(cutoffs[0])? {
        return Ok(None);
    }
    // coverage is non-increasing in the cutoff; find the last index that covers
    let mut lo = 0;
    let mut hi = cutoffs.len() - 1;
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if covers(cutoffs[mid])? {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(Some(BaselineParams::new(
        BaselineMethod::EntropySet,
        cutoffs[lo],
    )?))
}
