//! Per-temperature summaries that answer every threshold at once.
//!
//! For a fixed temperature a record is covered at `lambda` iff the lowest
//! true-action score over its steps is at least `lambda`, and a step asks
//! for help iff its runner-up action score is at least `lambda`. Sorting
//! these scores turns each empirical risk over the whole lambda grid into a
//! binary search.

use std::collections::BTreeMap;

use crate::calibration::loss::HelpLevel;
use crate::calibration::RiskKind;
use crate::error::Result;
use crate::prediction::step_summary;
use crate::types::ScenarioRecord;

/// Scores of one record at one temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordStats {
    /// Sequence confidence of the true intents; covered iff `>= lambda`.
    pub coverage_score: f64,
    /// Largest runner-up over the steps; plan help iff `>= lambda`.
    pub help_score: f64,
    pub step_runner_ups: Vec<f64>,
}

impl RecordStats {
    pub fn build(record: &ScenarioRecord, theta: f64) -> Result<Self> {
        let mut coverage_score = f64::INFINITY;
        let mut help_score = f64::NEG_INFINITY;
        let mut step_runner_ups = Vec::with_capacity(record.steps.len());
        for step in &record.steps {
            let s = step_summary(step, theta)?;
            coverage_score = coverage_score.min(s.true_score);
            help_score = help_score.max(s.runner_up);
            step_runner_ups.push(s.runner_up);
        }
        Ok(RecordStats {
            coverage_score,
            help_score,
            step_runner_ups,
        })
    }

    pub fn miscovered(&self, lambda: f64) -> bool {
        self.coverage_score < lambda
    }

    pub fn plan_help(&self, lambda: f64) -> bool {
        self.help_score >= lambda
    }
}

/// Sorted scores of a whole dataset at one temperature.
#[derive(Debug, Clone)]
pub struct ThetaProfile {
    records: usize,
    coverage: Vec<f64>,
    plan_help: Vec<f64>,
    /// Runner-ups pooled by record length, so step-level help averages
    /// per record before averaging over records.
    step_help: BTreeMap<usize, Vec<f64>>,
}

impl ThetaProfile {
    pub fn from_stats(stats: &[RecordStats]) -> Self {
        let mut coverage: Vec<f64> = stats.iter().map(|s| s.coverage_score).collect();
        let mut plan_help: Vec<f64> = stats.iter().map(|s| s.help_score).collect();
        let mut step_help: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for s in stats {
            step_help
                .entry(s.step_runner_ups.len())
                .or_default()
                .extend_from_slice(&s.step_runner_ups);
        }
        coverage.sort_by(f64::total_cmp);
        plan_help.sort_by(f64::total_cmp);
        for v in step_help.values_mut() {
            v.sort_by(f64::total_cmp);
        }
        ThetaProfile {
            records: stats.len(),
            coverage,
            plan_help,
            step_help,
        }
    }

    pub fn build(records: &[ScenarioRecord], theta: f64) -> Result<Self> {
        let stats = records
            .iter()
            .map(|r| RecordStats::build(r, theta))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_stats(&stats))
    }

    pub fn len(&self) -> usize {
        self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records == 0
    }

    pub fn miscoverage_count(&self, lambda: f64) -> usize {
        self.coverage.partition_point(|&s| s < lambda)
    }

    pub fn plan_help_count(&self, lambda: f64) -> usize {
        self.plan_help.len() - self.plan_help.partition_point(|&s| s < lambda)
    }

    pub fn miscoverage(&self, lambda: f64) -> f64 {
        self.miscoverage_count(lambda) as f64 / self.records as f64
    }

    pub fn help(&self, lambda: f64, level: HelpLevel) -> f64 {
        match level {
            HelpLevel::Plan => self.plan_help_count(lambda) as f64 / self.records as f64,
            HelpLevel::Step => {
                let mut total = 0.0;
                for (&len, ups) in &self.step_help {
                    let count = ups.len() - ups.partition_point(|&s| s < lambda);
                    total += count as f64 / len as f64;
                }
                total / self.records as f64
            }
        }
    }

    pub fn risk(&self, kind: RiskKind, lambda: f64) -> f64 {
        match kind {
            RiskKind::Miscoverage => self.miscoverage(lambda),
            RiskKind::HelpRate(level) => self.help(lambda, level),
        }
    }
}
