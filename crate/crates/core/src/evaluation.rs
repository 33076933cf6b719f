//! Test-set metrics, help-rate curves, the ablation surface and the
//! Monte Carlo check of the family-wise error rate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    entropy_calibrate, knowno_calibrate, simple_calibrate, BaselineMethod, BaselineParams,
};
use crate::calibration::{calibrate_with, CalibrationConfig, HelpLevel, RiskSpec};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::policy::{policy_step, Outcome};
use crate::prediction::action_set;
use crate::sim::SyntheticGenerator;
use crate::stats::mc_bound;
use crate::types::{validate_dataset, ParamPair, PredictionSet, ScenarioRecord, StepContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Rcip,
    Knowno,
    Simple,
    Entropy,
    Nohelp,
}

impl MethodName {
    pub const ALL: [MethodName; 5] = [
        MethodName::Rcip,
        MethodName::Knowno,
        MethodName::Simple,
        MethodName::Entropy,
        MethodName::Nohelp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodName::Rcip => "rcip",
            MethodName::Knowno => "knowno",
            MethodName::Simple => "simple",
            MethodName::Entropy => "entropy",
            MethodName::Nohelp => "nohelp",
        }
    }

    pub fn baseline(self) -> Option<BaselineMethod> {
        match self {
            MethodName::Rcip => None,
            MethodName::Knowno => Some(BaselineMethod::KnowNo),
            MethodName::Simple => Some(BaselineMethod::SimpleSet),
            MethodName::Entropy => Some(BaselineMethod::EntropySet),
            MethodName::Nohelp => Some(BaselineMethod::NoHelp),
        }
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = MethodName::ALL.iter().map(|m| m.as_str()).collect();
                Error::invalid(format!(
                    "unknown method {s:?}; valid methods: {}",
                    names.join(", ")
                ))
            })
    }
}

/// A fully parameterized set builder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodParams {
    Rcip(ParamPair),
    Baseline(BaselineParams),
}

impl MethodParams {
    pub fn name(&self) -> MethodName {
        match self {
            MethodParams::Rcip(_) => MethodName::Rcip,
            MethodParams::Baseline(b) => match b.method {
                BaselineMethod::KnowNo => MethodName::Knowno,
                BaselineMethod::SimpleSet => MethodName::Simple,
                BaselineMethod::EntropySet => MethodName::Entropy,
                BaselineMethod::NoHelp => MethodName::Nohelp,
            },
        }
    }

    pub fn step_set(&self, step: &StepContext) -> Result<PredictionSet> {
        match self {
            MethodParams::Rcip(p) => action_set(step, *p),
            MethodParams::Baseline(b) => b.step_set(step),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: MethodName,
    pub params: MethodParams,
    pub records: u64,
    pub steps: u64,
    pub plan_successes: u64,
    pub plan_helps: u64,
    pub step_successes: u64,
    pub step_helps: u64,
    /// Steps where the set came out empty and the episode stopped.
    pub empty_sets: u64,
    pub plan_success: f64,
    pub plan_help: f64,
    /// Pooled over all steps of all records.
    pub step_success: f64,
    pub step_help: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    records: u64,
    steps: u64,
    plan_successes: u64,
    plan_helps: u64,
    step_successes: u64,
    step_helps: u64,
    empty_sets: u64,
}

impl Tally {
    fn add(mut self, o: Tally) -> Tally {
        self.records += o.records;
        self.steps += o.steps;
        self.plan_successes += o.plan_successes;
        self.plan_helps += o.plan_helps;
        self.step_successes += o.step_successes;
        self.step_helps += o.step_helps;
        self.empty_sets += o.empty_sets;
        self
    }
}

/// Rolls one record forward: an empty set stops the robot, and every step
/// from there on counts as failed.
fn rollout(record: &ScenarioRecord, params: &MethodParams) -> Result<Tally> {
    let mut t = Tally {
        records: 1,
        steps: record.steps.len() as u64,
        ..Tally::default()
    };
    let mut all_ok = true;
    for step in &record.steps {
        let set = params.step_set(step)?;
        let decision = policy_step(&set, step.true_intent, &step.intent_to_action);
        t.step_helps += u64::from(decision.help_triggered);
        match decision.outcome {
            Outcome::Execute(a) if a == step.true_action() => t.step_successes += 1,
            Outcome::Execute(_) => all_ok = false,
            Outcome::Failure => {
                t.empty_sets += 1;
                all_ok = false;
                break;
            }
        }
    }
    t.plan_successes = u64::from(all_ok);
    t.plan_helps = u64::from(t.step_helps > 0);
    assert!(t.plan_successes == 0 || t.step_successes == t.steps);
    assert!(t.plan_helps == 1 || t.step_helps == 0);
    Ok(t)
}

pub fn evaluate(records: &[ScenarioRecord], params: &MethodParams) -> Result<MetricsReport> {
    evaluate_with(records, params, Execution::default())
}

pub fn evaluate_with(
    records: &[ScenarioRecord],
    params: &MethodParams,
    exec: Execution,
) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::invalid("evaluation dataset is empty"));
    }
    validate_dataset(records)?;
    if let MethodParams::Baseline(b) = params {
        b.validate()?;
    }
    let mut tally = Tally::default();
    for t in exec.map_slice(records, |r| rollout(r, params)) {
        tally = tally.add(t?);
    }
    let ratio = |a: u64, b: u64| a as f64 / b as f64;
    Ok(MetricsReport {
        method: params.name(),
        params: *params,
        records: tally.records,
        steps: tally.steps,
        plan_successes: tally.plan_successes,
        plan_helps: tally.plan_helps,
        step_successes: tally.step_successes,
        step_helps: tally.step_helps,
        empty_sets: tally.empty_sets,
        plan_success: ratio(tally.plan_successes, tally.records),
        plan_help: ratio(tally.plan_helps, tally.records),
        step_success: ratio(tally.step_successes, tally.steps),
        step_help: ratio(tally.step_helps, tally.steps),
    })
}

/// Calibrates `method` on `cal` for plan success `target`. `None` when the
/// target cannot be reached on this data. RCIP uses `template` with its
/// risks replaced by miscoverage at `1 - target`.
pub fn calibrate_method(
    method: MethodName,
    cal: &[ScenarioRecord],
    target: f64,
    template: &CalibrationConfig,
    exec: Execution,
) -> Result<Option<MethodParams>> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("target {target} outside (0, 1)")));
    }
    let alpha = 1.0 - target;
    Ok(match method {
        MethodName::Rcip => {
            let config = CalibrationConfig {
                risks: vec![RiskSpec::miscoverage(alpha)],
                ..template.clone()
            };
            calibrate_with(cal, &config, exec)?
                .selected_params()
                .map(MethodParams::Rcip)
        }
        MethodName::Knowno => match knowno_calibrate(cal, alpha) {
            Ok(p) => Some(MethodParams::Baseline(p)),
            Err(Error::Infeasible(_)) => None,
            Err(e) => return Err(e),
        },
        MethodName::Simple => simple_calibrate(cal, target)?.map(MethodParams::Baseline),
        MethodName::Entropy => entropy_calibrate(cal, target)?.map(MethodParams::Baseline),
        MethodName::Nohelp => Some(MethodParams::Baseline(BaselineParams::no_help())),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub method: MethodName,
    pub target_success: f64,
    /// `None` when the target is infeasible.
    pub achieved_success: Option<f64>,
    pub help_rate: Option<f64>,
    pub feasible: bool,
}

fn check_targets(targets: &[f64]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::invalid("no targets"));
    }
    if targets.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::invalid("targets must lie in (0, 1)"));
    }
    if targets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("targets must be strictly ascending"));
    }
    Ok(())
}

pub fn help_rate_curve(
    cal: &[ScenarioRecord],
    test: &[ScenarioRecord],
    method: MethodName,
    targets: &[f64],
    template: &CalibrationConfig,
    exec: Execution,
) -> Result<Vec<CurvePoint>> {
    check_targets(targets)?;
    if cal.is_empty() || test.is_empty() {
        return Err(Error::invalid(
            "calibration and test sets must be non-empty",
        ));
    }
    let points = exec.map_slice(targets, |&target| -> Result<CurvePoint> {
        // the grid search inside is already parallel
        let params = calibrate_method(method, cal, target, template, Execution::Sequential)?;
        Ok(match params {
            Some(p) => {
                let m = evaluate_with(test, &p, Execution::Sequential)?;
                CurvePoint {
                    method,
                    target_success: target,
                    achieved_success: Some(m.plan_success),
                    help_rate: Some(m.plan_help),
                    feasible: true,
                }
            }
            None => CurvePoint {
                method,
                target_success: target,
                achieved_success: None,
                help_rate: None,
                feasible: false,
            },
        })
    });
    points.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub alpha_cov: f64,
    pub alpha_help: f64,
    /// Size of the valid set; 0 when infeasible.
    pub valid_size: usize,
}

/// Valid-set size over a grid of `(alpha_cov, alpha_help)`. A level of 0
/// admits nothing; a help level of 1 constrains nothing, so that cell
/// controls miscoverage alone.
pub fn ablation_surface(
    cal: &[ScenarioRecord],
    alpha_cov_grid: &[f64],
    alpha_help_grid: &[f64],
    template: &CalibrationConfig,
    help_level: HelpLevel,
    exec: Execution,
) -> Result<Vec<AblationCell>> {
    let in_unit = |a: &f64| (0.0..=1.0).contains(a);
    if !alpha_cov_grid.iter().all(in_unit) || !alpha_help_grid.iter().all(in_unit) {
        return Err(Error::invalid("ablation levels must lie in [0, 1]"));
    }
    let cells: Vec<(f64, f64)> = alpha_cov_grid
        .iter()
        .flat_map(|&c| alpha_help_grid.iter().map(move |&h| (c, h)))
        .collect();
    let sizes = exec.map_slice(&cells, |&(alpha_cov, alpha_help)| -> Result<usize> {
        if alpha_cov <= 0.0 || alpha_help <= 0.0 || alpha_cov >= 1.0 {
            return Ok(0);
        }
        let mut risks = vec![RiskSpec::miscoverage(alpha_cov)];
        if alpha_help < 1.0 {
            risks.push(RiskSpec::help(alpha_help, help_level));
        }
        let config = CalibrationConfig {
            risks,
            ..template.clone()
        };
        Ok(calibrate_with(cal, &config, Execution::Sequential)?
            .valid
            .len())
    });
    cells
        .into_iter()
        .zip(sizes)
        .map(|((alpha_cov, alpha_help), size)| {
            Ok(AblationCell {
                alpha_cov,
                alpha_help,
                valid_size: size?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub trial: usize,
    pub valid_size: usize,
    /// Valid points whose true risk exceeds its level for some risk.
    pub violating: usize,
    /// Largest `true risk - alpha` over valid points and risks.
    pub worst_excess: Option<f64>,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwerReport {
    pub trials: usize,
    pub calibration_size: usize,
    pub violations: usize,
    pub observed_fwer: f64,
    /// `delta` plus three Monte Carlo standard errors.
    pub bound: f64,
    pub pass: bool,
    pub warning: Option<String>,
    pub per_trial: Vec<TrialLog>,
}

pub const MIN_FWER_TRIALS: usize = 100;

/// Draws `trials` fresh calibration sets of size `m`, calibrates on each
/// and checks every valid point against the generator's true risks.
pub fn fwer_monte_carlo(
    generator: &SyntheticGenerator,
    config: &CalibrationConfig,
    m: usize,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<FwerReport> {
    if trials == 0 || m == 0 {
        return Err(Error::invalid("need at least one trial and one record"));
    }
    config.validate()?;
    let probe = config.params_at(0);
    for r in &config.risks {
        if generator.true_risk(r.kind, probe).is_none() {
            return Err(Error::invalid(format!(
                "generator has no closed-form {:?} risk",
                r.kind
            )));
        }
    }
    let logs = exec.map_range(trials, |trial| -> Result<TrialLog> {
        let start = (trial as u64) * (m as u64);
        let records = generator.generate(seed, start, m, Execution::Sequential);
        let result = calibrate_with(&records, config, Execution::Sequential)?;
        let mut violating = 0;
        let mut worst: Option<f64> = None;
        for params in result.valid_params() {
            let mut bad = false;
            for r in &config.risks {
                let truth = generator.true_risk(r.kind, params).expect("checked above");
                let excess = truth - r.alpha;
                worst = Some(worst.map_or(excess, |w| w.max(excess)));
                bad |= excess > 0.0;
            }
            violating += usize::from(bad);
        }
        Ok(TrialLog {
            trial,
            valid_size: result.valid.len(),
            violating,
            worst_excess: worst,
            violated: violating > 0,
        })
    });
    let per_trial = logs.into_iter().collect::<Result<Vec<_>>>()?;
    let violations = per_trial.iter().filter(|t| t.violated).count();
    let observed_fwer = violations as f64 / trials as f64;
    let bound = mc_bound(config.delta, trials as u64, 3.0);
    Ok(FwerReport {
        trials,
        calibration_size: m,
        violations,
        observed_fwer,
        bound,
        pass: observed_fwer <= bound,
        warning: (trials < MIN_FWER_TRIALS).then(|| {
            format!("only {trials} trials; at least {MIN_FWER_TRIALS} are needed for a meaningful estimate")
        }),
        per_trial,
    })
}
