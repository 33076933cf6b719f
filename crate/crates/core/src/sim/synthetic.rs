//! Synthetic scenario generators for the statistical checks.
//!
//! The uniform-logit family has two intents mapped to two actions with
//! logits `[l, 0]`, `l ~ U(lo, hi)`, and intent 0 drawn with probability
//! `sigmoid(l)`, so the predictor is calibrated at temperature 1. Every
//! risk at every `(lambda, theta)` then has a closed form through
//! integrals of the sigmoid. Multi-step records draw a fresh logit and
//! intent at each step.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::episode_rng;
use crate::calibration::{HelpLevel, RiskKind};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::types::{ActionId, IntentId, ParamPair, ScenarioRecord, StepContext};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformLogit {
    pub steps: usize,
    pub lo: f64,
    pub hi: f64,
}

impl UniformLogit {
    /// `(1 / (hi - lo)) * integral of sigmoid(l) over [a, b]`, clamped to the support.
    fn mass_first(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.clamp(self.lo, self.hi), b.clamp(self.lo, self.hi));
        (softplus(b) - softplus(a)).max(0.0) / (self.hi - self.lo)
    }

    /// Same for the second intent, whose density is `sigmoid(-l)`.
    fn mass_second(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.clamp(self.lo, self.hi), b.clamp(self.lo, self.hi));
        (softplus(-a) - softplus(-b)).max(0.0) / (self.hi - self.lo)
    }

    /// Probability that one step misses its true action.
    pub fn step_miscoverage(&self, params: ParamPair) -> f64 {
        let ParamPair { lambda, theta } = params;
        if lambda <= 0.0 {
            return 0.0;
        }
        if lambda >= 1.0 {
            return 1.0;
        }
        // action 0 scores sigmoid(theta * l), action 1 sigmoid(-theta * l)
        let a = logit(lambda) / theta;
        self.mass_first(self.lo, a) + self.mass_second(-a, self.hi)
    }

    /// Probability that one step keeps both actions.
    pub fn step_help(&self, params: ParamPair) -> f64 {
        let ParamPair { lambda, theta } = params;
        if lambda <= 0.0 {
            return 1.0;
        }
        if lambda > 0.5 {
            return 0.0;
        }
        let c = logit(1.0 - lambda) / theta;
        (c.min(self.hi) - (-c).max(self.lo)).max(0.0) / (self.hi - self.lo)
    }

    pub fn true_risk(&self, kind: RiskKind, params: ParamPair) -> f64 {
        let t = self.steps as i32;
        match kind {
            RiskKind::Miscoverage => 1.0 - (1.0 - self.step_miscoverage(params)).powi(t),
            RiskKind::HelpRate(HelpLevel::Plan) => 1.0 - (1.0 - self.step_help(params)).powi(t),
            RiskKind::HelpRate(HelpLevel::Step) => self.step_help(params),
        }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Overconfident four-intent predictor whose raw logits are scaled by
/// `scale` before scoring. A mix of confident-correct, diffuse-correct and
/// confused-wrong steps, so the temperature that best separates right from
/// wrong predictions is far from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Misspecified {
    pub scale: f64,
    pub p_confident: f64,
    pub p_diffuse: f64,
    pub jitter_sd: f64,
}

const MISSPECIFIED_INTENTS: usize = 4;
const CONFIDENT_MARGIN: f64 = 2.0;
const DIFFUSE_MARGIN: f64 = 0.5;
const CONFUSED_TRUE: f64 = -1.0;
const CONFUSED_REST: f64 = -20.0;

impl Misspecified {
    fn logits<R: Rng>(&self, rng: &mut R, true_intent: usize) -> Vec<f64> {
        let n = MISSPECIFIED_INTENTS;
        let u: f64 = rng.random();
        let mut base = vec![0.0; n];
        if u < self.p_confident {
            base[true_intent] = CONFIDENT_MARGIN;
        } else if u < self.p_confident + self.p_diffuse {
            base[true_intent] = DIFFUSE_MARGIN;
        } else {
            let distractor = (true_intent + rng.random_range(1..n)) % n;
            base.fill(CONFUSED_REST);
            base[distractor] = 0.0;
            base[true_intent] = CONFUSED_TRUE;
        }
        base.into_iter()
            .map(|b| {
                let e: f64 = rng.sample(StandardNormal);
                self.scale * (b + self.jitter_sd * e)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum SyntheticGenerator {
    UniformLogit(UniformLogit),
    /// One intent, one action: nothing can go wrong.
    ZeroLoss,
    Misspecified(Misspecified),
}

pub const GENERATOR_NAMES: [&str; 4] = ["bernoulli", "multistep", "zero", "misspecified"];

impl SyntheticGenerator {
    /// Single-step two-action generator.
    pub fn bernoulli() -> Self {
        SyntheticGenerator::UniformLogit(UniformLogit {
            steps: 1,
            lo: -4.0,
            hi: 4.0,
        })
    }

    /// Three steps with intents redrawn at every step.
    pub fn multistep() -> Self {
        SyntheticGenerator::UniformLogit(UniformLogit {
            steps: 3,
            lo: -8.0,
            hi: 8.0,
        })
    }

    pub fn misspecified() -> Self {
        SyntheticGenerator::Misspecified(Misspecified {
            scale: 2.0,
            p_confident: 0.2,
            p_diffuse: 0.4,
            jitter_sd: 0.1,
        })
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "bernoulli" => Ok(Self::bernoulli()),
            "multistep" => Ok(Self::multistep()),
            "zero" => Ok(SyntheticGenerator::ZeroLoss),
            "misspecified" => Ok(Self::misspecified()),
            other => Err(Error::invalid(format!(
                "unknown generator {other:?}; expected one of {}",
                GENERATOR_NAMES.join(", ")
            ))),
        }
    }

    pub fn sample(&self, seed: u64, index: u64) -> ScenarioRecord {
        let mut rng = episode_rng(seed, index);
        let steps = match self {
            SyntheticGenerator::UniformLogit(g) => (0..g.steps)
                .map(|_| {
                    let l = rng.random_range(g.lo..g.hi);
                    let z = if rng.random::<f64>() < sigmoid(l) {
                        0
                    } else {
                        1
                    };
                    StepContext {
                        logits: vec![l, 0.0],
                        intent_to_action: vec![ActionId(0), ActionId(1)],
                        true_intent: IntentId(z),
                    }
                })
                .collect(),
            SyntheticGenerator::ZeroLoss => vec![StepContext {
                logits: vec![0.0],
                intent_to_action: vec![ActionId(0)],
                true_intent: IntentId(0),
            }],
            SyntheticGenerator::Misspecified(g) => {
                let z = rng.random_range(0..MISSPECIFIED_INTENTS);
                vec![StepContext {
                    logits: g.logits(&mut rng, z),
                    intent_to_action: (0..MISSPECIFIED_INTENTS).map(ActionId).collect(),
                    true_intent: IntentId(z),
                }]
            }
        };
        ScenarioRecord {
            scenario_id: format!("synthetic-{seed}-{index}"),
            steps,
        }
    }

    /// Records `start .. start + count`.
    pub fn generate(
        &self,
        seed: u64,
        start: u64,
        count: usize,
        exec: Execution,
    ) -> Vec<ScenarioRecord> {
        exec.map_range(count, |i| self.sample(seed, start + i as u64))
    }

    /// Population risk, when it has a closed form.
    pub fn true_risk(&self, kind: RiskKind, params: ParamPair) -> Option<f64> {
        match self {
            SyntheticGenerator::UniformLogit(g) => Some(g.true_risk(kind, params)),
            SyntheticGenerator::ZeroLoss => Some(0.0),
            SyntheticGenerator::Misspecified(_) => None,
        }
    }
}
