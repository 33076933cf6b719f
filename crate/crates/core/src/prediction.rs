//! Scoring math and prediction-set construction.
//!
//! Logits are multiplied by the temperature `theta` before the softmax, so a
//! small `theta` flattens the distribution and a large one sharpens it.
//! Intent probabilities are summed per induced action, and an action enters
//! the prediction set when that sum is at least `lambda` (inclusive, exact
//! floating-point comparison).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::{ActionId, IntentId, ParamPair, PredictionSet, ScenarioRecord, StepContext};

/// `exp(theta * l_z) / sum exp(theta * l_z')`, evaluated with max-subtraction.
pub fn softmax_with_temperature(logits: &[f64], theta: f64) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax of empty logits"));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::invalid(format!(
            "temperature {theta} must be positive"
        )));
    }
    if let Some(bad) = logits.iter().find(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("non-finite logit {bad}")));
    }
    let max = logits
        .iter()
        .map(|&l| theta * l)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|&l| (theta * l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Intents whose probability is at least `lambda`.
pub fn intent_set(probs: &[f64], lambda: f64) -> Result<Vec<IntentId>> {
    check_lambda(lambda)?;
    Ok(probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= lambda)
        .map(|(z, _)| IntentId(z))
        .collect())
}

/// Sums intent probabilities per induced action.
pub fn aggregate_action_scores(
    probs: &[f64],
    intent_to_action: &[ActionId],
) -> Result<BTreeMap<ActionId, f64>> {
    if probs.len() != intent_to_action.len() {
        return Err(Error::invalid(format!(
            "{} probabilities but {} intent-to-action entries",
            probs.len(),
            intent_to_action.len()
        )));
    }
    let mut scores = BTreeMap::new();
    for (&p, &a) in probs.iter().zip(intent_to_action) {
        *scores.entry(a).or_insert(0.0) += p;
    }
    Ok(scores)
}

/// Aggregated action scores of a step at temperature `theta`.
pub fn step_action_scores(step: &StepContext, theta: f64) -> Result<BTreeMap<ActionId, f64>> {
    let probs = softmax_with_temperature(&step.logits, theta)?;
    aggregate_action_scores(&probs, &step.intent_to_action)
}

/// Thresholds aggregated scores at `lambda`.
pub fn threshold_scores(scores: &BTreeMap<ActionId, f64>, lambda: f64) -> PredictionSet {
    PredictionSet::from_scores(
        scores
            .iter()
            .filter(|(_, &s)| s >= lambda)
            .map(|(&a, &s)| (a, s)),
    )
}

pub fn action_set(step: &StepContext, params: ParamPair) -> Result<PredictionSet> {
    check_lambda(params.lambda)?;
    step.validate()?;
    let scores = step_action_scores(step, params.theta)?;
    Ok(threshold_scores(&scores, params.lambda))
}

/// Lowest aggregated score, over the steps, of the action each intent in
/// `intents` induces.
pub fn sequence_confidence(
    record: &ScenarioRecord,
    intents: &[IntentId],
    theta: f64,
) -> Result<f64> {
    if intents.len() != record.steps.len() {
        return Err(Error::invalid(format!(
            "intent sequence has {} entries for a {}-step record",
            intents.len(),
            record.steps.len()
        )));
    }
    if record.steps.is_empty() {
        return Err(Error::invalid("record has no steps"));
    }
    let mut lowest = f64::INFINITY;
    for (step, &z) in record.steps.iter().zip(intents) {
        if z.0 >= step.num_intents() {
            return Err(Error::invalid(format!("intent {} out of range", z.0)));
        }
        let scores = step_action_scores(step, theta)?;
        lowest = lowest.min(scores[&step.intent_to_action[z.0]]);
    }
    Ok(lowest)
}

/// Per-step prediction sets built from each step's own observation only.
/// Their Cartesian product is the sequence-level set.
pub fn causal_action_set(record: &ScenarioRecord, params: ParamPair) -> Result<Vec<PredictionSet>> {
    record
        .steps
        .iter()
        .map(|step| action_set(step, params))
        .collect()
}

/// Scores that decide a step's set at every threshold: the true action's
/// score and the second largest action score (`-inf` with a single action).
/// The true action is covered iff `true_score >= lambda`, and the set holds
/// two or more actions iff `runner_up >= lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSummary {
    pub true_score: f64,
    pub runner_up: f64,
}

pub fn step_summary(step: &StepContext, theta: f64) -> Result<StepSummary> {
    let scores = step_action_scores(step, theta)?;
    let true_score = scores[&step.true_action()];
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &s in scores.values() {
        if s > first {
            second = first;
            first = s;
        } else if s > second {
            second = s;
        }
    }
    Ok(StepSummary {
        true_score,
        runner_up: second,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::invalid(format!("lambda {lambda} outside [0, 1]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SetKind;

    fn abc_step() -> StepContext {
        // probabilities [0.4, 0.2, 0.3, 0.1] through logits = ln p at theta = 1
        StepContext::new(
            [0.4_f64, 0.2, 0.3, 0.1].iter().map(|p| p.ln()).collect(),
            vec![ActionId(0), ActionId(0), ActionId(1), ActionId(2)],
            IntentId(2),
        )
        .unwrap()
    }

    #[test]
    fn softmax_uniform_for_constant_logits() {
        for c in [-40.0, 0.0, 3.5, 700.0] {
            let p = softmax_with_temperature(&[c, c, c], 1.0).unwrap();
            for x in p {
                assert!((x - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn softmax_small_temperature_is_near_uniform() {
        let p = softmax_with_temperature(&[5.0, 0.0], 0.001).unwrap();
        // closed form: 1 / (1 + e^{-0.005}) = 0.50124999...
        assert!((p[0] - 1.0 / (1.0 + (-0.005_f64).exp())).abs() < 1e-15);
        assert!((p[0] - 0.5).abs() < 0.01 && (p[1] - 0.5).abs() < 0.01);
    }

    #[test]
    fn softmax_matches_hand_values() {
        let p = softmax_with_temperature(&[2.0, 1.0, 0.0], 1.0).unwrap();
        let e = std::f64::consts::E;
        let z = e * e + e + 1.0;
        let expected = [e * e / z, e / z, 1.0 / z];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((p[0] - 0.6652).abs() < 1e-4);
        assert!((p[1] - 0.2447).abs() < 1e-4);
        assert!((p[2] - 0.0900).abs() < 1e-4);
    }

    #[test]
    fn softmax_errors() {
        assert!(softmax_with_temperature(&[], 1.0).is_err());
        assert!(softmax_with_temperature(&[1.0, f64::INFINITY], 1.0).is_err());
        assert!(softmax_with_temperature(&[1.0], 0.0).is_err());
        assert_eq!(softmax_with_temperature(&[-3.0], 2.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn intent_threshold_is_inclusive() {
        let p = [0.5, 0.3, 0.2];
        assert_eq!(
            intent_set(&p, 0.25).unwrap(),
            vec![IntentId(0), IntentId(1)]
        );
        assert_eq!(intent_set(&p, 0.0).unwrap().len(), 3);
        assert_eq!(intent_set(&p, 0.5).unwrap(), vec![IntentId(0)]);
        assert!(intent_set(&p, 1.5).is_err());
        assert!(intent_set(&p, -0.1).is_err());
    }

    #[test]
    fn aggregation_sums_per_action() {
        let probs = [0.4, 0.2, 0.3, 0.1];
        let map = [ActionId(0), ActionId(0), ActionId(1), ActionId(2)];
        let s = aggregate_action_scores(&probs, &map).unwrap();
        assert_eq!(s.len(), 3);
        assert!((s[&ActionId(0)] - 0.6).abs() < 1e-15);
        assert!((s[&ActionId(1)] - 0.3).abs() < 1e-15);
        assert!((s[&ActionId(2)] - 0.1).abs() < 1e-15);

        let ident: Vec<ActionId> = (0..4).map(ActionId).collect();
        let s = aggregate_action_scores(&probs, &ident).unwrap();
        assert_eq!(s.values().copied().collect::<Vec<_>>(), probs.to_vec());

        assert!(aggregate_action_scores(&probs, &map[..3]).is_err());
    }

    #[test]
    fn action_set_kinds() {
        let step = abc_step();
        let set = |lambda| action_set(&step, ParamPair::new(lambda, 1.0).unwrap()).unwrap();
        let s = set(0.5);
        assert_eq!(s.kind(), SetKind::Singleton);
        assert!(s.contains(ActionId(0)));
        let h = set(0.25);
        assert_eq!(h.kind(), SetKind::Help);
        assert_eq!(
            h.actions().collect::<Vec<_>>(),
            vec![ActionId(0), ActionId(1)]
        );
        assert_eq!(set(0.7).kind(), SetKind::Empty);
        for &score in h.scores().values() {
            assert!(score >= 0.25);
        }
    }

    #[test]
    fn single_intent_is_always_singleton() {
        let step = StepContext::new(vec![-2.0], vec![ActionId(4)], IntentId(0)).unwrap();
        for lambda in [0.0, 0.5, 1.0] {
            let s = action_set(&step, ParamPair::new(lambda, 0.3).unwrap()).unwrap();
            assert_eq!(s.single(), Some(ActionId(4)));
        }
    }

    fn record_with_scores(scores: &[f64]) -> ScenarioRecord {
        // two intents per step, intent 0 gets probability `s` at theta = 1
        ScenarioRecord {
            scenario_id: "r".into(),
            steps: scores
                .iter()
                .map(|&s| {
                    StepContext::new(
                        vec![s.ln(), (1.0 - s).ln()],
                        vec![ActionId(0), ActionId(1)],
                        IntentId(0),
                    )
                    .unwrap()
                })
                .collect(),
        }
    }

    #[test]
    fn sequence_confidence_is_the_minimum() {
        let r = record_with_scores(&[0.9, 0.4, 0.7]);
        let c = sequence_confidence(&r, &r.true_intents(), 1.0).unwrap();
        assert!((c - 0.4).abs() < 1e-12);
        let one = record_with_scores(&[0.65]);
        let c = sequence_confidence(&one, &one.true_intents(), 1.0).unwrap();
        assert!((c - 0.65).abs() < 1e-12);
        assert!(sequence_confidence(&r, &[IntentId(0)], 1.0).is_err());
    }

    #[test]
    fn sequence_confidence_zero_step() {
        // exact zero through a logit underflow
        let mut r = record_with_scores(&[0.9, 0.8]);
        r.steps[1].logits = vec![-1000.0, 0.0];
        assert_eq!(
            sequence_confidence(&r, &r.true_intents(), 1.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn causal_single_step_matches_action_set() {
        let r = ScenarioRecord {
            scenario_id: "x".into(),
            steps: vec![abc_step()],
        };
        let params = ParamPair::new(0.25, 1.3).unwrap();
        let causal = causal_action_set(&r, params).unwrap();
        assert_eq!(causal.len(), 1);
        assert_eq!(causal[0], action_set(&r.steps[0], params).unwrap());
    }

    #[test]
    fn summary_decides_membership_and_help() {
        let step = abc_step();
        let sum = step_summary(&step, 1.0).unwrap();
        assert!((sum.true_score - 0.3).abs() < 1e-15);
        assert!((sum.runner_up - 0.3).abs() < 1e-15);
        for lambda in [0.0, 0.1, 0.29, 0.3, 0.31, 0.6, 0.61, 1.0] {
            let set = action_set(&step, ParamPair::new(lambda, 1.0).unwrap()).unwrap();
            assert_eq!(set.contains(step.true_action()), sum.true_score >= lambda);
            assert_eq!(set.len() >= 2, sum.runner_up >= lambda);
        }
    }
}
