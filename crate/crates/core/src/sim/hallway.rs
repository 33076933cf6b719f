//! Hallway navigation scenarios.
//!
//! Two cars start at opposite ends of a 16 m x 9 m arena split across its
//! length by a wall with five parallel 1 m hallways. The human picks a
//! hallway uniformly at random at the start of the episode and drives
//! through it; the robot must cross the other way through a different
//! hallway. Every `steps_per_decision` environment steps a synthetic
//! predictor scores the five hallways from the human's pose, and the
//! planner maps each possible intent to the robot's best hallway.

use std::f64::consts::{FRAC_PI_3, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::episode_rng;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::types::{ActionId, IntentId, ScenarioRecord, StepContext};

/// Wall thickness along the arena length.
const WALL_DEPTH_M: f64 = 1.0;
/// Start poses are sampled this far from the arena boundary.
const START_MARGIN_M: f64 = 0.5;
/// Start poses keep at least this much room before the wall.
const START_CLEARANCE_M: f64 = 3.0;
/// Proportional heading gain per environment step.
const TURN_GAIN: f64 = 0.25;
/// Below this forward heading component the ray to the wall is not used.
const MIN_FORWARD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorPreset {
    Weak,
    Medium,
    Converged,
}

impl PredictorPreset {
    /// `(sharpness, noise_sd)` of the synthetic predictor.
    pub fn quality(self) -> (f64, f64) {
        match self {
            PredictorPreset::Weak => (0.5, 2.0),
            PredictorPreset::Medium => (1.0, 1.0),
            PredictorPreset::Converged => (8.0, 0.0),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "weak" => Ok(PredictorPreset::Weak),
            "medium" => Ok(PredictorPreset::Medium),
            "converged" => Ok(PredictorPreset::Converged),
            other => Err(Error::invalid(format!(
                "unknown preset {other:?}; expected weak, medium or converged"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub arena_length_m: f64,
    pub arena_width_m: f64,
    pub num_hallways: usize,
    pub hallway_width_m: f64,
    pub env_steps: usize,
    pub steps_per_decision: usize,
    pub predictor_sharpness: f64,
    pub predictor_noise_sd: f64,
    pub seed: u64,
}

impl WorldConfig {
    pub fn new(preset: PredictorPreset, seed: u64) -> Self {
        let (predictor_sharpness, predictor_noise_sd) = preset.quality();
        WorldConfig {
            arena_length_m: 16.0,
            arena_width_m: 9.0,
            num_hallways: 5,
            hallway_width_m: 1.0,
            env_steps: 200,
            steps_per_decision: 20,
            predictor_sharpness,
            predictor_noise_sd,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.arena_length_m > 2.0 * (START_MARGIN_M + START_CLEARANCE_M) + WALL_DEPTH_M) {
            return Err(Error::invalid("arena too short for the start regions"));
        }
        if !(self.arena_width_m > 2.0 * START_MARGIN_M) {
            return Err(Error::invalid("arena too narrow"));
        }
        if self.num_hallways < 2 {
            return Err(Error::invalid("need at least two hallways"));
        }
        if !(self.hallway_width_m > 0.0
            && self.hallway_width_m <= self.arena_width_m / self.num_hallways as f64)
        {
            return Err(Error::invalid("hallways do not fit in the arena width"));
        }
        if self.steps_per_decision == 0
            || self.env_steps == 0
            || !self.env_steps.is_multiple_of(self.steps_per_decision)
        {
            return Err(Error::invalid(
                "env_steps must be a positive multiple of steps_per_decision",
            ));
        }
        if !(self.predictor_sharpness >= 0.0 && self.predictor_noise_sd >= 0.0) {
            return Err(Error::invalid("predictor sharpness and noise must be >= 0"));
        }
        Ok(())
    }

    pub fn decision_steps(&self) -> usize {
        self.env_steps / self.steps_per_decision
    }

    /// Lateral centre of hallway `j`; centres are equally spaced.
    pub fn hallway_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.arena_width_m / self.num_hallways as f64
    }

    /// Distance travelled per environment step, so that a car crosses the
    /// arena length in `env_steps` steps.
    pub fn speed(&self) -> f64 {
        self.arena_length_m / self.env_steps as f64
    }

    /// Wall face the human reaches first.
    pub fn human_entrance_x(&self) -> f64 {
        0.5 * (self.arena_length_m - WALL_DEPTH_M)
    }

    pub fn robot_entrance_x(&self) -> f64 {
        0.5 * (self.arena_length_m + WALL_DEPTH_M)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: [f64; 2],
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Approach,
    Transit,
}

/// Scripted car: heads for its hallway entrance, then drives through to
/// the far end along the hallway's centre line.
#[derive(Debug, Clone)]
struct Driver {
    state: AgentState,
    phase: Phase,
    hallway: usize,
}

impl Driver {
    fn step(&mut self, entrance_x: f64, exit_x: f64, config: &WorldConfig) {
        let v = config.speed();
        let y = config.hallway_center(self.hallway);
        let target = match self.phase {
            Phase::Approach => [entrance_x, y],
            Phase::Transit => [exit_x, y],
        };
        let dx = target[0] - self.state.position[0];
        let dy = target[1] - self.state.position[1];
        let dist = dx.hypot(dy);
        if dist <= v {
            self.state.position = target;
            if self.phase == Phase::Approach {
                self.phase = Phase::Transit;
            }
            return;
        }
        let desired = dy.atan2(dx);
        self.state.heading =
            wrap_angle(self.state.heading + TURN_GAIN * wrap_angle(desired - self.state.heading));
        let [x, y] = self.state.position;
        self.state.position = [
            (x + v * self.state.heading.cos()).clamp(0.0, config.arena_length_m),
            (y + v * self.state.heading.sin()).clamp(0.0, config.arena_width_m),
        ];
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI) % (2.0 * PI);
    if a < 0.0 {
        a += 2.0 * PI;
    }
    a - PI
}

/// Lateral point where the human's heading ray meets the wall, or its own
/// lateral position once it is at or past the wall.
pub fn projected_lateral(human: &AgentState, config: &WorldConfig) -> f64 {
    let [x, y] = human.position;
    let entrance = config.human_entrance_x();
    let forward = human.heading.cos();
    let proj = if x < entrance && forward > MIN_FORWARD {
        y + (entrance - x) * human.heading.tan()
    } else {
        y
    };
    proj.clamp(0.0, config.arena_width_m)
}

/// `logit[j] = -sharpness * |projected lateral - centre_j| + noise_sd * N(0, 1)`.
pub fn synthetic_predictor_logits<R: Rng + ?Sized>(
    human: &AgentState,
    config: &WorldConfig,
    rng: &mut R,
) -> Vec<f64> {
    let proj = projected_lateral(human, config);
    (0..config.num_hallways)
        .map(|j| {
            let noise: f64 = rng.sample(StandardNormal);
            -config.predictor_sharpness * (proj - config.hallway_center(j)).abs()
                + config.predictor_noise_sd * noise
        })
        .collect()
}

/// Distances closer than this count as a tie.
const TIE_TOLERANCE_M: f64 = 1e-9;

/// The hallway other than the human's that is laterally closest to the
/// robot; ties go to the lower index.
pub fn optimal_action(
    robot: &AgentState,
    human_intent: IntentId,
    config: &WorldConfig,
) -> ActionId {
    let y = robot.position[1];
    let mut best: Option<(usize, f64)> = None;
    for j in (0..config.num_hallways).filter(|&j| j != human_intent.0) {
        let d = (y - config.hallway_center(j)).abs();
        if best.is_none_or(|(_, b)| d < b - TIE_TOLERANCE_M) {
            best = Some((j, d));
        }
    }
    ActionId(best.expect("at least two hallways").0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub record: ScenarioRecord,
    pub human_intents: Vec<IntentId>,
    /// `(human, robot)` after every environment step.
    pub trajectories: Vec<(AgentState, AgentState)>,
}

pub fn sample_scenario(config: &WorldConfig, episode_index: u64) -> Result<EpisodeLog> {
    config.validate()?;
    let mut rng = episode_rng(config.seed, episode_index);
    let n = config.num_hallways;
    let intent = IntentId(rng.random_range(0..n));

    let human_entrance = config.human_entrance_x();
    let robot_entrance = config.robot_entrance_x();
    let human_pose = AgentState {
        position: [
            rng.random_range(START_MARGIN_M..human_entrance - START_CLEARANCE_M),
            rng.random_range(START_MARGIN_M..config.arena_width_m - START_MARGIN_M),
        ],
        heading: rng.random_range(-FRAC_PI_3..FRAC_PI_3),
    };
    let robot_pose = AgentState {
        position: [
            rng.random_range(
                robot_entrance + START_CLEARANCE_M..config.arena_length_m - START_MARGIN_M,
            ),
            rng.random_range(START_MARGIN_M..config.arena_width_m - START_MARGIN_M),
        ],
        heading: PI + rng.random_range(-FRAC_PI_3..FRAC_PI_3),
    };

    let mut human = Driver {
        state: human_pose,
        phase: Phase::Approach,
        hallway: intent.0,
    };
    let mut robot = Driver {
        state: robot_pose,
        phase: Phase::Approach,
        hallway: optimal_action(&robot_pose, intent, config).0,
    };

    let mut steps = Vec::with_capacity(config.decision_steps());
    let mut trajectories = Vec::with_capacity(config.env_steps);
    for t in 1..=config.env_steps {
        human.step(
            human_entrance,
            config.arena_length_m - START_MARGIN_M,
            config,
        );
        if robot.phase == Phase::Approach {
            robot.hallway = optimal_action(&robot.state, intent, config).0;
        }
        robot.step(robot_entrance, START_MARGIN_M, config);
        trajectories.push((human.state, robot.state));

        if t % config.steps_per_decision == 0 {
            let logits = synthetic_predictor_logits(&human.state, config, &mut rng);
            let intent_to_action = (0..n)
                .map(|z| optimal_action(&robot.state, IntentId(z), config))
                .collect();
            steps.push(StepContext::new(logits, intent_to_action, intent)?);
        }
    }

    Ok(EpisodeLog {
        record: ScenarioRecord {
            scenario_id: format!("hallway-{}-{episode_index}", config.seed),
            steps,
        },
        human_intents: vec![intent; config.decision_steps()],
        trajectories,
    })
}

/// Episodes `start .. start + count`; records only.
pub fn generate_range(
    config: &WorldConfig,
    start: u64,
    count: usize,
    exec: Execution,
) -> Result<Vec<ScenarioRecord>> {
    config.validate()?;
    exec.map_range(count, |i| {
        sample_scenario(config, start + i as u64).map(|log| log.record)
    })
    .into_iter()
    .collect()
}

pub fn generate_dataset(config: &WorldConfig, count: usize) -> Result<Vec<ScenarioRecord>> {
    if count == 0 {
        return Err(Error::invalid("dataset must have at least one episode"));
    }
    generate_range(config, 0, count, Execution::default())
}
