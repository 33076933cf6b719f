//! Risk-calibrated interactive planning.
//!
//! A predictor emits logits over a small set of human intents at every
//! decision step. Each intent induces an optimal robot action; temperature
//! scaled scores are aggregated per action and thresholded into a
//! prediction set. When the set holds more than one action the robot asks
//! the human for help.
//!
//! The threshold `lambda` and temperature `theta` are chosen with
//! Learn-then-Test: every grid point is a null hypothesis "risk is not
//! controlled", tested with a Hoeffding-Bentkus p-value, and the family-wise
//! error rate is held at `delta` by fixed-sequence testing.
//!
//! Modules:
//! - [`prediction`] scoring math and prediction sets,
//! - [`policy`] the deployment rule,
//! - [`calibration`] losses, p-values and the grid search,
//! - [`baselines`] KnowNo, Simple Set, Entropy Set and No Help,
//! - [`sim`] hallway navigation and synthetic scenario generators,
//! - [`evaluation`] test metrics, curves, ablation and FWER Monte Carlo,
//! - [`io`] the JSON/JSONL file formats.

#![deny(unsafe_code)]

// `!(x > 0.0)` is how range checks reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod calibration;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod io;
pub mod policy;
pub mod prediction;
pub mod sim;
pub mod stats;
pub mod types;

pub use error::{Error, Result};
pub use exec::Execution;
pub use types::{
    ActionId, IntentId, ParamPair, PredictionSet, ScenarioRecord, SetKind, StepContext,
};
