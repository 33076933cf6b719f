//! Scenario generators.

pub mod hallway;
pub mod synthetic;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use hallway::{
    generate_dataset, generate_range, optimal_action, sample_scenario, synthetic_predictor_logits,
    AgentState, EpisodeLog, PredictorPreset, WorldConfig,
};
pub use synthetic::SyntheticGenerator;

/// Independent stream for one episode: the ChaCha stream id is the episode
/// index, so episodes never share random numbers and can be generated in
/// any order.
pub fn episode_rng(seed: u64, episode_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode_index);
    rng
}
