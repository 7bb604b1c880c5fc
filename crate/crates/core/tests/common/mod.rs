#![allow(dead_code)]

use bee_core::{ExperimentConfig, HorizonSchedule, Method, WorldModelConfig};

/// A configuration small enough for a debug-speed test run: narrow networks,
/// few candidates, two updates per episode.
pub fn tiny_config(method: Method, episodes: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        method,
        episodes,
        warmup_episodes: 1,
        examples: 8,
        disagreement_heads: 2,
        world_model: WorldModelConfig {
            encoder_hidden: 16,
            decoder_hidden: 16,
            latent_dim: 4,
            recurrent_hidden: 4,
            head_hidden: 8,
            ..WorldModelConfig::default()
        },
        ..ExperimentConfig::default()
    };
    c.training.updates_per_episode = 2;
    c.training.batch_size = 4;
    c.training.schedule = HorizonSchedule::constant(3);
    c.plan.num_samples = 16;
    c.plan.elite_count = 4;
    c.relevance.hidden = vec![8];
    c.smm.hidden = 8;
    c.smm.inner_latent = 2;
    c.smm.batch_size = 4;
    c
}
