//! The batch exploration loop: collect, log ground-truth interaction, train.

use std::path::Path;

use bee_nn::{checkpoint, seeded, Parameterized, Rng};
use bee_sim::{generate_relevant_set, interaction_report, Image, TabletopEnv};
use ndarray::Array2;
use rand::Rng as _;

use crate::baselines::{DisagreementEnsemble, SmmDensityPair};
use crate::buffer::ReplayBuffer;
use crate::config::{ExperimentConfig, Method};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::images::{random_crop, to_matrix};
use crate::metrics::{MetricsLog, MetricsRow};
use crate::planner::{act_episode, random_episode, ActedEpisode};
use crate::relevance::RelevanceEnsemble;
use crate::world_model::{TrainStats, WorldModel};

pub const DATASET_FILE: &str = "dataset.bin";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const WORLD_MODEL_CHECKPOINT: &str = "world_model.ckpt";
pub const DIAGNOSTIC_CHECKPOINT: &str = "diagnostic_world_model.ckpt";

/// Method-specific reward state.
enum Explorer {
    Bee(RelevanceEnsemble),
    Disagreement(DisagreementEnsemble),
    Smm(SmmDensityPair),
    Random,
}

pub struct ExplorationOutput {
    pub dataset: Dataset,
    pub metrics: MetricsLog,
    pub world_model: WorldModel,
    /// Total planner invocations over the run.
    pub planner_calls: usize,
}

/// Runs one exploration experiment. When `out` is given, the config, metrics
/// CSV, dataset and final checkpoints are written there; if training hits a
/// non-finite loss, the world model is checkpointed for diagnosis before the
/// error is returned. `progress` sees each metrics row as it is produced.
pub fn run_batch_exploration(
    config: &ExperimentConfig,
    out: Option<&Path>,
    mut progress: impl FnMut(&MetricsRow),
) -> Result<ExplorationOutput> {
    config.validate()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(CONFIG_FILE), config.to_json())?;
    }
    let layout = config.layout.resolve();
    let mut rng = seeded(config.seed);
    let mut env = TabletopEnv::new(layout.clone())?;
    let examples: Vec<Image> = generate_relevant_set(&layout, config.examples, &mut rng)
        .into_iter()
        .map(|o| o.image)
        .collect();
    let mut wm = WorldModel::new(config.world_model.clone(), &mut rng);
    let latent = config.world_model.latent_dim;
    let mut explorer = match config.method {
        Method::Bee => Explorer::Bee(RelevanceEnsemble::new(latent, config.relevance.clone(), &mut rng)),
        Method::Disagreement => Explorer::Disagreement(DisagreementEnsemble::new(
            config.disagreement_heads,
            &config.world_model,
            &mut rng,
        )),
        Method::Smm => Explorer::Smm(SmmDensityPair::new(latent, config.smm.clone(), &mut rng)),
        Method::Random => Explorer::Random,
    };

    let mut buffer = ReplayBuffer::new();
    let mut metrics = MetricsLog::default();
    let mut planner_calls = 0;
    for episode in 0..config.episodes {
        let acted = if episode < config.warmup_episodes || matches!(explorer, Explorer::Random) {
            random_episode(&mut env, &mut rng)?
        } else {
            let plan = &config.plan;
            match &explorer {
                Explorer::Bee(ens) => {
                    let reward = |_: &Array2<f64>, _: &[Array2<f64>], p: &[Array2<f64>]| {
                        ens.trajectory_reward(p, config.reward_mode)
                    };
                    act_episode(&mut env, &wm, &wm.dynamics, &reward, plan, &mut rng)?
                }
                Explorer::Disagreement(d) => act_episode(&mut env, &wm, &wm.dynamics, d, plan, &mut rng)?,
                Explorer::Smm(s) => act_episode(&mut env, &wm, &wm.dynamics, s, plan, &mut rng)?,
                Explorer::Random => unreachable!("random never plans"),
            }
        };
        planner_calls += acted.planner_calls;
        let mean_r_exp = match &explorer {
            Explorer::Bee(ens) => {
                let z = wm.encode_mean_images(&acted.episode.frames)?;
                let r = ens.reward(z.view(), config.reward_mode)?;
                Some(r.iter().sum::<f64>() / r.len() as f64)
            }
            _ => None,
        };
        let row = partial_row(episode, &acted, &layout, mean_r_exp);
        buffer.push(acted.episode);

        let trained = train_after_episode(config, &mut wm, &mut explorer, &buffer, &examples, episode, &mut rng);
        let stats = match trained {
            Ok(s) => s,
            Err(e) => {
                if let Some(dir) = out {
                    checkpoint::save(dir.join(DIAGNOSTIC_CHECKPOINT), &wm)?;
                    metrics.save(dir.join(METRICS_FILE))?;
                }
                return Err(e);
            }
        };
        let n = stats.len().max(1) as f64;
        let row = MetricsRow {
            vae_loss: stats.iter().map(|s| s.vae.total).sum::<f64>() / n,
            kl: stats.iter().map(|s| s.vae.kl).sum::<f64>() / n,
            dyn_loss: stats.iter().map(|s| s.dynamics).sum::<f64>() / n,
            ..row
        };
        progress(&row);
        metrics.push(row);
    }

    let dataset = Dataset::new(config.hash(), buffer.into_episodes());
    if let Some(dir) = out {
        dataset.save(dir.join(DATASET_FILE))?;
        metrics.save(dir.join(METRICS_FILE))?;
        checkpoint::save(dir.join(WORLD_MODEL_CHECKPOINT), &wm)?;
        match &explorer {
            Explorer::Bee(ens) => save_all(dir, "relevance", ens.members())?,
            Explorer::Disagreement(d) => save_all(dir, "disagreement_head", d.heads())?,
            Explorer::Smm(s) => {
                checkpoint::save(dir.join("smm_target.ckpt"), &s.target)?;
                checkpoint::save(dir.join("smm_policy.ckpt"), &s.policy)?;
            }
            Explorer::Random => {}
        }
    }
    Ok(ExplorationOutput {
        dataset,
        metrics,
        world_model: wm,
        planner_calls,
    })
}

fn save_all<M: Parameterized>(dir: &Path, stem: &str, models: &[M]) -> Result<()> {
    for (i, m) in models.iter().enumerate() {
        checkpoint::save(dir.join(format!("{stem}_{i}.ckpt")), m)?;
    }
    Ok(())
}

fn partial_row(
    episode: usize,
    acted: &ActedEpisode,
    layout: &bee_sim::LayoutSpec,
    mean_r_exp: Option<f64>,
) -> MetricsRow {
    let report = interaction_report(layout, &acted.truth);
    let plan_top_score = if acted.top_scores.is_empty() {
        None
    } else {
        Some(acted.top_scores.iter().sum::<f64>() / acted.top_scores.len() as f64)
    };
    MetricsRow {
        episode,
        target_moved: report.any_target_moved(),
        planner_calls: acted.planner_calls,
        mean_r_exp,
        plan_top_score,
        vae_loss: 0.0,
        kl: 0.0,
        dyn_loss: 0.0,
        displacement: report.objects.iter().map(|o| o.max_displacement).collect(),
    }
}

/// World-model updates, then the method's own updates.
fn train_after_episode(
    config: &ExperimentConfig,
    wm: &mut WorldModel,
    explorer: &mut Explorer,
    buffer: &ReplayBuffer,
    examples: &[Image],
    episode: usize,
    rng: &mut Rng,
) -> Result<Vec<TrainStats>> {
    let training = &config.training;
    let mut stats = Vec::with_capacity(training.updates_per_episode);
    for _ in 0..training.updates_per_episode {
        stats.push(wm.train_step(buffer, examples, episode, training, rng)?);
    }
    match explorer {
        Explorer::Bee(ens) => {
            ens.train_members(buffer, examples, wm, training.window)?;
        }
        Explorer::Disagreement(d) => {
            let shortest = buffer.episodes().iter().map(|e| e.len()).min().unwrap_or(0);
            let horizon = training.schedule.horizon_at(episode).min(shortest);
            if horizon > 0 {
                for _ in 0..training.updates_per_episode {
                    d.train_step(buffer, wm, horizon, training.batch_size, training.window, rng)?;
                }
            }
        }
        Explorer::Smm(s) => {
            for _ in 0..training.updates_per_episode {
                let n = config.smm.batch_size;
                let crops: Vec<Image> = (0..n)
                    .map(|_| random_crop(&examples[rng.random_range(0..examples.len())], training.crop_pad, rng))
                    .collect();
                let relevant = wm.vae.encode_mean(to_matrix(&crops).view())?;
                let visited = wm.encode_mean_images(buffer.sample_frames(n, training.window, rng))?;
                s.train_step(&relevant, &visited, rng)?;
            }
        }
        Explorer::Random => {}
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world_model::{HorizonSchedule, WorldModelConfig};

    pub(crate) fn tiny_config(method: Method) -> ExperimentConfig {
        let mut c = ExperimentConfig {
            method,
            episodes: 3,
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

    #[test]
    fn every_method_runs_and_logs_each_episode() {
        for method in [Method::Bee, Method::Disagreement, Method::Smm, Method::Random] {
            let c = tiny_config(method);
            let mut seen = 0;
            let out = run_batch_exploration(&c, None, |_| seen += 1).unwrap();
            assert_eq!(seen, 3);
            assert_eq!(out.metrics.len(), 3);
            assert_eq!(out.dataset.transitions(), 150);
            let expected_calls = if method == Method::Random { 0 } else { 10 };
            assert_eq!(out.planner_calls, expected_calls, "{method}");
            assert_eq!(out.metrics.rows[2].mean_r_exp.is_some(), method == Method::Bee);
            assert!(out.metrics.rows[0].plan_top_score.is_none());
        }
    }
}
