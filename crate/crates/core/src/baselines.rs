//! Comparison exploration rewards that share the planner: ensemble
//! disagreement, state marginal matching, and uniform random actions.

use bee_nn::{Activation, AdamState, DenseNet, Parameterized};
use bee_sim::Action;
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::ReplayBuffer;
use crate::error::Result;
use crate::planner::{uniform_action, TrajectoryReward};
use crate::world_model::{Dynamics, Vae, WorldModel, WorldModelConfig};

/// Per-step mean over latent dimensions of the population variance across
/// heads, summed over steps. `per_head[h][k]` is head `h`'s prediction batch
/// at step `k`.
pub fn disagreement(per_head: &[Vec<Array2<f64>>]) -> Vec<f64> {
    let Some(first) = per_head.first() else {
        return Vec::new();
    };
    let rows = first.first().map_or(0, |a| a.nrows());
    let mut total = vec![0.0; rows];
    let n = per_head.len() as f64;
    for k in 0..first.len() {
        // shifted by head 0 so that exact agreement gives exactly zero
        let shifted: Vec<Array2<f64>> = per_head.iter().map(|h| &h[k] - &first[k]).collect();
        let mut mean = Array2::<f64>::zeros(first[k].raw_dim());
        for d in &shifted {
            mean += d;
        }
        mean /= n;
        let mut var = Array2::<f64>::zeros(mean.raw_dim());
        for d in &shifted {
            let c = d - &mean;
            var += &(&c * &c);
        }
        var /= n;
        let dims = var.ncols() as f64;
        for (t, row) in total.iter_mut().zip(var.rows()) {
            *t += row.sum() / dims;
        }
    }
    total
}

/// Independently initialized dynamics heads sharing the world model's encoder.
#[derive(Debug, Clone)]
pub struct DisagreementEnsemble {
    heads: Vec<Dynamics>,
    opts: Vec<AdamState>,
}

impl DisagreementEnsemble {
    pub fn new(count: usize, config: &WorldModelConfig, rng: &mut impl Rng) -> Self {
        let heads: Vec<Dynamics> = (0..count)
            .map(|_| {
                Dynamics::new(
                    config.latent_dim,
                    config.action_dim,
                    config.recurrent_hidden,
                    config.head_hidden,
                    rng,
                )
            })
            .collect();
        Self {
            opts: heads.iter().map(|_| AdamState::new(config.learning_rate)).collect(),
            heads,
        }
    }

    pub fn from_heads(heads: Vec<Dynamics>, learning_rate: f64) -> Self {
        Self {
            opts: heads.iter().map(|_| AdamState::new(learning_rate)).collect(),
            heads,
        }
    }

    pub fn heads(&self) -> &[Dynamics] {
        &self.heads
    }

    pub fn reward(&self, z0: &Array2<f64>, actions: &[Array2<f64>]) -> Result<Vec<f64>> {
        let per_head: Vec<Vec<Array2<f64>>> = self.heads.iter().map(|h| h.rollout(z0, actions)).collect::<Result<_>>()?;
        Ok(disagreement(&per_head))
    }

    /// One update per head on a shared segment batch encoded by `world_model`.
    /// Returns the mean head loss.
    pub fn train_step(
        &mut self,
        buffer: &ReplayBuffer,
        world_model: &WorldModel,
        horizon: usize,
        batch_size: usize,
        window: usize,
        rng: &mut impl Rng,
    ) -> Result<f64> {
        let batch = buffer.sample_segments(batch_size, horizon, window, rng);
        let encoded: Vec<Array2<f64>> = batch
            .frames
            .iter()
            .map(|f| world_model.vae.encode_sample(f.view(), rng))
            .collect::<Result<_>>()?;
        let mut total = 0.0;
        for (head, opt) in self.heads.iter_mut().zip(&mut self.opts) {
            let loss = head.accumulate_gradients(&encoded[0], &batch.actions, &encoded[1..]);
            if loss.is_err() {
                head.zero_grad();
            }
            total += loss?;
            opt.step_model(head)?;
        }
        Ok(total / self.heads.len() as f64)
    }
}

impl TrajectoryReward for DisagreementEnsemble {
    fn score(&self, z0: &Array2<f64>, actions: &[Array2<f64>], _predicted: &[Array2<f64>]) -> Result<Vec<f64>> {
        self.reward(z0, actions)
    }

    fn uses_predictions(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmmConfig {
    pub hidden: usize,
    pub inner_latent: usize,
    pub beta: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for SmmConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            inner_latent: 16,
            beta: 0.5,
            learning_rate: 1e-3,
            batch_size: 32,
        }
    }
}

fn latent_vae(latent_dim: usize, cfg: &SmmConfig, rng: &mut impl Rng) -> Vae {
    let enc = DenseNet::mlp(latent_dim, &[cfg.hidden], 2 * cfg.inner_latent, Activation::Relu, Activation::Identity, rng);
    let dec = DenseNet::mlp(cfg.inner_latent, &[cfg.hidden], latent_dim, Activation::Relu, Activation::Identity, rng);
    Vae::from_nets(enc, dec, cfg.beta).expect("dimensions chain by construction")
}

/// Density models over latent states: `target` fit to encoded relevant
/// examples, `policy` fit to encoded visited states.
#[derive(Debug, Clone)]
pub struct SmmDensityPair {
    pub target: Vae,
    pub policy: Vae,
    target_opt: AdamState,
    policy_opt: AdamState,
    config: SmmConfig,
}

impl SmmDensityPair {
    pub fn new(latent_dim: usize, config: SmmConfig, rng: &mut impl Rng) -> Self {
        Self {
            target: latent_vae(latent_dim, &config, rng),
            policy: latent_vae(latent_dim, &config, rng),
            target_opt: AdamState::new(config.learning_rate),
            policy_opt: AdamState::new(config.learning_rate),
            config,
        }
    }

    /// The pair with the two density models exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            target: self.policy.clone(),
            policy: self.target.clone(),
            target_opt: self.policy_opt.clone(),
            policy_opt: self.target_opt.clone(),
            config: self.config.clone(),
        }
    }

    /// `ELBO_target(z) − ELBO_policy(z)` per row.
    pub fn reward(&self, z: ArrayView2<f64>) -> Result<Vec<f64>> {
        let t = self.target.elbo_at_mean(z)?;
        let p = self.policy.elbo_at_mean(z)?;
        Ok(t.into_iter().zip(p).map(|(a, b)| a - b).collect())
    }

    /// One Adam step of each density model on a batch drawn from its pool.
    pub fn train_step(&mut self, relevant: &Array2<f64>, visited: &Array2<f64>, rng: &mut impl Rng) -> Result<(f64, f64)> {
        let n = self.config.batch_size;
        let t = step_vae(&mut self.target, &mut self.target_opt, relevant, n, rng)?;
        let p = step_vae(&mut self.policy, &mut self.policy_opt, visited, n, rng)?;
        Ok((t, p))
    }
}

fn step_vae(vae: &mut Vae, opt: &mut AdamState, pool: &Array2<f64>, n: usize, rng: &mut impl Rng) -> Result<f64> {
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..pool.nrows())).collect();
    let x = pool.select(ndarray::Axis(0), &idx);
    let eps = bee_nn::sampling::standard_normal(n, vae.latent_dim(), rng);
    let loss = vae.accumulate_gradients(&x, &eps);
    if loss.is_err() {
        vae.zero_grad();
    }
    let loss = loss?;
    opt.step_model(vae)?;
    Ok(loss.total)
}

impl TrajectoryReward for SmmDensityPair {
    fn score(&self, z0: &Array2<f64>, _actions: &[Array2<f64>], predicted: &[Array2<f64>]) -> Result<Vec<f64>> {
        let mut total = vec![0.0; z0.nrows()];
        for step in predicted {
            for (t, r) in total.iter_mut().zip(self.reward(step.view())?) {
                *t += r;
            }
        }
        Ok(total)
    }
}

/// Uniform random action on `[−1, 1]` per dimension.
pub fn random_policy(rng: &mut impl Rng) -> Action {
    uniform_action(rng)
}
