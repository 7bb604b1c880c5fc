//! Latent world model: a β-weighted VAE over frames and a recurrent latent
//! dynamics model trained on open-loop multi-step predictions.

use std::path::Path;

use bee_nn::sampling::standard_normal;
use bee_nn::{
    checkpoint, Activation, AdamState, Dense, DenseNet, GruCell, GruStepCache, NetCache, ParamTensor, Parameterized,
    LOGVAR_MAX, LOGVAR_MIN,
};
use bee_sim::{Image, ACTION_DIM};
use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::{ReplayBuffer, SegmentBatch};
use crate::error::{ensure_finite, CoreError, Result};
use crate::images::{random_crop, to_matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldModelConfig {
    pub image_side: usize,
    pub latent_dim: usize,
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub recurrent_hidden: usize,
    pub head_hidden: usize,
    pub action_dim: usize,
    pub beta: f64,
    pub learning_rate: f64,
}

impl Default for WorldModelConfig {
    fn default() -> Self {
        Self {
            image_side: 16,
            latent_dim: 32,
            encoder_hidden: 128,
            decoder_hidden: 128,
            recurrent_hidden: 32,
            head_hidden: 64,
            action_dim: ACTION_DIM,
            beta: 1e-3,
            learning_rate: 1e-3,
        }
    }
}

/// Training horizon as a function of the number of collected episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSchedule {
    /// `(episodes_below, horizon)` pairs in increasing order.
    pub breakpoints: Vec<(usize, usize)>,
    pub final_horizon: usize,
}

impl Default for HorizonSchedule {
    fn default() -> Self {
        Self {
            breakpoints: vec![(50, 2), (150, 4), (300, 8)],
            final_horizon: 10,
        }
    }
}

impl HorizonSchedule {
    pub fn constant(horizon: usize) -> Self {
        Self {
            breakpoints: Vec::new(),
            final_horizon: horizon,
        }
    }

    pub fn horizon_at(&self, episode: usize) -> usize {
        self.breakpoints
            .iter()
            .find(|&&(below, _)| episode < below)
            .map_or(self.final_horizon, |&(_, h)| h)
    }

    pub fn validate(&self) -> Result<()> {
        let mut horizons: Vec<usize> = self.breakpoints.iter().map(|b| b.1).collect();
        horizons.push(self.final_horizon);
        let increasing_breaks = self.breakpoints.windows(2).all(|w| w[0].0 < w[1].0);
        if horizons.contains(&0) || !horizons.windows(2).all(|w| w[0] <= w[1]) || !increasing_breaks {
            return Err(CoreError::Config(format!("horizon schedule must be positive and non-decreasing: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub batch_size: usize,
    /// Only the most recent `window` episodes are sampled.
    pub window: usize,
    pub crop_pad: usize,
    pub updates_per_episode: usize,
    pub schedule: HorizonSchedule,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            window: 500,
            crop_pad: 2,
            updates_per_episode: 20,
            schedule: HorizonSchedule::default(),
        }
    }
}

/// Batch-mean loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VaeLoss {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

/// Closed-form `KL(N(mean, e^logvar) ‖ N(0, I))` per row.
pub fn gaussian_kl(mean: ArrayView2<f64>, logvar: ArrayView2<f64>) -> Array1<f64> {
    let mut terms = mean.mapv(|m| m * m);
    Zip::from(&mut terms).and(logvar).for_each(|t, &lv| *t += lv.exp() - 1.0 - lv);
    terms.sum_axis(Axis(1)) * 0.5
}

/// Frame VAE: dense encoder to `(mean, logvar)`, dense sigmoid decoder.
#[derive(Debug, Clone)]
pub struct Vae {
    pub encoder: DenseNet,
    pub decoder: DenseNet,
    pub beta: f64,
    latent_dim: usize,
}

impl Vae {
    pub fn new(config: &WorldModelConfig, rng: &mut impl Rng) -> Self {
        let pixels = config.image_side * config.image_side;
        let l = config.latent_dim;
        Self {
            encoder: DenseNet::mlp(pixels, &[config.encoder_hidden], 2 * l, Activation::Relu, Activation::Identity, rng),
            decoder: DenseNet::mlp(l, &[config.decoder_hidden], pixels, Activation::Relu, Activation::Sigmoid, rng),
            beta: config.beta,
            latent_dim: l,
        }
    }

    /// VAE over arbitrary rows: `encoder` must output `2 × latent` values and
    /// `decoder` map `latent` back to the encoder's input width.
    pub fn from_nets(encoder: DenseNet, decoder: DenseNet, beta: f64) -> Result<Self> {
        let latent_dim = decoder.input_dim();
        if encoder.output_dim() != 2 * latent_dim || decoder.output_dim() != encoder.input_dim() {
            return Err(CoreError::Config("vae encoder and decoder dimensions do not match".into()));
        }
        Ok(Self {
            encoder,
            decoder,
            beta,
            latent_dim,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    /// Per-row evidence lower bound evaluated at the posterior mean, in the
    /// units of the training loss: `−(‖x − dec(μ)‖² + β·KL)`.
    pub fn elbo_at_mean(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        let (mean, logvar) = self.encode_distribution(x)?;
        let recon = self.decode(mean.view())?;
        let kl = gaussian_kl(mean.view(), logvar.view());
        Ok((&recon - &x)
            .rows()
            .into_iter()
            .zip(kl)
            .map(|(r, k)| -(r.iter().map(|d| d * d).sum::<f64>() + self.beta * k))
            .collect())
    }

    /// `(mean, clamped logvar)` of the approximate posterior.
    pub fn encode_distribution(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        let out = self.encoder.predict(x)?;
        let l = self.latent_dim;
        let mean = out.slice(s![.., ..l]).to_owned();
        let logvar = out.slice(s![.., l..]).mapv(bee_nn::clamp_logvar);
        Ok((mean, logvar))
    }

    /// Deterministic encoding used for planning and discriminators.
    pub fn encode_mean(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let out = self.encoder.predict(x)?;
        Ok(out.slice(s![.., ..self.latent_dim]).to_owned())
    }

    pub fn encode_sample(&self, x: ArrayView2<f64>, rng: &mut impl Rng) -> Result<Array2<f64>> {
        let (mean, logvar) = self.encode_distribution(x)?;
        let eps = standard_normal(mean.nrows(), mean.ncols(), rng);
        Ok(bee_nn::reparameterize(&mean, &logvar, &eps))
    }

    pub fn decode(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.decoder.predict(z)?)
    }

    /// Loss with the reparameterization noise fixed to `eps`.
    pub fn loss(&self, x: &Array2<f64>, eps: &Array2<f64>) -> Result<VaeLoss> {
        let (mean, logvar) = self.encode_distribution(x.view())?;
        let z = bee_nn::reparameterize(&mean, &logvar, eps);
        let recon = self.decode(z.view())?;
        Ok(self.combine(x, &recon, &mean, &logvar))
    }

    fn combine(&self, x: &Array2<f64>, recon: &Array2<f64>, mean: &Array2<f64>, logvar: &Array2<f64>) -> VaeLoss {
        let b = x.nrows() as f64;
        let reconstruction = (recon - x).mapv(|d| d * d).sum() / b;
        let kl = gaussian_kl(mean.view(), logvar.view()).sum() / b;
        VaeLoss {
            total: reconstruction + self.beta * kl,
            reconstruction,
            kl,
        }
    }

    /// Forward and reverse pass; accumulates encoder and decoder gradients.
    pub fn accumulate_gradients(&mut self, x: &Array2<f64>, eps: &Array2<f64>) -> Result<VaeLoss> {
        let l = self.latent_dim;
        let b = x.nrows() as f64;
        let out = self.encoder.forward(x)?;
        let mean = out.slice(s![.., ..l]).to_owned();
        let raw_logvar = out.slice(s![.., l..]).to_owned();
        let logvar = raw_logvar.mapv(bee_nn::clamp_logvar);
        let std = logvar.mapv(|v| (0.5 * v).exp());
        let z = &mean + &(&std * eps);
        let recon = self.decoder.forward(&z)?;
        let loss = self.combine(x, &recon, &mean, &logvar);
        ensure_finite("vae loss", loss.total)?;

        let d_recon = (&recon - x) * (2.0 / b);
        let dz = self.decoder.backward(&d_recon)?;
        let beta = self.beta;
        let d_mean = &dz + &(&mean * (beta / b));
        let mut d_logvar = &dz * eps * &std * 0.5;
        Zip::from(&mut d_logvar)
            .and(&logvar)
            .and(&raw_logvar)
            .for_each(|g, &lv, &raw| {
                *g += beta * 0.5 * (lv.exp() - 1.0) / b;
                if !(LOGVAR_MIN..=LOGVAR_MAX).contains(&raw) {
                    *g = 0.0;
                }
            });
        let d_out = concatenate(Axis(1), &[d_mean.view(), d_logvar.view()]).expect("matching rows");
        self.encoder.backward(&d_out)?;
        Ok(loss)
    }
}

impl Parameterized for Vae {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut p = self.encoder.params();
        p.extend(self.decoder.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p = self.encoder.params_mut();
        p.extend(self.decoder.params_mut());
        p
    }
}

/// Latent and recurrent state carried between rollout steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutState {
    pub z: Array2<f64>,
    pub h: Array2<f64>,
}

/// Deterministic latent dynamics.
///
/// ```text
/// h' = gru([z, a], h)
/// z' = z + head([h', z, a])
/// ```
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub cell: GruCell,
    pub head: DenseNet,
    latent_dim: usize,
    action_dim: usize,
}

struct StepCache {
    gru: GruStepCache,
    head: NetCache,
}

impl Dynamics {
    pub fn new(latent_dim: usize, action_dim: usize, recurrent_hidden: usize, head_hidden: usize, rng: &mut impl Rng) -> Self {
        let cell = GruCell::new(latent_dim + action_dim, recurrent_hidden, rng);
        let mut head = DenseNet::mlp(
            recurrent_hidden + latent_dim + action_dim,
            &[head_hidden],
            latent_dim,
            Activation::Relu,
            Activation::Identity,
            rng,
        );
        // start close to the identity map z' ≈ z
        let last = head.layers_mut().len() - 1;
        head.layers_mut()[last].weight.value.mapv_inplace(|w| w * 0.1);
        Self {
            cell,
            head,
            latent_dim,
            action_dim,
        }
    }

    pub fn from_parts(cell: GruCell, head: DenseNet, latent_dim: usize, action_dim: usize) -> Result<Self> {
        let ok = cell.input_dim() == latent_dim + action_dim
            && head.input_dim() == cell.hidden_dim() + latent_dim + action_dim
            && head.output_dim() == latent_dim;
        if !ok {
            return Err(CoreError::Config("dynamics cell and head dimensions do not chain".into()));
        }
        Ok(Self {
            cell,
            head,
            latent_dim,
            action_dim,
        })
    }

    /// Hand-set weights realizing `z' = z + a B` exactly; `b` is
    /// `action_dim × latent_dim`. The recurrent path is present but unused.
    pub fn linear(b: &Array2<f64>, recurrent_hidden: usize, rng: &mut impl Rng) -> Self {
        let (a_dim, l) = b.dim();
        let cell = GruCell::new(l + a_dim, recurrent_hidden, rng);
        let mut w = Array2::zeros((recurrent_hidden + l + a_dim, l));
        w.slice_mut(s![recurrent_hidden + l.., ..]).assign(b);
        let head = DenseNet::from_layers(vec![Dense::from_parts(w, Array2::zeros((1, l)), Activation::Identity)])
            .expect("single layer");
        Self::from_parts(cell, head, l, a_dim).expect("dimensions chain by construction")
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn start(&self, z0: Array2<f64>) -> RolloutState {
        let h = self.cell.initial_state(z0.nrows());
        RolloutState { z: z0, h }
    }

    pub fn step(&self, state: &RolloutState, action: ArrayView2<f64>) -> Result<RolloutState> {
        let x = concatenate(Axis(1), &[state.z.view(), action]).map_err(|_| self.batch_error(state, action))?;
        let h = self.cell.step(x.view(), state.h.view())?;
        let head_in = concatenate(Axis(1), &[h.view(), x.view()]).expect("matching rows");
        let z = &state.z + &self.head.predict(head_in.view())?;
        Ok(RolloutState { z, h })
    }

    fn batch_error(&self, state: &RolloutState, action: ArrayView2<f64>) -> CoreError {
        CoreError::Config(format!(
            "rollout batch mismatch: {} latents, {} actions",
            state.z.nrows(),
            action.nrows()
        ))
    }

    /// Applies each action batch in turn; returns one predicted latent batch
    /// per action and the state after the last.
    pub fn rollout_from(&self, state: RolloutState, actions: &[Array2<f64>]) -> Result<(Vec<Array2<f64>>, RolloutState)> {
        let mut state = state;
        let mut out = Vec::with_capacity(actions.len());
        for a in actions {
            check_width("action", self.action_dim, a.ncols())?;
            state = self.step(&state, a.view())?;
            out.push(state.z.clone());
        }
        Ok((out, state))
    }

    pub fn rollout(&self, z0: &Array2<f64>, actions: &[Array2<f64>]) -> Result<Vec<Array2<f64>>> {
        Ok(self.rollout_from(self.start(z0.clone()), actions)?.0)
    }

    /// Mean over steps of the batch-mean squared latent error.
    pub fn loss(&self, z0: &Array2<f64>, actions: &[Array2<f64>], targets: &[Array2<f64>]) -> Result<f64> {
        let preds = self.rollout(z0, actions)?;
        Ok(multistep_mse(targets, &preds))
    }

    /// Open-loop rollout from `z0` with backpropagation through time into the
    /// cell and head. No gradient reaches `z0` or `targets`.
    pub fn accumulate_gradients(&mut self, z0: &Array2<f64>, actions: &[Array2<f64>], targets: &[Array2<f64>]) -> Result<f64> {
        if actions.len() != targets.len() || actions.is_empty() {
            return Err(CoreError::Config(format!(
                "{} actions for {} targets",
                actions.len(),
                targets.len()
            )));
        }
        let l = self.latent_dim;
        let hd = self.cell.hidden_dim();
        let mut z = z0.clone();
        let mut h = self.cell.initial_state(z0.nrows());
        let mut caches = Vec::with_capacity(actions.len());
        let mut preds = Vec::with_capacity(actions.len());
        for a in actions {
            check_width("action", self.action_dim, a.ncols())?;
            let x = concatenate(Axis(1), &[z.view(), a.view()]).map_err(|_| CoreError::Config("rollout batch mismatch".into()))?;
            let (h_next, gru) = self.cell.step_cached(x.view(), h.view())?;
            let head_in = concatenate(Axis(1), &[h_next.view(), x.view()]).expect("matching rows");
            let delta = self.head.forward(&head_in)?;
            caches.push(StepCache {
                gru,
                head: self.head.take_cache(),
            });
            z = &z + &delta;
            h = h_next;
            preds.push(z.clone());
        }
        let loss = ensure_finite("dynamics loss", multistep_mse(targets, &preds))?;

        let scale = 2.0 / (actions.len() * z0.nrows()) as f64;
        let mut carry_z = Array2::<f64>::zeros(z0.raw_dim());
        let mut carry_h = Array2::<f64>::zeros((z0.nrows(), hd));
        for (k, cache) in caches.into_iter().enumerate().rev() {
            let gz = carry_z + &((&preds[k] - &targets[k]) * scale);
            self.head.restore_cache(cache.head)?;
            let d_head_in = self.head.backward(&gz)?;
            let gh = carry_h + &d_head_in.slice(s![.., ..hd]);
            let (dx, dh_prev) = self.cell.backward_step(&cache.gru, &gh);
            carry_z = gz + &d_head_in.slice(s![.., hd..hd + l]) + &dx.slice(s![.., ..l]);
            carry_h = dh_prev;
        }
        Ok(loss)
    }
}

fn check_width(what: &str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(CoreError::Config(format!("{what} dimension {actual}, expected {expected}")));
    }
    Ok(())
}

/// `(1/H) Σ_k (1/B) Σ_b ‖target − prediction‖²`.
pub fn multistep_mse(targets: &[Array2<f64>], predictions: &[Array2<f64>]) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let per_step: f64 = targets
        .iter()
        .zip(predictions)
        .map(|(t, p)| (t - p).mapv(|d| d * d).sum() / t.nrows() as f64)
        .sum();
    per_step / targets.len() as f64
}

impl Parameterized for Dynamics {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut p = self.cell.params();
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p = self.cell.params_mut();
        p.extend(self.head.params_mut());
        p
    }
}

/// Losses from one call to [`WorldModel::train_step`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainStats {
    pub vae: VaeLoss,
    pub example_vae: Option<VaeLoss>,
    pub dynamics: f64,
    pub horizon: usize,
}

/// Encoder, decoder and dynamics with their separate optimizers.
#[derive(Debug, Clone)]
pub struct WorldModel {
    config: WorldModelConfig,
    pub vae: Vae,
    pub dynamics: Dynamics,
    vae_opt: AdamState,
    dyn_opt: AdamState,
}

impl WorldModel {
    pub fn new(config: WorldModelConfig, rng: &mut impl Rng) -> Self {
        let vae = Vae::new(&config, rng);
        let dynamics = Dynamics::new(
            config.latent_dim,
            config.action_dim,
            config.recurrent_hidden,
            config.head_hidden,
            rng,
        );
        Self {
            vae_opt: AdamState::new(config.learning_rate),
            dyn_opt: AdamState::new(config.learning_rate),
            config,
            vae,
            dynamics,
        }
    }

    pub fn config(&self) -> &WorldModelConfig {
        &self.config
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn encode_mean_images<'a>(&self, images: impl IntoIterator<Item = &'a Image>) -> Result<Array2<f64>> {
        self.vae.encode_mean(to_matrix(images).view())
    }

    /// One Adam step on the VAE objective for a batch of frame rows.
    pub fn vae_update(&mut self, x: &Array2<f64>, rng: &mut impl Rng) -> Result<VaeLoss> {
        let eps = standard_normal(x.nrows(), self.config.latent_dim, rng);
        let loss = self.vae.accumulate_gradients(x, &eps);
        if loss.is_err() {
            self.vae.zero_grad();
        }
        let loss = loss?;
        self.vae_opt.step_model(&mut self.vae)?;
        Ok(loss)
    }

    /// One Adam step on the multi-step latent prediction loss. Start and
    /// target latents are encoder samples; the encoder itself is untouched.
    pub fn dynamics_update(&mut self, batch: &SegmentBatch, rng: &mut impl Rng) -> Result<f64> {
        let encoded: Vec<Array2<f64>> = batch
            .frames
            .iter()
            .map(|f| self.vae.encode_sample(f.view(), rng))
            .collect::<Result<_>>()?;
        let loss = self.dynamics.accumulate_gradients(&encoded[0], &batch.actions, &encoded[1..]);
        if loss.is_err() {
            self.dynamics.zero_grad();
        }
        let loss = loss?;
        self.dyn_opt.step_model(&mut self.dynamics)?;
        Ok(loss)
    }

    /// One VAE update on buffer frames, one on crop-augmented example frames
    /// (when any are given), and one dynamics update at the scheduled horizon.
    pub fn train_step(
        &mut self,
        buffer: &ReplayBuffer,
        examples: &[Image],
        episode_index: usize,
        training: &TrainingConfig,
        rng: &mut impl Rng,
    ) -> Result<TrainStats> {
        if buffer.is_empty() {
            return Err(CoreError::Config("training on an empty buffer".into()));
        }
        let n = training.batch_size;
        let frames = buffer.sample_frames(n, training.window, rng);
        let vae = self.vae_update(&to_matrix(frames), rng)?;
        let example_vae = if examples.is_empty() {
            None
        } else {
            let crops: Vec<Image> = (0..n)
                .map(|_| random_crop(&examples[rng.random_range(0..examples.len())], training.crop_pad, rng))
                .collect();
            Some(self.vae_update(&to_matrix(&crops), rng)?)
        };
        let shortest = buffer.episodes()[buffer.window_start(training.window)..]
            .iter()
            .map(|e| e.len())
            .min()
            .unwrap_or(0);
        let horizon = training.schedule.horizon_at(episode_index).min(shortest);
        let dynamics = if horizon == 0 {
            0.0
        } else {
            let batch = buffer.sample_segments(n, horizon, training.window, rng);
            self.dynamics_update(&batch, rng)?
        };
        Ok(TrainStats {
            vae,
            example_vae,
            dynamics,
            horizon,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(checkpoint::save(path, self)?)
    }

    pub fn load(&mut self, path: impl AsRef<Path>) -> Result<()> {
        Ok(checkpoint::load(path, self)?)
    }
}

impl Parameterized for WorldModel {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut p = self.vae.params();
        p.extend(self.dynamics.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p = self.vae.params_mut();
        p.extend(self.dynamics.params_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bee_nn::{check_gradients, fingerprint, seeded};
    use ndarray::array;

    fn small_config() -> WorldModelConfig {
        WorldModelConfig {
            image_side: 4,
            latent_dim: 3,
            encoder_hidden: 6,
            decoder_hidden: 5,
            recurrent_hidden: 4,
            head_hidden: 5,
            ..WorldModelConfig::default()
        }
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn schedule_defaults() {
        let s = HorizonSchedule::default();
        assert_eq!(s.horizon_at(0), 2);
        assert_eq!(s.horizon_at(40), 2);
        assert_eq!(s.horizon_at(50), 4);
        assert_eq!(s.horizon_at(200), 8);
        assert_eq!(s.horizon_at(300), 10);
        assert_eq!(s.horizon_at(10_000), 10);
        s.validate().unwrap();
        let bad = HorizonSchedule {
            breakpoints: vec![(10, 8), (20, 4)],
            final_horizon: 10,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn kl_closed_form_cases() {
        let zero = Array2::zeros((1, 4));
        assert_eq!(gaussian_kl(zero.view(), zero.view())[0], 0.0);
        let mean = array![[2.0]];
        assert_eq!(gaussian_kl(mean.view(), array![[0.0]].view())[0], 2.0);
    }

    #[test]
    fn kl_matches_monte_carlo() {
        // E_q[log q(z) − log p(z)] estimated from 10k samples
        let mut rng = seeded(30);
        for _ in 0..5 {
            let mean = random_matrix(1, 3, &mut rng);
            let logvar = random_matrix(1, 3, &mut rng) * 0.8;
            let exact = gaussian_kl(mean.view(), logvar.view())[0];
            // 5k antithetic pairs (ε, −ε): 10k samples
            let n = 5_000;
            let eps = standard_normal(n, 3, &mut rng);
            let mut total = 0.0;
            for row in eps.rows() {
                for sign in [1.0, -1.0] {
                    for d in 0..3 {
                        let e = sign * row[d];
                        let std = (0.5 * logvar[[0, d]]).exp();
                        let z = mean[[0, d]] + std * e;
                        let log_q = -0.5 * e * e - std.ln();
                        let log_p = -0.5 * z * z;
                        total += log_q - log_p;
                    }
                }
            }
            let mc = total / (2 * n) as f64;
            assert!((mc - exact).abs() <= 0.02 * exact.max(0.5), "mc {mc} exact {exact}");
        }
    }

    #[test]
    fn zero_beta_loss_is_reconstruction() {
        let mut rng = seeded(31);
        let mut cfg = small_config();
        cfg.beta = 0.0;
        let vae = Vae::new(&cfg, &mut rng);
        let x = random_matrix(3, 16, &mut rng).mapv(f64::abs);
        let eps = standard_normal(3, 3, &mut rng);
        let loss = vae.loss(&x, &eps).unwrap();
        assert_eq!(loss.total, loss.reconstruction);
        assert!(loss.kl >= 0.0);
    }

    #[test]
    fn standard_normal_posterior_has_zero_kl() {
        let mut rng = seeded(32);
        let mut vae = Vae::new(&small_config(), &mut rng);
        let last = vae.encoder.layers().len() - 1;
        let layer = &mut vae.encoder.layers_mut()[last];
        layer.weight.value.fill(0.0);
        layer.bias.value.fill(0.0);
        let x = random_matrix(2, 16, &mut rng);
        let loss = vae.loss(&x, &standard_normal(2, 3, &mut rng)).unwrap();
        assert_eq!(loss.kl, 0.0);
    }

    #[test]
    fn vae_gradients_match_finite_differences() {
        let mut rng = seeded(33);
        for trial in 0..10 {
            let mut vae = Vae::new(&small_config(), &mut rng);
            vae.beta = 0.5;
            let x = random_matrix(3, 16, &mut rng).mapv(|v| v.abs());
            let eps = standard_normal(3, 3, &mut rng);
            let report = check_gradients(
                &mut vae,
                |v| v.loss(&x, &eps).unwrap().total,
                |v| {
                    v.accumulate_gradients(&x, &eps).unwrap();
                },
                1e-5,
                Some(5),
                &mut rng,
            );
            assert!(report.max_rel_error < 1e-3, "trial {trial}: {report:?}");
        }
    }

    #[test]
    fn deterministic_encoding_is_pure_and_finite() {
        let mut rng = seeded(34);
        let vae = Vae::new(&WorldModelConfig::default(), &mut rng);
        let x = Array2::zeros((1, 256));
        let a = vae.encode_mean(x.view()).unwrap();
        let b = vae.encode_mean(x.view()).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.is_finite()));
        let (_, logvar) = vae.encode_distribution(x.view()).unwrap();
        assert!(logvar.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn two_images_become_separable() {
        let mut rng = seeded(35);
        let mut wm = WorldModel::new(small_config(), &mut rng);
        let mut x = Array2::zeros((2, 16));
        x.row_mut(0).slice_mut(s![..8]).fill(1.0);
        x.row_mut(1).slice_mut(s![8..]).fill(1.0);
        for _ in 0..300 {
            wm.vae_update(&x, &mut rng).unwrap();
        }
        let z = wm.vae.encode_mean(x.view()).unwrap();
        let gap = (&z.row(0) - &z.row(1)).mapv(|d| d * d).sum().sqrt();
        assert!(gap >= 1e-2, "gap {gap}");
    }

    #[test]
    fn rollout_basics() {
        let mut rng = seeded(36);
        let dyn_ = Dynamics::new(3, 2, 4, 5, &mut rng);
        let z0 = random_matrix(2, 3, &mut rng);
        assert!(dyn_.rollout(&z0, &[]).unwrap().is_empty());

        let actions: Vec<_> = (0..3).map(|_| random_matrix(2, 2, &mut rng)).collect();
        let full = dyn_.rollout(&z0, &actions).unwrap();
        assert_eq!(full.len(), 3);
        assert_eq!(full, dyn_.rollout(&z0, &actions).unwrap());

        let mut state = dyn_.start(z0.clone());
        let mut chained = Vec::new();
        for a in &actions {
            let (mut p, next) = dyn_.rollout_from(state, std::slice::from_ref(a)).unwrap();
            chained.append(&mut p);
            state = next;
        }
        assert_eq!(full, chained);
    }

    #[test]
    fn linear_fixture_matches_closed_form() {
        let mut rng = seeded(37);
        let b = array![[1.0, 0.5, 0.0], [-0.25, 0.0, 2.0]];
        let dyn_ = Dynamics::linear(&b, 4, &mut rng);
        let z0 = array![[0.1, -0.2, 0.3]];
        let actions: Vec<_> = (0..4).map(|_| random_matrix(1, 2, &mut rng)).collect();
        let preds = dyn_.rollout(&z0, &actions).unwrap();
        let mut expected = z0.clone();
        for (a, p) in actions.iter().zip(&preds) {
            expected = expected + a.dot(&b);
            for (e, v) in expected.iter().zip(p.iter()) {
                assert!((e - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dynamics_loss_arithmetic() {
        let mut rng = seeded(38);
        let dyn_ = Dynamics::linear(&array![[0.5]], 2, &mut rng);
        // z0 = 0, a = 1 ⇒ ẑ₁ = 0.5 against z₁ = 1
        let loss = dyn_.loss(&array![[0.0]], &[array![[1.0]]], &[array![[1.0]]]).unwrap();
        assert_eq!(loss, 0.25);
        let exact = dyn_.loss(&array![[0.0]], &[array![[1.0]]], &[array![[0.5]]]).unwrap();
        assert_eq!(exact, 0.0);
    }

    #[test]
    fn dynamics_gradients_match_finite_differences() {
        let mut rng = seeded(39);
        for trial in 0..10 {
            let mut dyn_ = Dynamics::new(3, 2, 4, 5, &mut rng);
            let z0 = random_matrix(2, 3, &mut rng);
            let actions: Vec<_> = (0..3).map(|_| random_matrix(2, 2, &mut rng)).collect();
            let targets: Vec<_> = (0..3).map(|_| random_matrix(2, 3, &mut rng)).collect();
            let report = check_gradients(
                &mut dyn_,
                |d| d.loss(&z0, &actions, &targets).unwrap(),
                |d| {
                    d.accumulate_gradients(&z0, &actions, &targets).unwrap();
                },
                1e-5,
                None,
                &mut rng,
            );
            assert!(report.max_rel_error < 1e-3, "trial {trial}: {report:?}");
        }
    }

    #[test]
    fn dynamics_training_leaves_vae_untouched() {
        let mut rng = seeded(40);
        let mut wm = WorldModel::new(small_config(), &mut rng);
        let before = fingerprint(&wm.vae.params());
        let dyn_before = fingerprint(&wm.dynamics.params());
        let batch = SegmentBatch {
            frames: (0..3).map(|_| random_matrix(4, 16, &mut rng).mapv(f64::abs)).collect(),
            actions: (0..2).map(|_| random_matrix(4, 2, &mut rng)).collect(),
        };
        for _ in 0..5 {
            wm.dynamics_update(&batch, &mut rng).unwrap();
        }
        assert_eq!(before, fingerprint(&wm.vae.params()));
        assert_ne!(dyn_before, fingerprint(&wm.dynamics.params()));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = seeded(41);
        let wm = WorldModel::new(small_config(), &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wm.params");
        wm.save(&path).unwrap();
        let mut other = WorldModel::new(small_config(), &mut rng);
        assert_ne!(fingerprint(&wm.params()), fingerprint(&other.params()));
        other.load(&path).unwrap();
        assert_eq!(fingerprint(&wm.params()), fingerprint(&other.params()));
    }
}
