//! Ensemble of relevance discriminators over latent states. The optimistic
//! (max) member score of a state is the exploration reward.

use bee_nn::{sample_mixup_lambda, seeded, Activation, AdamState, DenseNet, Parameterized};
use bee_sim::Image;
use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::ReplayBuffer;
use crate::error::{ensure_finite, Result};
use crate::images::{random_crop, to_matrix};
use crate::world_model::WorldModel;

/// How member scores combine into one reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    #[default]
    Max,
    /// Mean plus population variance, equally weighted.
    MeanPlusVariance,
    /// Member 0 only.
    Single,
}

impl std::str::FromStr for RewardMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Self::Max),
            "mean_plus_variance" => Ok(Self::MeanPlusVariance),
            "single" => Ok(Self::Single),
            other => Err(format!("unknown reward mode {other:?}")),
        }
    }
}

impl std::fmt::Display for RewardMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Max => "max",
            Self::MeanPlusVariance => "mean_plus_variance",
            Self::Single => "single",
        })
    }
}

/// Combines one state's member scores.
pub fn aggregate(scores: &[f64], mode: RewardMode) -> f64 {
    match mode {
        RewardMode::Max => scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        RewardMode::MeanPlusVariance => {
            let n = scores.len() as f64;
            let mean = scores.iter().sum::<f64>() / n;
            let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
            mean + var
        }
        RewardMode::Single => scores[0],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelevanceConfig {
    pub members: usize,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub positives: usize,
    pub negatives: usize,
    /// Beta parameter of mixup; `None` disables mixup.
    pub mixup_alpha: Option<f64>,
    pub spectral_norm: bool,
    pub power_iters: usize,
    pub crop_pad: usize,
}

impl Default for RelevanceConfig {
    fn default() -> Self {
        Self {
            members: 3,
            hidden: vec![64, 32],
            learning_rate: 1e-3,
            positives: 16,
            negatives: 16,
            mixup_alpha: Some(1.0),
            spectral_norm: true,
            power_iters: 1,
            crop_pad: 2,
        }
    }
}

/// One discriminator with its own optimizer and its own sampling stream, so
/// members see different minibatches.
#[derive(Debug, Clone)]
pub struct Member {
    /// Outputs a logit; the score is its sigmoid.
    pub net: DenseNet,
    opt: AdamState,
    rng: bee_nn::Rng,
}

/// Numerically stable mean binary cross-entropy on logits.
pub fn bce_with_logits(logits: &Array1<f64>, labels: &Array1<f64>) -> f64 {
    let n = logits.len() as f64;
    logits
        .iter()
        .zip(labels)
        .map(|(&l, &y)| l.max(0.0) + (-l.abs()).exp().ln_1p() - y * l)
        .sum::<f64>()
        / n
}

impl Member {
    pub fn logits(&self, z: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.net.predict(z)?.column(0).to_owned())
    }

    pub fn scores(&self, z: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.logits(z)?.mapv(bee_nn::dense::sigmoid))
    }

    pub fn loss(&self, x: ArrayView2<f64>, labels: &Array1<f64>) -> Result<f64> {
        Ok(bce_with_logits(&self.logits(x)?, labels))
    }

    /// Accumulates BCE gradients for a fixed batch.
    pub fn accumulate_gradients(&mut self, x: &Array2<f64>, labels: &Array1<f64>) -> Result<f64> {
        let logits = self.net.forward(x)?.column(0).to_owned();
        let loss = ensure_finite("discriminator loss", bce_with_logits(&logits, labels))?;
        let n = labels.len() as f64;
        let grad = (logits.mapv(bee_nn::dense::sigmoid) - labels) / n;
        self.net.backward(&grad.insert_axis(Axis(1)))?;
        Ok(loss)
    }
}

#[derive(Debug, Clone)]
pub struct RelevanceEnsemble {
    members: Vec<Member>,
    config: RelevanceConfig,
}

impl RelevanceEnsemble {
    pub fn new(latent_dim: usize, config: RelevanceConfig, rng: &mut impl Rng) -> Self {
        let members = (0..config.members)
            .map(|_| {
                let mut net = DenseNet::mlp(latent_dim, &config.hidden, 1, Activation::Relu, Activation::Identity, rng);
                if config.spectral_norm {
                    net = net.with_spectral_norm(rng);
                    net.refresh_spectral(20);
                }
                Member {
                    net,
                    opt: AdamState::new(config.learning_rate),
                    rng: seeded(rng.random()),
                }
            })
            .collect();
        Self { members, config }
    }

    pub fn config(&self) -> &RelevanceConfig {
        &self.config
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [Member] {
        &mut self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `rows × members` matrix of scores in (0, 1).
    pub fn scores(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        let cols: Vec<Array1<f64>> = self.members.iter().map(|m| m.scores(z)).collect::<Result<_>>()?;
        let views: Vec<_> = cols.iter().map(|c| c.view().insert_axis(Axis(1))).collect();
        Ok(concatenate(Axis(1), &views).expect("equal rows"))
    }

    /// Aggregated reward for each row of `z`.
    pub fn reward(&self, z: ArrayView2<f64>, mode: RewardMode) -> Result<Vec<f64>> {
        let s = self.scores(z)?;
        Ok(s.rows().into_iter().map(|r| aggregate(&r.to_vec(), mode)).collect())
    }

    /// Sum over predicted steps of the aggregated reward, one value per
    /// candidate row.
    pub fn trajectory_reward(&self, predicted: &[Array2<f64>], mode: RewardMode) -> Result<Vec<f64>> {
        let mut total = vec![0.0; predicted.first().map_or(0, |p| p.nrows())];
        for step in predicted {
            for (t, r) in total.iter_mut().zip(self.reward(step.view(), mode)?) {
                *t += r;
            }
        }
        Ok(total)
    }

    /// One Adam step of member `index` on the given positives and negatives,
    /// after a spectral-norm refresh and (if enabled) mixup with a shuffled
    /// partner. Returns the loss on the mixed batch.
    pub fn update_member(&mut self, index: usize, positives: &Array2<f64>, negatives: &Array2<f64>) -> Result<f64> {
        let config = &self.config;
        let member = &mut self.members[index];
        let x = concatenate(Axis(0), &[positives.view(), negatives.view()]).expect("equal widths");
        let mut y = Array1::zeros(x.nrows());
        y.slice_mut(ndarray::s![..positives.nrows()]).fill(1.0);
        let (x, y) = match config.mixup_alpha {
            Some(alpha) => {
                let mut partner: Vec<usize> = (0..x.nrows()).collect();
                partner.shuffle(&mut member.rng);
                let mut mx = x.clone();
                let mut my = y.clone();
                for (i, &j) in partner.iter().enumerate() {
                    let lambda = sample_mixup_lambda(alpha, &mut member.rng)?;
                    let mixed = bee_nn::mixup_with_lambda(x.row(i), y[i], x.row(j), y[j], lambda)?;
                    mx.row_mut(i).assign(&mixed.x);
                    my[i] = mixed.y;
                }
                (mx, my)
            }
            None => (x, y),
        };
        member.net.refresh_spectral(config.power_iters);
        let loss = member.accumulate_gradients(&x, &y);
        if loss.is_err() {
            member.net.zero_grad();
        }
        let loss = loss?;
        member.opt.step_model(&mut member.net)?;
        Ok(loss)
    }

    /// Each member draws its own balanced batch from fixed latent pools.
    pub fn train_on_pools(&mut self, positives: &Array2<f64>, negatives: &Array2<f64>) -> Result<Vec<f64>> {
        (0..self.members.len())
            .map(|i| {
                let rng = &mut self.members[i].rng;
                let p = pick_rows(positives, self.config.positives, rng);
                let n = pick_rows(negatives, self.config.negatives, rng);
                self.update_member(i, &p, &n)
            })
            .collect()
    }

    /// One update per member: positives are crop-augmented relevant examples,
    /// negatives crop-augmented frames from the recent window of the buffer,
    /// both encoded to the posterior mean. The world model is read only.
    pub fn train_members(
        &mut self,
        buffer: &ReplayBuffer,
        relevant: &[Image],
        world_model: &WorldModel,
        window: usize,
    ) -> Result<Vec<f64>> {
        let pad = self.config.crop_pad;
        (0..self.members.len())
            .map(|i| {
                let rng = &mut self.members[i].rng;
                let pos: Vec<Image> = (0..self.config.positives)
                    .map(|_| random_crop(&relevant[rng.random_range(0..relevant.len())], pad, rng))
                    .collect();
                let frames = buffer.sample_frames(self.config.negatives, window, rng);
                let neg: Vec<Image> = frames.into_iter().map(|f| random_crop(f, pad, rng)).collect();
                let zp = world_model.vae.encode_mean(to_matrix(&pos).view())?;
                let zn = world_model.vae.encode_mean(to_matrix(&neg).view())?;
                self.update_member(i, &zp, &zn)
            })
            .collect()
    }
}

fn pick_rows(pool: &Array2<f64>, n: usize, rng: &mut impl Rng) -> Array2<f64> {
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..pool.nrows())).collect();
    pool.select(Axis(0), &idx)
}

impl Parameterized for Member {
    fn params(&self) -> Vec<&bee_nn::ParamTensor> {
        self.net.params()
    }

    fn params_mut(&mut self) -> Vec<&mut bee_nn::ParamTensor> {
        self.net.params_mut()
    }
}

/// Linearly separable latent classes: positives centred at `+5` on the first
/// coordinate, negatives at `−5`, unit noise elsewhere.
pub fn separable_fixture(n: usize, latent_dim: usize, rng: &mut impl Rng) -> (Array2<f64>, Array2<f64>) {
    let normal = rand_distr::StandardNormal;
    let mut make = |sign: f64| {
        Array2::from_shape_fn((n, latent_dim), |(_, d)| {
            let noise: f64 = rng.sample(normal);
            if d == 0 {
                sign * (5.0 + noise.clamp(-2.0, 2.0))
            } else {
                noise
            }
        })
    };
    let pos = make(1.0);
    let neg = make(-1.0);
    (pos, neg)
}
