//! Latent-space model predictive control.
//!
//! Exploration uses ranked random shooting: one sampling round, a uniform
//! pick among the best few candidates, and per-action ε-randomization.
//! Goal reaching uses a cross-entropy method that refits a per-step Gaussian
//! to the elite candidates.

use bee_nn::substream;
use bee_sim::{Action, Environment, Episode, Image, SimState};
use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::world_model::{Dynamics, Vae, WorldModel};

/// Batched deterministic latent rollout.
pub trait LatentModel {
    fn latent_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// `actions[k]` holds step `k` of every candidate (one row each); returns
    /// the predicted latent batch after each step.
    fn rollout(&self, z0: &Array2<f64>, actions: &[Array2<f64>]) -> Result<Vec<Array2<f64>>>;
}

impl LatentModel for Dynamics {
    fn latent_dim(&self) -> usize {
        Dynamics::latent_dim(self)
    }

    fn action_dim(&self) -> usize {
        Dynamics::action_dim(self)
    }

    fn rollout(&self, z0: &Array2<f64>, actions: &[Array2<f64>]) -> Result<Vec<Array2<f64>>> {
        Dynamics::rollout(self, z0, actions)
    }
}

pub trait LatentDecoder {
    fn decode(&self, z: &Array2<f64>) -> Result<Array2<f64>>;
}

impl LatentDecoder for Vae {
    fn decode(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        Vae::decode(self, z.view())
    }
}

/// Maps one frame to a `1 × latent_dim` latent. The only view of the world
/// an agent gets.
pub trait FrameEncoder {
    fn encode_frame(&self, image: &Image) -> Result<Array2<f64>>;
}

impl FrameEncoder for WorldModel {
    fn encode_frame(&self, image: &Image) -> Result<Array2<f64>> {
        self.encode_mean_images([image])
    }
}

/// Scores candidate trajectories; one value per candidate row, higher is
/// better.
pub trait TrajectoryReward {
    fn score(&self, z0: &Array2<f64>, actions: &[Array2<f64>], predicted: &[Array2<f64>]) -> Result<Vec<f64>>;

    /// Whether `score` reads the planner's predicted latents. When it does
    /// not, the planner skips the batched rollout and passes an empty slice.
    fn uses_predictions(&self) -> bool {
        true
    }
}

impl<F> TrajectoryReward for F
where
    F: Fn(&Array2<f64>, &[Array2<f64>], &[Array2<f64>]) -> Result<Vec<f64>>,
{
    fn score(&self, z0: &Array2<f64>, actions: &[Array2<f64>], predicted: &[Array2<f64>]) -> Result<Vec<f64>> {
        self(z0, actions, predicted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanConfig {
    pub num_samples: usize,
    pub horizon: usize,
    pub cem_iterations: usize,
    pub elite_count: usize,
    pub top_k_choice: usize,
    pub epsilon_random: f64,
    pub action_sample_std: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self::explore()
    }
}

impl PlanConfig {
    pub fn explore() -> Self {
        Self {
            num_samples: 1000,
            horizon: 10,
            cem_iterations: 1,
            elite_count: 40,
            top_k_choice: 5,
            epsilon_random: 0.1,
            action_sample_std: 0.5,
        }
    }

    pub fn goal() -> Self {
        Self {
            num_samples: 200,
            cem_iterations: 2,
            top_k_choice: 1,
            epsilon_random: 0.0,
            ..Self::explore()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(CoreError::Config(format!("plan config: {m}")));
        if self.num_samples == 0 {
            return err("num_samples must be positive");
        }
        if self.horizon == 0 || self.cem_iterations == 0 {
            return err("horizon and cem_iterations must be positive");
        }
        if self.cem_iterations > 1 && (self.elite_count == 0 || self.elite_count > self.num_samples) {
            return err("elite_count must lie in [1, num_samples]");
        }
        if self.top_k_choice == 0 || self.top_k_choice > self.num_samples {
            return err("top_k_choice must lie in [1, num_samples]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_random) {
            return err("epsilon_random must lie in [0, 1]");
        }
        if !(self.action_sample_std >= 0.0) {
            return err("action_sample_std must be non-negative");
        }
        Ok(())
    }
}

/// Candidate action sequences stored step-major for batched rollouts.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidates {
    /// `steps[k]` is `candidates × action_dim`.
    pub steps: Vec<Array2<f64>>,
}

impl Candidates {
    /// Clipped Gaussian candidates. `mean` and `std` are `horizon ×
    /// action_dim`; candidate `i` draws from its own substream of a seed taken
    /// from `rng`, so the set does not depend on evaluation order.
    pub fn sample(count: usize, mean: &Array2<f64>, std: &Array2<f64>, rng: &mut impl Rng) -> Self {
        let (h, a) = mean.dim();
        let base: u64 = rng.random();
        let mut steps = vec![Array2::zeros((count, a)); h];
        for i in 0..count {
            let mut r = substream(base, i as u64);
            for (k, step) in steps.iter_mut().enumerate() {
                for d in 0..a {
                    let n: f64 = r.sample(StandardNormal);
                    step[[i, d]] = (mean[[k, d]] + std[[k, d]] * n).clamp(-1.0, 1.0);
                }
            }
        }
        Self { steps }
    }

    /// Zero-mean candidates with a constant standard deviation.
    pub fn sample_isotropic(count: usize, horizon: usize, action_dim: usize, std: f64, rng: &mut impl Rng) -> Self {
        Self::sample(
            count,
            &Array2::zeros((horizon, action_dim)),
            &Array2::from_elem((horizon, action_dim), std),
            rng,
        )
    }

    /// Builds a set from explicit `horizon × action_dim` sequences.
    pub fn from_sequences(seqs: &[Array2<f64>]) -> Result<Self> {
        let first = seqs.first().ok_or_else(|| CoreError::Config("empty candidate set".into()))?;
        let (h, a) = first.dim();
        if seqs.iter().any(|s| s.dim() != (h, a)) {
            return Err(CoreError::Config("candidate sequences differ in shape".into()));
        }
        let steps = (0..h)
            .map(|k| Array2::from_shape_fn((seqs.len(), a), |(i, d)| seqs[i][[k, d]]))
            .collect();
        Ok(Self { steps })
    }

    pub fn len(&self) -> usize {
        self.steps.first().map_or(0, |s| s.nrows())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// Candidate `i` as a `horizon × action_dim` matrix.
    pub fn sequence(&self, i: usize) -> Array2<f64> {
        let a = self.steps.first().map_or(0, |s| s.ncols());
        Array2::from_shape_fn((self.horizon(), a), |(k, d)| self.steps[k][[i, d]])
    }

    fn actions(&self, i: usize) -> Vec<Action> {
        self.steps
            .iter()
            .map(|s| Action::new(s[[i, 0]], s[[i, 1]]))
            .collect()
    }
}

fn broadcast(z0: &Array2<f64>, rows: usize) -> Array2<f64> {
    z0.row(0).insert_axis(Axis(0)).broadcast((rows, z0.ncols())).expect("one row").to_owned()
}

/// Candidate indices by descending score; stable, with NaN ranked last.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let key = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s };
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| key(scores[b]).total_cmp(&key(scores[a])));
    idx
}

/// Uniform action on `[−1, 1]²`.
pub fn uniform_action(rng: &mut impl Rng) -> Action {
    Action::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
}

/// Result of one exploration planning call.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorePlan {
    /// Executed actions, after ε-randomization.
    pub actions: Vec<Action>,
    pub chosen: usize,
    pub chosen_score: f64,
    pub top_score: f64,
    pub scores: Vec<f64>,
    /// Predicted latents of the chosen candidate, one `1 × L` row per step.
    pub predicted: Vec<Array2<f64>>,
}

/// Samples candidates from the exploration proposal and selects among them.
pub fn plan_explore(
    z0: &Array2<f64>,
    model: &impl LatentModel,
    reward: &impl TrajectoryReward,
    cfg: &PlanConfig,
    rng: &mut impl Rng,
) -> Result<ExplorePlan> {
    cfg.validate()?;
    let candidates =
        Candidates::sample_isotropic(cfg.num_samples, cfg.horizon, model.action_dim(), cfg.action_sample_std, rng);
    select_explore(z0, &candidates, model, reward, cfg, rng)
}

/// Scores a given candidate set, picks uniformly among the `top_k_choice`
/// best, then replaces each action independently with probability
/// `epsilon_random` by a uniform one.
pub fn select_explore(
    z0: &Array2<f64>,
    candidates: &Candidates,
    model: &impl LatentModel,
    reward: &impl TrajectoryReward,
    cfg: &PlanConfig,
    rng: &mut impl Rng,
) -> Result<ExplorePlan> {
    let m = candidates.len();
    if m == 0 {
        return Err(CoreError::Config("plan_explore needs at least one candidate".into()));
    }
    let starts = broadcast(z0, m);
    let predicted = if reward.uses_predictions() {
        model.rollout(&starts, &candidates.steps)?
    } else {
        Vec::new()
    };
    let scores = reward.score(&starts, &candidates.steps, &predicted)?;
    let order = rank_descending(&scores);
    let k = cfg.top_k_choice.clamp(1, m);
    let chosen = order[rng.random_range(0..k)];
    let mut actions = candidates.actions(chosen);
    for a in actions.iter_mut() {
        if rng.random::<f64>() < cfg.epsilon_random {
            *a = uniform_action(rng);
        }
    }
    let predicted = if predicted.is_empty() {
        let steps: Vec<Array2<f64>> = candidates
            .steps
            .iter()
            .map(|s| s.row(chosen).insert_axis(Axis(0)).to_owned())
            .collect();
        model.rollout(&broadcast(z0, 1), &steps)?
    } else {
        predicted.iter().map(|p| p.row(chosen).insert_axis(Axis(0)).to_owned()).collect()
    };
    Ok(ExplorePlan {
        actions,
        chosen,
        chosen_score: scores[chosen],
        top_score: scores[order[0]],
        predicted,
        scores,
    })
}

/// Mean squared pixel error between each decoded final predicted latent and
/// the goal frame.
pub fn goal_costs(
    z0: &Array2<f64>,
    candidates: &Candidates,
    model: &impl LatentModel,
    decoder: &impl LatentDecoder,
    goal: ArrayView1<f64>,
) -> Result<Vec<f64>> {
    let starts = broadcast(z0, candidates.len());
    let predicted = model.rollout(&starts, &candidates.steps)?;
    let last = predicted.last().unwrap_or(&starts);
    let decoded = decoder.decode(last)?;
    let p = goal.len() as f64;
    Ok(decoded
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(goal).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p)
        .collect())
}

/// Per-(step, dimension) mean and population standard deviation of the
/// `elite_count` lowest-cost candidates.
pub fn refit_elites(candidates: &Candidates, costs: &[f64], elite_count: usize) -> (Array2<f64>, Array2<f64>) {
    let neg: Vec<f64> = costs.iter().map(|c| -c).collect();
    let elites: Vec<usize> = rank_descending(&neg).into_iter().take(elite_count).collect();
    let a = candidates.steps.first().map_or(0, |s| s.ncols());
    let h = candidates.horizon();
    let mut mean = Array2::zeros((h, a));
    let mut std = Array2::zeros((h, a));
    let n = elites.len() as f64;
    for (k, step) in candidates.steps.iter().enumerate() {
        let sel = step.select(Axis(0), &elites);
        let mu: Array1<f64> = sel.sum_axis(Axis(0)) / n;
        let var: Array1<f64> = sel.map_axis(Axis(0), |col| col.iter().map(|v| v * v).sum::<f64>()) / n - &mu * &mu;
        mean.row_mut(k).assign(&mu);
        std.row_mut(k).assign(&var.mapv(|v| v.max(0.0).sqrt()));
    }
    (mean, std)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalPlan {
    pub actions: Vec<Action>,
    pub best_cost: f64,
    /// Lowest cost seen in each iteration.
    pub iteration_best: Vec<f64>,
    /// `(mean, std)` sampling distribution of each refit iteration.
    pub refits: Vec<(Array2<f64>, Array2<f64>)>,
}

pub fn plan_goal(
    z0: &Array2<f64>,
    goal: ArrayView1<f64>,
    model: &impl LatentModel,
    decoder: &impl LatentDecoder,
    cfg: &PlanConfig,
    rng: &mut impl Rng,
) -> Result<GoalPlan> {
    cfg.validate()?;
    let first =
        Candidates::sample_isotropic(cfg.num_samples, cfg.horizon, model.action_dim(), cfg.action_sample_std, rng);
    plan_goal_from(z0, goal, first, model, decoder, cfg, rng)
}

/// Cross-entropy method starting from a given first-iteration candidate set.
/// Returns the lowest-cost candidate over all iterations.
pub fn plan_goal_from(
    z0: &Array2<f64>,
    goal: ArrayView1<f64>,
    first: Candidates,
    model: &impl LatentModel,
    decoder: &impl LatentDecoder,
    cfg: &PlanConfig,
    rng: &mut impl Rng,
) -> Result<GoalPlan> {
    let mut candidates = first;
    let mut best: Option<(f64, Vec<Action>)> = None;
    let mut iteration_best = Vec::new();
    let mut refits = Vec::new();
    for it in 0..cfg.cem_iterations {
        if candidates.is_empty() {
            return Err(CoreError::Config("plan_goal needs at least one candidate".into()));
        }
        let costs = goal_costs(z0, &candidates, model, decoder, goal)?;
        let order = rank_descending(&costs.iter().map(|c| -c).collect::<Vec<_>>());
        let i = order[0];
        iteration_best.push(costs[i]);
        if best.as_ref().is_none_or(|(c, _)| costs[i] < *c) {
            best = Some((costs[i], candidates.actions(i)));
        }
        if it + 1 < cfg.cem_iterations {
            let (mean, std) = refit_elites(&candidates, &costs, cfg.elite_count.min(candidates.len()));
            candidates = Candidates::sample(cfg.num_samples, &mean, &std, rng);
            refits.push((mean, std));
        }
    }
    let (best_cost, actions) = best.expect("at least one iteration");
    Ok(GoalPlan {
        actions,
        best_cost,
        iteration_best,
        refits,
    })
}

/// An episode as executed, with the ground truth the agent never saw.
#[derive(Debug, Clone)]
pub struct ActedEpisode {
    pub episode: Episode,
    pub truth: Vec<SimState>,
    pub planner_calls: usize,
    pub top_scores: Vec<f64>,
}

/// Resets `env` and runs it to its horizon, replanning every `cfg.horizon`
/// steps from the deterministic encoding of the current frame.
pub fn act_episode<E: Environment>(
    env: &mut E,
    encoder: &impl FrameEncoder,
    model: &impl LatentModel,
    reward: &impl TrajectoryReward,
    cfg: &PlanConfig,
    rng: &mut impl Rng,
) -> Result<ActedEpisode> {
    cfg.validate()?;
    let t = env.horizon();
    if t % cfg.horizon != 0 {
        return Err(CoreError::Config(format!(
            "episode horizon {t} is not a multiple of the planning horizon {}",
            cfg.horizon
        )));
    }
    let obs = env.reset();
    let mut truth = vec![obs.truth];
    let mut frame = obs.image;
    let mut episode = Episode::with_first_frame(frame.clone());
    let mut top_scores = Vec::new();
    for _ in 0..t / cfg.horizon {
        let z = encoder.encode_frame(&frame)?;
        let plan = plan_explore(&z, model, reward, cfg, rng)?;
        top_scores.push(plan.top_score);
        for a in plan.actions {
            let obs = env.step(a)?;
            episode.push(a, obs.image.clone());
            truth.push(obs.truth);
            frame = obs.image;
        }
    }
    Ok(ActedEpisode {
        episode,
        truth,
        planner_calls: top_scores.len(),
        top_scores,
    })
}

/// Resets `env` and runs it to its horizon with uniform random actions.
pub fn random_episode<E: Environment>(env: &mut E, rng: &mut impl Rng) -> Result<ActedEpisode> {
    let obs = env.reset();
    let mut truth = vec![obs.truth];
    let mut episode = Episode::with_first_frame(obs.image);
    for _ in 0..env.horizon() {
        let a = uniform_action(rng);
        let obs = env.step(a)?;
        episode.push(a, obs.image);
        truth.push(obs.truth);
    }
    Ok(ActedEpisode {
        episode,
        truth,
        planner_calls: 0,
        top_scores: Vec::new(),
    })
}
