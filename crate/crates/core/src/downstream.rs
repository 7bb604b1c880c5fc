//! Offline evaluation of an exploration dataset: train a fresh world model on
//! the dataset alone, then reach goal images by latent CEM planning.

use bee_nn::{seeded, Rng};
use bee_sim::{render, Action, Environment, Image, LayoutSpec, ObjectKind, Pose, SimState, TabletopEnv, Vec2};
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::buffer::ReplayBuffer;
use crate::dataset::Dataset;
use crate::error::{CoreError, Result};
use crate::planner::{plan_goal, FrameEncoder, PlanConfig};
use crate::world_model::{HorizonSchedule, TrainingConfig, WorldModel, WorldModelConfig};

/// Ground-truth success test, evaluated only once a trial has finished.
pub type SuccessPredicate = fn(&LayoutSpec, &SimState) -> bool;

#[derive(Debug, Clone)]
pub struct DownstreamTask {
    pub name: &'static str,
    pub layout: LayoutSpec,
    pub goal: Image,
    pub success: SuccessPredicate,
}

pub const TASK_NAMES: [&str; 4] = ["open_drawer", "push_block_right", "push_door", "noop"];

fn pose_change(layout: &LayoutSpec, state: &SimState, object: usize) -> f64 {
    match (&layout.objects[object].pose, &state.objects[object].pose) {
        (Pose::Extension(a), Pose::Extension(b)) | (Pose::Angle(a), Pose::Angle(b)) => b - a,
        (Pose::Position(a), Pose::Position(b)) => b.x - a.x,
        _ => f64::NAN,
    }
}

fn drawer_opened(layout: &LayoutSpec, state: &SimState) -> bool {
    pose_change(layout, state, 0) >= layout.thresholds.drawer
}

fn block_pushed_right(layout: &LayoutSpec, state: &SimState) -> bool {
    pose_change(layout, state, 0) >= layout.thresholds.block
}

fn door_pushed_open(layout: &LayoutSpec, state: &SimState) -> bool {
    pose_change(layout, state, 0) >= layout.thresholds.door
}

fn always(_: &LayoutSpec, _: &SimState) -> bool {
    true
}

/// Goal frame: the first object moved to `pose`, gripper resting on it.
fn goal_image(layout: &LayoutSpec, pose: Pose, gripper_offset: Vec2) -> Image {
    let mut state = bee_sim::env::initial_state(layout);
    state.objects[0].pose = pose;
    state.gripper = (state.objects[0].anchor() + gripper_offset).clamp(0.0, 1.0);
    render(layout, &state)
}

impl DownstreamTask {
    pub fn by_name(name: &str) -> Result<Self> {
        let task = match name {
            "open_drawer" => {
                let layout = LayoutSpec::drawer();
                let Pose::Extension(e) = layout.objects[0].pose else { unreachable!("drawer preset") };
                let goal = goal_image(&layout, Pose::Extension(e + 0.15), Vec2::new(0.0, 0.0));
                Self { name: "open_drawer", layout, goal, success: drawer_opened }
            }
            "push_block_right" => {
                let layout = LayoutSpec::blocks();
                let Pose::Position(p) = layout.objects[0].pose else { unreachable!("blocks preset") };
                let contact = layout.gripper_radius + layout.objects[0].size;
                let goal = goal_image(&layout, Pose::Position(p + Vec2::new(0.15, 0.0)), Vec2::new(-contact, 0.0));
                Self { name: "push_block_right", layout, goal, success: block_pushed_right }
            }
            "push_door" => {
                let layout = LayoutSpec::door(2);
                debug_assert!(matches!(layout.objects[0].kind, ObjectKind::Door { .. }));
                let goal = goal_image(&layout, Pose::Angle(0.6), Vec2::new(0.0, 0.0));
                Self { name: "push_door", layout, goal, success: door_pushed_open }
            }
            "noop" => {
                let layout = LayoutSpec::blocks();
                let goal = render(&layout, &bee_sim::env::initial_state(&layout));
                Self { name: "noop", layout, goal, success: always }
            }
            other => {
                return Err(CoreError::Config(format!(
                    "unknown task `{other}`; expected one of {}",
                    TASK_NAMES.join(", ")
                )))
            }
        };
        Ok(task)
    }
}

/// Chooses the next actions toward a goal frame from the current frame.
pub trait GoalPlanner {
    fn plan(&self, frame: &Image, goal: &Image, rng: &mut Rng) -> Result<Vec<Action>>;
}

/// Latent CEM toward the decoded goal, using a world model's dynamics.
pub struct CemGoalPlanner<'a> {
    pub world_model: &'a WorldModel,
    pub config: PlanConfig,
}

impl GoalPlanner for CemGoalPlanner<'_> {
    fn plan(&self, frame: &Image, goal: &Image, rng: &mut Rng) -> Result<Vec<Action>> {
        let z = self.world_model.encode_frame(frame)?;
        let goal = Array1::from(goal.to_unit());
        let wm = self.world_model;
        Ok(plan_goal(&z, goal.view(), &wm.dynamics, &wm.vae, &self.config, rng)?.actions)
    }
}

/// Never acts; the success rate it earns is the predicate's rate on the
/// untouched scene.
pub struct NoOpPlanner;

impl GoalPlanner for NoOpPlanner {
    fn plan(&self, _: &Image, _: &Image, _: &mut Rng) -> Result<Vec<Action>> {
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DownstreamConfig {
    pub world_model: WorldModelConfig,
    /// Offline updates; each is one VAE and one dynamics step.
    pub updates: usize,
    pub batch_size: usize,
    pub train_horizon: usize,
    pub plan: PlanConfig,
    /// Replanning rounds per trial.
    pub rounds: usize,
    /// Planned actions executed per round.
    pub actions_per_round: usize,
    pub seed: u64,
}

impl Default for DownstreamConfig {
    fn default() -> Self {
        Self {
            world_model: WorldModelConfig::default(),
            updates: 5000,
            batch_size: 32,
            train_horizon: 10,
            plan: PlanConfig::goal(),
            rounds: 5,
            actions_per_round: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownstreamReport {
    pub task: String,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean losses over the last 100 offline updates.
    pub final_vae_loss: Option<f64>,
    pub final_dyn_loss: Option<f64>,
}

/// Runs `trials` trials of `rounds × {plan, execute}` from the task's reset
/// state and scores each by the task predicate.
pub fn evaluate_goal_task(
    planner: &impl GoalPlanner,
    task: &DownstreamTask,
    trials: usize,
    rounds: usize,
    actions_per_round: usize,
    rng: &mut Rng,
) -> Result<DownstreamReport> {
    let mut layout = task.layout.clone();
    layout.horizon = layout.horizon.max(rounds * actions_per_round);
    let mut env = TabletopEnv::new(layout.clone())?;
    let mut successes = 0;
    for _ in 0..trials {
        let mut obs = env.reset();
        for _ in 0..rounds {
            let actions = planner.plan(&obs.image, &task.goal, rng)?;
            for a in actions.into_iter().take(actions_per_round) {
                obs = env.step(a)?;
            }
        }
        if (task.success)(&task.layout, &obs.truth) {
            successes += 1;
        }
    }
    Ok(DownstreamReport {
        task: task.name.to_string(),
        trials,
        successes,
        success_rate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
        final_vae_loss: None,
        final_dyn_loss: None,
    })
}

/// Trains a fresh world model on the dataset's episodes only.
pub fn train_offline(dataset: &Dataset, config: &DownstreamConfig, rng: &mut Rng) -> Result<(WorldModel, f64, f64)> {
    if dataset.episodes.is_empty() {
        return Err(CoreError::Config("downstream evaluation needs a nonempty dataset".into()));
    }
    let mut buffer = ReplayBuffer::new();
    for e in &dataset.episodes {
        buffer.push(e.clone());
    }
    let training = TrainingConfig {
        batch_size: config.batch_size,
        window: buffer.len(),
        schedule: HorizonSchedule::constant(config.train_horizon),
        ..TrainingConfig::default()
    };
    let mut wm = WorldModel::new(config.world_model.clone(), rng);
    let tail = config.updates.min(100).max(1) as f64;
    let (mut vae, mut dyn_loss) = (0.0, 0.0);
    for u in 0..config.updates {
        let s = wm.train_step(&buffer, &[], 0, &training, rng)?;
        if u + 100 >= config.updates {
            vae += s.vae.total / tail;
            dyn_loss += s.dynamics / tail;
        }
    }
    Ok((wm, vae, dyn_loss))
}

pub fn run_downstream_eval(
    dataset: &Dataset,
    task: &DownstreamTask,
    trials: usize,
    config: &DownstreamConfig,
) -> Result<DownstreamReport> {
    let frame = &dataset
        .episodes
        .first()
        .ok_or_else(|| CoreError::Config("downstream evaluation needs a nonempty dataset".into()))?
        .frames[0];
    if frame.height() != task.layout.image_size || frame.width() != task.layout.image_size {
        return Err(CoreError::Config(format!(
            "dataset frames are {}x{} but task `{}` renders {1}x{1}",
            frame.height(),
            task.layout.image_size,
            task.name
        )));
    }
    config.plan.validate()?;
    let mut rng = seeded(config.seed);
    let (wm, vae, dyn_loss) = train_offline(dataset, config, &mut rng)?;
    let planner = CemGoalPlanner {
        world_model: &wm,
        config: config.plan.clone(),
    };
    let mut report = evaluate_goal_task(&planner, task, trials, config.rounds, config.actions_per_round, &mut rng)?;
    report.final_vae_loss = Some(vae);
    report.final_dyn_loss = Some(dyn_loss);
    Ok(report)
}
