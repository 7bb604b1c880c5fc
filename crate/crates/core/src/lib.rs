//! Batch exploration from weak supervision: a latent world model, an
//! ensemble of relevance discriminators whose optimistic score is the
//! exploration reward, a latent-space CEM planner, comparison rewards, and
//! the harness that runs, persists and evaluates exploration.

pub mod ablation;
pub mod baselines;
pub mod buffer;
pub mod config;
pub mod dataset;
pub mod downstream;
pub mod error;
pub mod explore;
pub mod images;
pub mod metrics;
pub mod planner;
pub mod relevance;
pub mod world_model;

pub use ablation::{build_report, run_ablation, AblationReport, SettingSummary, Sweep, SweepKey};
pub use baselines::{disagreement, random_policy, DisagreementEnsemble, SmmConfig, SmmDensityPair};
pub use buffer::{ReplayBuffer, SegmentBatch};
pub use config::{ExperimentConfig, LayoutChoice, Method, Preset};
pub use dataset::Dataset;
pub use downstream::{
    evaluate_goal_task, run_downstream_eval, CemGoalPlanner, DownstreamConfig, DownstreamReport, DownstreamTask, GoalPlanner,
    NoOpPlanner,
};
pub use error::{CoreError, Result};
pub use explore::{run_batch_exploration, ExplorationOutput};
pub use metrics::{interaction_frequency, MetricsLog, MetricsRow};
pub use planner::{
    act_episode, plan_explore, plan_goal, random_episode, ActedEpisode, Candidates, ExplorePlan, FrameEncoder, GoalPlan,
    LatentDecoder, LatentModel, PlanConfig, TrajectoryReward,
};
pub use relevance::{aggregate, RelevanceConfig, RelevanceEnsemble, RewardMode};
pub use world_model::{
    Dynamics, HorizonSchedule, RolloutState, TrainStats, TrainingConfig, Vae, VaeLoss, WorldModel, WorldModelConfig,
};
