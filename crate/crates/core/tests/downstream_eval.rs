mod common;

use bee_core::downstream::{train_offline, TASK_NAMES};
use bee_core::{
    evaluate_goal_task, run_batch_exploration, run_downstream_eval, CemGoalPlanner, Dataset, DownstreamConfig,
    DownstreamTask, Method, NoOpPlanner, PlanConfig,
};
use bee_nn::{seeded, Parameterized};
use common::tiny_config;

fn small_downstream(cfg_wm: bee_core::WorldModelConfig) -> DownstreamConfig {
    DownstreamConfig {
        world_model: cfg_wm,
        updates: 30,
        batch_size: 4,
        train_horizon: 3,
        plan: PlanConfig {
            num_samples: 16,
            elite_count: 4,
            ..PlanConfig::goal()
        },
        ..DownstreamConfig::default()
    }
}

fn random_dataset(episodes: usize) -> Dataset {
    let cfg = tiny_config(Method::Random, episodes);
    run_batch_exploration(&cfg, None, |_| {}).unwrap().dataset
}

#[test]
fn trivially_true_goal_succeeds_every_trial() {
    let data = random_dataset(3);
    let cfg = small_downstream(tiny_config(Method::Random, 1).world_model);
    let task = DownstreamTask::by_name("noop").unwrap();
    let report = run_downstream_eval(&data, &task, 4, &cfg).unwrap();
    assert_eq!(report.success_rate, 1.0);
    assert_eq!(report.trials, 4);
    assert!(report.final_dyn_loss.unwrap().is_finite());
}

#[test]
fn empty_action_stub_matches_the_untouched_rate() {
    for name in TASK_NAMES {
        let task = DownstreamTask::by_name(name).unwrap();
        let untouched = (task.success)(&task.layout, &bee_sim::env::initial_state(&task.layout));
        let r = evaluate_goal_task(&NoOpPlanner, &task, 10, 5, 10, &mut seeded(1)).unwrap();
        assert_eq!(r.success_rate, if untouched { 1.0 } else { 0.0 }, "{name}");
    }
}

#[test]
fn offline_training_reads_only_the_dataset_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.bin");
    random_dataset(3).save(&path).unwrap();
    let data = Dataset::load(&path).unwrap();
    let cfg = small_downstream(tiny_config(Method::Random, 1).world_model);
    let (a, va, da) = train_offline(&data, &cfg, &mut seeded(4)).unwrap();
    let (b, vb, db) = train_offline(&data, &cfg, &mut seeded(4)).unwrap();
    assert_eq!(bee_nn::fingerprint(&a.params()), bee_nn::fingerprint(&b.params()));
    assert_eq!((va, da), (vb, db));

    let task = DownstreamTask::by_name("open_drawer").unwrap();
    let planner = CemGoalPlanner { world_model: &a, config: cfg.plan.clone() };
    let r1 = evaluate_goal_task(&planner, &task, 3, 5, 10, &mut seeded(2)).unwrap();
    let r2 = evaluate_goal_task(&planner, &task, 3, 5, 10, &mut seeded(2)).unwrap();
    assert_eq!(r1, r2);
}

#[test]
fn empty_or_mismatched_dataset_is_rejected() {
    let cfg = small_downstream(tiny_config(Method::Random, 1).world_model);
    let task = DownstreamTask::by_name("noop").unwrap();
    assert!(run_downstream_eval(&Dataset::new([0; 32], vec![]), &task, 1, &cfg).is_err());
    let mut data = random_dataset(1);
    data.episodes[0].frames[0] = bee_sim::Image::blank(8, 8);
    assert!(run_downstream_eval(&data, &task, 1, &cfg).is_err());
}
