//! Property tests for reward aggregation, metric windows and the on-disk
//! formats.

use bee_core::{aggregate, interaction_frequency, Dataset, MetricsLog, MetricsRow, RewardMode};
use bee_sim::{Action, Episode, Image};
use proptest::prelude::*;

fn scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 1..8)
}

fn row() -> impl Strategy<Value = MetricsRow> {
    (
        any::<bool>(),
        0..10usize,
        prop::option::of(-1e3..1e3f64),
        prop::option::of(-1e3..1e3f64),
        (0.0..1e3f64, 0.0..1e3f64, 0.0..1e3f64),
        prop::collection::vec(0.0..2.0f64, 3),
    )
        .prop_map(|(moved, calls, r, s, (vae, kl, dyn_loss), displacement)| MetricsRow {
            episode: 0,
            target_moved: moved,
            planner_calls: calls,
            mean_r_exp: r,
            plan_top_score: s,
            vae_loss: vae,
            kl,
            dyn_loss,
            displacement,
        })
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (1..4usize, 1..4usize, 1..4usize, 1..4usize).prop_flat_map(|(episodes, t, h, w)| {
        let frames = prop::collection::vec(any::<u8>(), episodes * (t + 1) * h * w);
        let actions = prop::collection::vec(-1.0..1.0f64, episodes * t * 2);
        (frames, actions, any::<[u8; 32]>()).prop_map(move |(frames, actions, hash)| {
            let mut px = frames.chunks(h * w).map(|c| Image::new(h, w, c.to_vec()).unwrap());
            let mut acts = actions.chunks(2);
            let eps = (0..episodes)
                .map(|_| {
                    let mut ep = Episode::with_first_frame(px.next().unwrap());
                    for _ in 0..t {
                        let a = acts.next().unwrap();
                        ep.push(Action::new(a[0], a[1]), px.next().unwrap());
                    }
                    ep
                })
                .collect();
            Dataset::new(hash, eps)
        })
    })
}

proptest! {
    #[test]
    fn aggregation_is_permutation_invariant(mut s in scores(), seed in any::<u64>()) {
        let before = [aggregate(&s, RewardMode::Max), aggregate(&s, RewardMode::MeanPlusVariance)];
        let n = s.len();
        s.rotate_left((seed % n as u64) as usize);
        s.reverse();
        prop_assert_eq!(aggregate(&s, RewardMode::Max), before[0]);
        prop_assert!((aggregate(&s, RewardMode::MeanPlusVariance) - before[1]).abs() < 1e-12);
    }

    #[test]
    fn aggregation_bounds(s in scores()) {
        let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = aggregate(&s, RewardMode::Max);
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let mpv = aggregate(&s, RewardMode::MeanPlusVariance);
        prop_assert!(s.iter().all(|&x| x <= hi));
        prop_assert!(mpv >= mean - 1e-15);
        // population variance of values in [lo, hi] is at most (hi - lo)² / 4
        prop_assert!(mpv <= mean + (hi - lo).powi(2) / 4.0 + 1e-12);
        prop_assert_eq!(aggregate(&s, RewardMode::Single), s[0]);
    }

    #[test]
    fn window_frequencies_average_to_overall_rate(
        flags in prop::collection::vec(any::<bool>(), 1..400),
        window in 1..50usize,
    ) {
        let result = interaction_frequency(&flags, window);
        if flags.len() < window {
            prop_assert!(result.is_err());
        } else {
            let freq = result.unwrap();
            prop_assert_eq!(freq.len(), flags.len() / window);
            prop_assert!(freq.iter().all(|f| (0.0..=1.0).contains(f)));
            let covered = freq.len() * window;
            let rate = flags[..covered].iter().filter(|&&f| f).count() as f64 / covered as f64;
            let mean = freq.iter().sum::<f64>() / freq.len() as f64;
            prop_assert!((mean - rate).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_csv_round_trips(rows in prop::collection::vec(row(), 1..20)) {
        let mut log = MetricsLog::default();
        for (i, mut r) in rows.into_iter().enumerate() {
            r.episode = i;
            log.push(r);
        }
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let back = MetricsLog::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &log);
        let mut again = Vec::new();
        back.write_csv(&mut again).unwrap();
        prop_assert_eq!(again, buf);
    }

    #[test]
    fn dataset_round_trips_and_rejects_truncation(d in dataset(), cut in any::<prop::sample::Index>()) {
        let mut buf = Vec::new();
        d.write(&mut buf).unwrap();
        prop_assert_eq!(&Dataset::read(buf.as_slice()).unwrap(), &d);
        let at = cut.index(buf.len());
        prop_assert!(Dataset::read(&buf[..at]).is_err());
    }
}
