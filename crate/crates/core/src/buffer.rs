//! Append-only episode storage with recency-windowed sampling.

use bee_sim::{Episode, Image, ACTION_DIM};
use ndarray::Array2;
use rand::Rng;

use crate::images::to_matrix;

/// Every collected episode, in collection order. Nothing is ever removed.
#[derive(Debug, Clone, Default)]
pub struct ReplayBuffer {
    episodes: Vec<Episode>,
}

/// `horizon + 1` frame batches and `horizon` action batches, each row one
/// sampled segment.
#[derive(Debug, Clone)]
pub struct SegmentBatch {
    pub frames: Vec<Array2<f64>>,
    pub actions: Vec<Array2<f64>>,
}

impl ReplayBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, episode: Episode) {
        self.episodes.push(episode);
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn into_episodes(self) -> Vec<Episode> {
        self.episodes
    }

    pub fn transitions(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    /// Index of the oldest episode inside the recency window.
    pub fn window_start(&self, window: usize) -> usize {
        self.episodes.len().saturating_sub(window.max(1))
    }

    /// Uniform episode index among the most recent `window` episodes.
    pub fn sample_index(&self, window: usize, rng: &mut impl Rng) -> usize {
        assert!(!self.is_empty(), "sampling from an empty buffer");
        rng.random_range(self.window_start(window)..self.episodes.len())
    }

    /// `n` frames drawn uniformly from the recent window.
    pub fn sample_frames(&self, n: usize, window: usize, rng: &mut impl Rng) -> Vec<&Image> {
        (0..n)
            .map(|_| {
                let ep = &self.episodes[self.sample_index(window, rng)];
                &ep.frames[rng.random_range(0..ep.frames.len())]
            })
            .collect()
    }

    /// `n` contiguous segments of `horizon` transitions from the recent window.
    pub fn sample_segments(&self, n: usize, horizon: usize, window: usize, rng: &mut impl Rng) -> SegmentBatch {
        let mut frames: Vec<Vec<&Image>> = vec![Vec::with_capacity(n); horizon + 1];
        let mut actions = vec![Array2::zeros((n, ACTION_DIM)); horizon];
        for row in 0..n {
            let ep = &self.episodes[self.sample_index(window, rng)];
            assert!(ep.len() >= horizon, "episode shorter than the training horizon");
            let start = rng.random_range(0..=ep.len() - horizon);
            for (k, f) in frames.iter_mut().enumerate() {
                f.push(&ep.frames[start + k]);
            }
            for (k, a) in actions.iter_mut().enumerate() {
                let act = ep.action(start + k);
                for d in 0..ACTION_DIM {
                    a[[row, d]] = act.0[d];
                }
            }
        }
        SegmentBatch {
            frames: frames.into_iter().map(to_matrix).collect(),
            actions,
        }
    }
}
