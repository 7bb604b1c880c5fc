//! Ground-truth interaction metrics. Evaluated after the fact; never visible
//! to the agent.

use serde::{Deserialize, Serialize};

use crate::env::SimState;
use crate::layout::LayoutSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInteraction {
    pub max_displacement: f64,
    pub moved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionReport {
    pub objects: Vec<ObjectInteraction>,
    /// Moved flag per entry of `layout.targets`, in order.
    pub targets_moved: Vec<bool>,
}

impl InteractionReport {
    pub fn any_target_moved(&self) -> bool {
        self.targets_moved.iter().any(|&m| m)
    }
}

/// Maximum pose distance of each object from its pose in `trace[0]`, and
/// whether it exceeded the per-kind threshold.
pub fn interaction_report(layout: &LayoutSpec, trace: &[SimState]) -> InteractionReport {
    let objects: Vec<ObjectInteraction> = match trace.first() {
        None => Vec::new(),
        Some(start) => start
            .objects
            .iter()
            .enumerate()
            .map(|(i, initial)| {
                let max_displacement = trace
                    .iter()
                    .map(|s| s.objects[i].pose_distance(initial))
                    .fold(0.0, f64::max);
                ObjectInteraction {
                    max_displacement,
                    moved: max_displacement > layout.thresholds.for_kind(&initial.kind),
                }
            })
            .collect(),
    };
    let targets_moved = layout
        .targets
        .iter()
        .map(|&t| objects.get(t).is_some_and(|o| o.moved))
        .collect();
    InteractionReport { objects, targets_moved }
}
