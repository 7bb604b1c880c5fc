//! Procedural stand-in for human-provided relevant-state images.

use rand::Rng;

use crate::env::{initial_state, Observation};
use crate::geometry::Vec2;
use crate::layout::{LayoutSpec, ObjectKind, Pose};
use crate::render::render;

fn in_disc(center: Vec2, radius: f64, rng: &mut impl Rng) -> Vec2 {
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random::<f64>() * std::f64::consts::TAU;
    center + Vec2::from_angle(a) * r
}

/// `k` observations of the gripper at object `target` with that object
/// perturbed within its relevant range; every other object keeps its
/// initial pose.
///
/// Blocks are displaced within `relevant.block_jitter`; doors are swung by a
/// random-sign offset whose magnitude is uniform in `relevant.door_offset`;
/// drawers are opened to a uniform extension in `[0, max_extension]`. The
/// gripper is then placed uniformly within `relevant.gripper_radius` of the
/// object's centre or handle.
pub fn generate_relevant_examples(layout: &LayoutSpec, target: usize, k: usize, rng: &mut impl Rng) -> Vec<Observation> {
    let spec = layout.relevant;
    (0..k)
        .map(|_| {
            let mut state = initial_state(layout);
            let obj = &mut state.objects[target];
            match (&obj.kind, &mut obj.pose) {
                (ObjectKind::Block | ObjectKind::DistractorBlock, Pose::Position(p)) => {
                    *p = in_disc(*p, spec.block_jitter, rng).clamp(obj.size, 1.0 - obj.size);
                }
                (
                    ObjectKind::Door {
                        min_angle, max_angle, ..
                    },
                    Pose::Angle(a),
                ) => {
                    let [lo, hi] = spec.door_offset;
                    let mag = lo + (hi - lo) * rng.random::<f64>();
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    *a = (*a + sign * mag).clamp(*min_angle, *max_angle);
                }
                (ObjectKind::Drawer { max_extension, .. }, Pose::Extension(e)) => {
                    *e = max_extension * rng.random::<f64>();
                }
                _ => {}
            }
            let anchor = state.objects[target].anchor();
            state.gripper = in_disc(anchor, spec.gripper_radius, rng).clamp(0.0, 1.0);
            Observation {
                image: render(layout, &state),
                truth: state,
            }
        })
        .collect()
}

/// `k` examples split as evenly as possible across all of the layout's targets.
pub fn generate_relevant_set(layout: &LayoutSpec, k: usize, rng: &mut impl Rng) -> Vec<Observation> {
    let n = layout.targets.len().max(1);
    let mut out = Vec::with_capacity(k);
    for (i, &t) in layout.targets.iter().enumerate() {
        let share = k / n + usize::from(i < k % n);
        out.extend(generate_relevant_examples(layout, t, share, rng));
    }
    out
}
