use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::geometry::{segment_distance, Vec2};
use crate::layout::{LayoutSpec, ObjectKind, ObjectState, Pose};
use crate::render::{render, Image};

pub const ACTION_DIM: usize = 2;

/// Gripper velocity command; each component is clipped to [−1, 1] and scaled
/// by the layout's `max_step`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action(pub [f64; ACTION_DIM]);

impl Action {
    pub fn new(dx: f64, dy: f64) -> Self {
        Self([dx, dy])
    }

    pub fn clipped(self) -> Self {
        Self(self.0.map(|v| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub gripper: Vec2,
    pub objects: Vec<ObjectState>,
    pub time: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub image: Image,
    /// Ground truth, for metrics and example generation only.
    pub truth: SimState,
}

/// Fixed-horizon sequence of frames and the actions between them:
/// `frames.len() == actions.len() + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Episode {
    pub frames: Vec<Image>,
    pub actions: Vec<ActionBits>,
}

/// Bit-exact storage form of an [`Action`], so episodes can be hashed and
/// compared for byte identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ActionBits(pub [u64; ACTION_DIM]);

impl From<Action> for ActionBits {
    fn from(a: Action) -> Self {
        Self(a.0.map(f64::to_bits))
    }
}

impl From<ActionBits> for Action {
    fn from(a: ActionBits) -> Self {
        Action(a.0.map(f64::from_bits))
    }
}

impl Episode {
    pub fn with_first_frame(frame: Image) -> Self {
        Self {
            frames: vec![frame],
            actions: Vec::new(),
        }
    }

    pub fn push(&mut self, action: Action, next: Image) {
        self.actions.push(action.into());
        self.frames.push(next);
    }

    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn action(&self, t: usize) -> Action {
        self.actions[t].into()
    }
}

/// What an agent may drive. Implementations other than [`TabletopEnv`] exist
/// mainly for tests.
pub trait Environment {
    fn reset(&mut self) -> Observation;
    fn step(&mut self, action: Action) -> Result<Observation, SimError>;
    fn horizon(&self) -> usize;
    fn layout(&self) -> &LayoutSpec;
}

#[derive(Debug, Clone)]
pub struct TabletopEnv {
    layout: LayoutSpec,
    state: SimState,
}

impl TabletopEnv {
    pub fn new(layout: LayoutSpec) -> Result<Self, SimError> {
        layout.validate()?;
        let state = initial_state(&layout);
        Ok(Self { layout, state })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    fn observe(&self) -> Observation {
        Observation {
            image: render(&self.layout, &self.state),
            truth: self.state.clone(),
        }
    }
}

pub fn initial_state(layout: &LayoutSpec) -> SimState {
    SimState {
        gripper: layout.gripper_start,
        objects: layout.objects.clone(),
        time: 0,
    }
}

impl Environment for TabletopEnv {
    fn reset(&mut self) -> Observation {
        self.state = initial_state(&self.layout);
        self.observe()
    }

    fn step(&mut self, action: Action) -> Result<Observation, SimError> {
        if self.state.time >= self.layout.horizon {
            return Err(SimError::HorizonExhausted {
                horizon: self.layout.horizon,
            });
        }
        advance(&self.layout, &mut self.state, action);
        Ok(self.observe())
    }

    fn horizon(&self) -> usize {
        self.layout.horizon
    }

    fn layout(&self) -> &LayoutSpec {
        &self.layout
    }
}

/// One step of the contact model.
///
/// The gripper moves by the clipped command. Doors and drawers whose handle
/// lies within contact range of the swept gripper path follow the tangential
/// (door) or axial (drawer) component of the motion. Blocks overlapping the
/// gripper afterwards are pushed out along the centre line by the penetration
/// depth; a block pinned against the table edge pushes the gripper back.
pub fn advance(layout: &LayoutSpec, state: &mut SimState, action: Action) {
    let a = action.clipped();
    let prev = state.gripper;
    let mut g = (prev + Vec2::new(a.0[0], a.0[1]) * layout.max_step).clamp(0.0, 1.0);
    let motion = g - prev;
    let reach = layout.gripper_radius;

    for o in state.objects.iter_mut() {
        let anchor = o.anchor();
        match (&o.kind, &mut o.pose) {
            (
                ObjectKind::Door {
                    length,
                    min_angle,
                    max_angle,
                    ..
                },
                Pose::Angle(theta),
            ) => {
                if segment_distance(prev, g, anchor) < reach + o.size {
                    let tangent = Vec2::new(-theta.sin(), theta.cos());
                    *theta = (*theta + motion.dot(tangent) / length).clamp(*min_angle, *max_angle);
                }
            }
            (ObjectKind::Drawer { axis, max_extension, .. }, Pose::Extension(e)) => {
                if segment_distance(prev, g, anchor) < reach + o.size {
                    *e = (*e + motion.dot(*axis)).clamp(0.0, *max_extension);
                }
            }
            _ => {}
        }
    }

    for o in state.objects.iter_mut() {
        if !o.kind.is_block() {
            continue;
        }
        let Pose::Position(ref mut pos) = o.pose else {
            continue;
        };
        let contact = reach + o.size;
        let offset = *pos - g;
        let dist = offset.norm();
        if dist >= contact {
            continue;
        }
        let dir = offset
            .normalized()
            .or_else(|| motion.normalized())
            .unwrap_or(Vec2::new(1.0, 0.0));
        *pos = (*pos + dir * (contact - dist)).clamp(o.size, 1.0 - o.size);
        let gap = *pos - g;
        if gap.norm() < contact - 1e-12 {
            let back = gap.normalized().unwrap_or(dir);
            g = (*pos - back * contact).clamp(0.0, 1.0);
        }
    }

    state.gripper = g;
    state.time += 1;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::ObjectState;

    fn lone_block(gripper: Vec2, block: Vec2) -> LayoutSpec {
        let mut l = LayoutSpec::blocks();
        l.objects = vec![ObjectState::block(block, 0.06, 0.8)];
        l.targets = vec![0];
        l.gripper_start = gripper;
        l
    }

    #[test]
    fn free_space_motion() {
        let mut env = TabletopEnv::new(lone_block(Vec2::new(0.5, 0.5), Vec2::new(0.2, 0.2))).unwrap();
        env.reset();
        let obs = env.step(Action::new(1.0, 0.0)).unwrap();
        assert!((obs.truth.gripper.x - 0.55).abs() < 1e-12);
        assert_eq!(obs.truth.gripper.y, 0.5);
        assert_eq!(obs.truth.objects, env.layout().objects);
    }

    #[test]
    fn push_transfers_full_overlap() {
        // gripper touching the block from the left: centres 0.05 + 0.06 apart
        let mut env = TabletopEnv::new(lone_block(Vec2::new(0.4, 0.5), Vec2::new(0.51, 0.5))).unwrap();
        env.reset();
        let obs = env.step(Action::new(1.0, 0.0)).unwrap();
        let Pose::Position(p) = obs.truth.objects[0].pose else { unreachable!() };
        assert!((p.x - 0.56).abs() < 1e-12, "block at {p:?}");
        assert!((p.y - 0.5).abs() < 1e-12);
        assert!((obs.truth.gripper.x - 0.45).abs() < 1e-12);
    }

    #[test]
    fn right_wall_clamps_gripper() {
        let mut env = TabletopEnv::new(lone_block(Vec2::new(0.98, 0.5), Vec2::new(0.2, 0.2))).unwrap();
        env.reset();
        let obs = env.step(Action::new(1.0, 0.0)).unwrap();
        assert_eq!(obs.truth.gripper.x, 1.0);
    }

    #[test]
    fn actions_are_clipped() {
        let mut env = TabletopEnv::new(lone_block(Vec2::new(0.5, 0.5), Vec2::new(0.2, 0.2))).unwrap();
        env.reset();
        let obs = env.step(Action::new(7.0, -3.0)).unwrap();
        assert!((obs.truth.gripper.x - 0.55).abs() < 1e-12);
        assert!((obs.truth.gripper.y - 0.45).abs() < 1e-12);
    }

    #[test]
    fn step_after_horizon_is_an_error() {
        let mut l = lone_block(Vec2::new(0.5, 0.5), Vec2::new(0.2, 0.2));
        l.horizon = 2;
        let mut env = TabletopEnv::new(l).unwrap();
        env.reset();
        env.step(Action::default()).unwrap();
        env.step(Action::default()).unwrap();
        assert!(matches!(
            env.step(Action::default()),
            Err(SimError::HorizonExhausted { horizon: 2 })
        ));
        env.reset();
        assert!(env.step(Action::default()).is_ok());
    }

    #[test]
    fn drawer_follows_axial_motion_while_in_contact() {
        let mut l = LayoutSpec::drawer();
        let handle = l.objects[0].anchor();
        l.gripper_start = handle;
        let mut env = TabletopEnv::new(l).unwrap();
        env.reset();
        let obs = env.step(Action::new(0.0, 1.0)).unwrap();
        let Pose::Extension(e) = obs.truth.objects[0].pose else { unreachable!() };
        assert!((e - 0.09).abs() < 1e-12);
    }

    #[test]
    fn door_swings_with_tangential_motion() {
        let mut l = LayoutSpec::door(0);
        let handle = l.objects[0].anchor();
        l.gripper_start = handle;
        let mut env = TabletopEnv::new(l).unwrap();
        env.reset();
        // door points along +x at angle 0, so +y is tangential
        let obs = env.step(Action::new(0.0, 1.0)).unwrap();
        let Pose::Angle(a) = obs.truth.objects[0].pose else { unreachable!() };
        assert!((a - 0.05 / 0.3).abs() < 1e-12);
    }

    #[test]
    fn reset_restores_initial_state() {
        let l = LayoutSpec::blocks();
        let mut env = TabletopEnv::new(l.clone()).unwrap();
        let first = env.reset();
        for _ in 0..10 {
            env.step(Action::new(-1.0, 1.0)).unwrap();
        }
        let again = env.reset();
        assert_eq!(first, again);
        assert_eq!(again.truth.objects, l.objects);
        assert_eq!(again.truth.time, 0);
    }
}
