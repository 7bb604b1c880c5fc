//! Scene descriptions.

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::geometry::Vec2;

/// Object type plus its fixed geometry. Blocks move freely in the plane;
/// doors and drawers have a single degree of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObjectKind {
    Block,
    DistractorBlock,
    /// Rigid arm of `length` rotating about `hinge`; the handle sits at the tip.
    Door {
        hinge: Vec2,
        length: f64,
        min_angle: f64,
        max_angle: f64,
    },
    /// Handle slides along unit `axis` from `base` (closed) to
    /// `base + max_extension · axis`.
    Drawer {
        base: Vec2,
        axis: Vec2,
        max_extension: f64,
    },
}

impl ObjectKind {
    pub fn is_block(&self) -> bool {
        matches!(self, ObjectKind::Block | ObjectKind::DistractorBlock)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pose {
    Position(Vec2),
    Angle(f64),
    Extension(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub kind: ObjectKind,
    pub pose: Pose,
    /// Block radius, or handle radius for doors and drawers.
    pub size: f64,
    /// Render brightness in (0, 1].
    pub intensity: f64,
}

impl ObjectState {
    pub fn block(position: Vec2, size: f64, intensity: f64) -> Self {
        Self {
            kind: ObjectKind::Block,
            pose: Pose::Position(position),
            size,
            intensity,
        }
    }

    pub fn distractor(position: Vec2, size: f64, intensity: f64) -> Self {
        Self {
            kind: ObjectKind::DistractorBlock,
            ..Self::block(position, size, intensity)
        }
    }

    /// Position of the block centre or of the door/drawer handle.
    pub fn anchor(&self) -> Vec2 {
        match (&self.kind, self.pose) {
            (ObjectKind::Door { hinge, length, .. }, Pose::Angle(theta)) => *hinge + Vec2::from_angle(theta) * *length,
            (ObjectKind::Drawer { base, axis, .. }, Pose::Extension(e)) => *base + *axis * e,
            (_, Pose::Position(p)) => p,
            // rejected by validation
            _ => Vec2::default(),
        }
    }

    /// Pose distance used by the interaction metric: Euclidean for blocks,
    /// absolute angle for doors, absolute extension for drawers.
    pub fn pose_distance(&self, other: &ObjectState) -> f64 {
        match (self.pose, other.pose) {
            (Pose::Position(a), Pose::Position(b)) => a.distance(b),
            (Pose::Angle(a), Pose::Angle(b)) => (a - b).abs(),
            (Pose::Extension(a), Pose::Extension(b)) => (a - b).abs(),
            _ => f64::NAN,
        }
    }
}

/// Displacement thresholds for the "moved" flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub block: f64,
    pub door: f64,
    pub drawer: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            block: 0.08,
            door: 0.15,
            drawer: 0.06,
        }
    }
}

impl Thresholds {
    pub fn for_kind(&self, kind: &ObjectKind) -> f64 {
        match kind {
            ObjectKind::Block | ObjectKind::DistractorBlock => self.block,
            ObjectKind::Door { .. } => self.door,
            ObjectKind::Drawer { .. } => self.drawer,
        }
    }
}

/// How the procedural stand-in for a human places relevant examples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevantSpec {
    /// Gripper lands uniformly within this radius of the target anchor.
    pub gripper_radius: f64,
    /// Blocks are displaced uniformly within this radius of their start.
    pub block_jitter: f64,
    /// Doors are swung by an offset whose magnitude is uniform in this range,
    /// with a random sign.
    pub door_offset: [f64; 2],
}

impl Default for RelevantSpec {
    fn default() -> Self {
        Self {
            gripper_radius: 0.05,
            block_jitter: 0.05,
            door_offset: [5f64.to_radians(), 45f64.to_radians()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub objects: Vec<ObjectState>,
    pub targets: Vec<usize>,
    pub gripper_start: Vec2,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_max_step")]
    pub max_step: f64,
    #[serde(default = "default_gripper_radius")]
    pub gripper_radius: f64,
    #[serde(default = "default_image_size")]
    pub image_size: usize,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub relevant: RelevantSpec,
}

fn default_horizon() -> usize {
    50
}
fn default_max_step() -> f64 {
    0.05
}
fn default_gripper_radius() -> f64 {
    0.05
}
fn default_image_size() -> usize {
    16
}

pub const GRIPPER_INTENSITY: f64 = 1.0;

impl LayoutSpec {
    fn with_objects(objects: Vec<ObjectState>, targets: Vec<usize>) -> Self {
        Self {
            objects,
            targets,
            gripper_start: Vec2::new(0.5, 0.5),
            horizon: default_horizon(),
            max_step: default_max_step(),
            gripper_radius: default_gripper_radius(),
            image_size: default_image_size(),
            thresholds: Thresholds::default(),
            relevant: RelevantSpec::default(),
        }
    }

    /// One target block and two distractor blocks, equidistant from the
    /// gripper's start.
    pub fn blocks() -> Self {
        Self::with_objects(
            vec![
                ObjectState::block(Vec2::new(0.25, 0.75), 0.06, 0.7),
                ObjectState::distractor(Vec2::new(0.75, 0.75), 0.06, 0.45),
                ObjectState::distractor(Vec2::new(0.75, 0.25), 0.06, 0.3),
            ],
            vec![0],
        )
    }

    /// A door hinged near the top-left corner plus `distractors` blocks.
    pub fn door(distractors: usize) -> Self {
        let mut objects = vec![ObjectState {
            kind: ObjectKind::Door {
                hinge: Vec2::new(0.1, 0.15),
                length: 0.3,
                min_angle: -0.2,
                max_angle: 1.4,
            },
            pose: Pose::Angle(0.0),
            size: 0.05,
            intensity: 0.7,
        }];
        let spots = [
            Vec2::new(0.75, 0.75),
            Vec2::new(0.75, 0.25),
            Vec2::new(0.25, 0.8),
            Vec2::new(0.55, 0.85),
            Vec2::new(0.85, 0.5),
        ];
        for (i, p) in spots.iter().cycle().take(distractors).enumerate() {
            objects.push(ObjectState::distractor(*p, 0.06, 0.3 + 0.05 * (i % 4) as f64));
        }
        Self::with_objects(objects, vec![0])
    }

    /// A drawer along the top edge, slightly open, plus two distractor blocks.
    pub fn drawer() -> Self {
        Self::with_objects(
            vec![
                ObjectState {
                    kind: ObjectKind::Drawer {
                        base: Vec2::new(0.3, 0.08),
                        axis: Vec2::new(0.0, 1.0),
                        max_extension: 0.3,
                    },
                    pose: Pose::Extension(0.04),
                    size: 0.05,
                    intensity: 0.7,
                },
                ObjectState::distractor(Vec2::new(0.75, 0.75), 0.06, 0.45),
                ObjectState::distractor(Vec2::new(0.25, 0.78), 0.06, 0.3),
            ],
            vec![0],
        )
    }

    pub fn distractor_count(&self) -> usize {
        (0..self.objects.len()).filter(|i| !self.targets.contains(i)).count()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidLayout(msg));
        if self.targets.is_empty() {
            return bad("at least one target object is required".into());
        }
        for &t in &self.targets {
            if t >= self.objects.len() {
                return bad(format!("target id {t} does not refer to an object ({} objects)", self.objects.len()));
            }
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if !(self.max_step > 0.0 && self.max_step.is_finite()) {
            return bad(format!("max_step must be positive, got {}", self.max_step));
        }
        if !(self.gripper_radius > 0.0) {
            return bad("gripper radius must be positive".into());
        }
        if self.image_size < 4 {
            return bad(format!("image size {} is too small", self.image_size));
        }
        if !in_unit(self.gripper_start) {
            return bad("gripper start outside the table".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !(o.size > 0.0 && o.size < 0.5) {
                return bad(format!("object {i}: size {} out of range", o.size));
            }
            if !(o.intensity > 0.0 && o.intensity <= 1.0) {
                return bad(format!("object {i}: intensity {} outside (0, 1]", o.intensity));
            }
            match (&o.kind, o.pose) {
                (ObjectKind::Block | ObjectKind::DistractorBlock, Pose::Position(p)) => {
                    let (lo, hi) = (o.size, 1.0 - o.size);
                    if !(p.x >= lo && p.x <= hi && p.y >= lo && p.y <= hi) {
                        return bad(format!("object {i}: block centre must lie in [{lo}, {hi}]²"));
                    }
                }
                (
                    ObjectKind::Door {
                        hinge,
                        length,
                        min_angle,
                        max_angle,
                    },
                    Pose::Angle(a),
                ) => {
                    if !in_unit(*hinge) || !(*length > 0.0) || !(min_angle < max_angle) {
                        return bad(format!("object {i}: malformed door geometry"));
                    }
                    if a < *min_angle || a > *max_angle {
                        return bad(format!("object {i}: door angle {a} outside hinge limits"));
                    }
                }
                (
                    ObjectKind::Drawer {
                        base,
                        axis,
                        max_extension,
                    },
                    Pose::Extension(e),
                ) => {
                    if !in_unit(*base) || (axis.norm() - 1.0).abs() > 1e-9 || !(*max_extension > 0.0) {
                        return bad(format!("object {i}: malformed drawer geometry"));
                    }
                    if e < 0.0 || e > *max_extension {
                        return bad(format!("object {i}: drawer extension {e} outside [0, {max_extension}]"));
                    }
                    if !in_unit(*base + *axis * *max_extension) {
                        return bad(format!("object {i}: fully open drawer leaves the table"));
                    }
                }
                _ => return bad(format!("object {i}: pose does not match object kind")),
            }
        }
        Ok(())
    }
}

fn in_unit(p: Vec2) -> bool {
    (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        LayoutSpec::blocks().validate().unwrap();
        LayoutSpec::door(3).validate().unwrap();
        LayoutSpec::door(5).validate().unwrap();
        LayoutSpec::drawer().validate().unwrap();
        assert_eq!(LayoutSpec::blocks().distractor_count(), 2);
        assert_eq!(LayoutSpec::door(5).distractor_count(), 5);
    }

    #[test]
    fn missing_target_rejected() {
        let mut l = LayoutSpec::blocks();
        l.targets = vec![7];
        assert!(matches!(l.validate(), Err(SimError::InvalidLayout(_))));
        l.targets.clear();
        assert!(l.validate().is_err());
    }

    #[test]
    fn mismatched_pose_rejected() {
        let mut l = LayoutSpec::drawer();
        l.objects[0].pose = Pose::Angle(0.1);
        assert!(l.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let l = LayoutSpec::door(3);
        let s = serde_json::to_string(&l).unwrap();
        let back: LayoutSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(l, back);
    }

    #[test]
    fn defaults_fill_in_from_sparse_json() {
        let json = r#"{
            "objects": [{"kind": {"type": "block"}, "pose": {"position": {"x": 0.3, "y": 0.3}},
                         "size": 0.06, "intensity": 0.8}],
            "targets": [0],
            "gripper_start": {"x": 0.5, "y": 0.5}
        }"#;
        let l: LayoutSpec = serde_json::from_str(json).unwrap();
        assert_eq!(l.horizon, 50);
        assert_eq!(l.image_size, 16);
        l.validate().unwrap();
    }
}
