//! Deterministic 2-D tabletop environment.
//!
//! A point gripper moves over the unit square and pushes objects by
//! position-level overlap resolution. Observations are small 8-bit grayscale
//! renders; the true [`SimState`] rides along in every [`Observation`] for
//! metrics and must not be consulted by agents.

pub mod env;
pub mod error;
pub mod examples;
pub mod geometry;
pub mod layout;
pub mod metrics;
pub mod render;

pub use env::{Action, Environment, Episode, Observation, SimState, TabletopEnv, ACTION_DIM};
pub use error::SimError;
pub use examples::{generate_relevant_examples, generate_relevant_set};
pub use geometry::Vec2;
pub use layout::{LayoutSpec, ObjectKind, ObjectState, Pose, RelevantSpec, Thresholds};
pub use metrics::{interaction_report, InteractionReport, ObjectInteraction};
pub use render::{render, Image};
