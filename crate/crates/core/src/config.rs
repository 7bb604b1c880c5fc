//! Serializable description of one exploration run.

use std::path::Path;

use bee_sim::LayoutSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::SmmConfig;
use crate::error::{CoreError, Result};
use crate::planner::PlanConfig;
use crate::relevance::{RelevanceConfig, RewardMode};
use crate::world_model::{TrainingConfig, WorldModelConfig};

/// Named tabletop layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Blocks,
    Door,
    Drawer,
}

/// Either a named preset or a fully spelled-out layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayoutChoice {
    Preset(Preset),
    Custom(LayoutSpec),
}

impl Default for LayoutChoice {
    fn default() -> Self {
        Self::Preset(Preset::Blocks)
    }
}

impl LayoutChoice {
    pub fn resolve(&self) -> LayoutSpec {
        match self {
            Self::Preset(Preset::Blocks) => LayoutSpec::blocks(),
            Self::Preset(Preset::Door) => LayoutSpec::door(2),
            Self::Preset(Preset::Drawer) => LayoutSpec::drawer(),
            Self::Custom(spec) => spec.clone(),
        }
    }
}

/// Which reward drives the planner after warmup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Bee,
    Disagreement,
    Smm,
    Random,
}

impl std::str::FromStr for Method {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bee" => Ok(Self::Bee),
            "disagreement" => Ok(Self::Disagreement),
            "smm" => Ok(Self::Smm),
            "random" => Ok(Self::Random),
            other => Err(CoreError::Config(format!("unknown method `{other}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Bee => "bee",
            Self::Disagreement => "disagreement",
            Self::Smm => "smm",
            Self::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub layout: LayoutChoice,
    pub method: Method,
    pub reward_mode: RewardMode,
    pub world_model: WorldModelConfig,
    pub training: TrainingConfig,
    pub relevance: RelevanceConfig,
    pub smm: SmmConfig,
    pub disagreement_heads: usize,
    pub plan: PlanConfig,
    /// Number of relevant example images.
    pub examples: usize,
    pub episodes: usize,
    /// Episodes collected with random actions before planning starts.
    pub warmup_episodes: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            layout: LayoutChoice::default(),
            method: Method::default(),
            reward_mode: RewardMode::default(),
            world_model: WorldModelConfig::default(),
            training: TrainingConfig::default(),
            relevance: RelevanceConfig::default(),
            smm: SmmConfig::default(),
            disagreement_heads: 5,
            plan: PlanConfig::explore(),
            examples: 100,
            episodes: 500,
            warmup_episodes: 20,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form. Field order is fixed by the struct,
    /// so equal configs hash equally.
    pub fn hash(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).into()
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash())
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(CoreError::Config(m));
        let layout = self.layout.resolve();
        layout.validate()?;
        self.plan.validate()?;
        self.training.schedule.validate()?;
        if self.world_model.image_side != layout.image_size {
            return err(format!(
                "world model expects {0}x{0} images but the layout renders {1}x{1}",
                self.world_model.image_side, layout.image_size
            ));
        }
        if self.world_model.action_dim != bee_sim::ACTION_DIM {
            return err(format!("action_dim must be {}", bee_sim::ACTION_DIM));
        }
        if self.episodes == 0 {
            return err("episodes must be positive".into());
        }
        if self.method != Method::Random && !layout.horizon.is_multiple_of(self.plan.horizon) {
            return err(format!(
                "episode horizon {} is not a multiple of the planning horizon {}",
                layout.horizon, self.plan.horizon
            ));
        }
        if self.method == Method::Bee && (self.relevance.members == 0 || self.examples == 0) {
            return err("bee needs at least one discriminator and one relevant example".into());
        }
        if self.method == Method::Smm && self.examples == 0 {
            return err("smm needs at least one relevant example".into());
        }
        if self.method == Method::Disagreement && self.disagreement_heads < 2 {
            return err("disagreement needs at least two heads".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_preserves_hash() {
        let mut c = ExperimentConfig::default();
        c.method = Method::Disagreement;
        c.layout = LayoutChoice::Custom(LayoutSpec::door(3));
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn hash_changes_with_seed() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { seed: 1, ..a.clone() };
        assert_ne!(a.hash_hex(), b.hash_hex());
        assert_eq!(a.hash_hex().len(), 64);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = ExperimentConfig::from_json(r#"{"layout": "drawer", "method": "random", "episodes": 7}"#).unwrap();
        assert_eq!(c.layout, LayoutChoice::Preset(Preset::Drawer));
        assert_eq!(c.method, Method::Random);
        assert_eq!(c.episodes, 7);
        assert_eq!(c.examples, 100);
        c.validate().unwrap();
    }

    #[test]
    fn mismatched_horizon_is_rejected() {
        let mut c = ExperimentConfig::default();
        c.plan.horizon = 7;
        assert!(c.validate().is_err());
        c.method = Method::Random;
        c.validate().unwrap();
    }
}
