use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Actor, Critic, NetworkConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "stnav-agent";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Actor and critic parameters with their configuration. Every layer carries
/// its own `in_dim`/`out_dim` header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub format: String,
    pub version: u32,
    pub config: NetworkConfig,
    pub actor: Actor,
    pub critic: Critic,
}

impl AgentCheckpoint {
    pub fn new(actor: Actor, critic: Critic) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: actor.config.clone(),
            actor,
            critic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Load(format!("not an agent checkpoint (format '{}')", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Load(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        if self.actor.config != self.config || self.critic.config != self.config {
            return Err(Error::Load("actor/critic configuration differs from the checkpoint header".into()));
        }
        self.actor.validate().map_err(|e| Error::Load(format!("actor: {e}")))?;
        self.critic.validate().map_err(|e| Error::Load(format!("critic: {e}")))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Self = serde_json::from_str(text).map_err(|e| Error::Load(format!("checkpoint parse: {e}")))?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_json()?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Load(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Ablation, ParamSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agent(ablation: Ablation) -> AgentCheckpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let config = NetworkConfig::reduced(ablation);
        AgentCheckpoint::new(Actor::init(config.clone(), &mut rng), Critic::init(config, &mut rng))
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        for a in Ablation::ALL {
            let ck = agent(a);
            let back = AgentCheckpoint::from_json(&ck.to_json().unwrap()).unwrap();
            let bits = |c: &AgentCheckpoint| -> Vec<u64> {
                c.actor.flatten().into_iter().chain(c.critic.flatten()).map(f64::to_bits).collect()
            };
            assert_eq!(bits(&ck), bits(&back));
        }
    }

    #[test]
    fn mismatched_shapes_fail_to_load() {
        let mut ck = agent(Ablation::None);
        ck.config.ablation = Ablation::A1;
        ck.actor.config.ablation = Ablation::A1;
        ck.critic.config.ablation = Ablation::A1;
        let err = AgentCheckpoint::from_json(&ck.to_json().unwrap()).unwrap_err();
        assert!(matches!(err, Error::Load(_)));
    }

    #[test]
    fn garbage_is_load_error() {
        assert!(matches!(AgentCheckpoint::from_json("{"), Err(Error::Load(_))));
    }
}
