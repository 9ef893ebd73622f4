//! Versioned JSON parameter checkpoints.
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so a write/read cycle reproduces every parameter bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DomainSchema, ModelParameters};
use crate::oracle::RankingMethod;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub schema: DomainSchema,
    pub seed: u64,
    /// Domain the parameters were fine-tuned on; `None` after pre-training only.
    pub domain: Option<String>,
    pub ranking_method: Option<RankingMethod>,
    pub parameters: ModelParameters,
}

impl Checkpoint {
    pub fn new(
        schema: DomainSchema,
        parameters: ModelParameters,
        seed: u64,
        domain: Option<String>,
        ranking_method: Option<RankingMethod>,
    ) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            schema,
            seed,
            domain,
            ranking_method,
            parameters,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        ckpt.parameters.check_shapes(&ckpt.schema)?;
        if !ckpt.parameters.is_finite() {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text)
    }
}
