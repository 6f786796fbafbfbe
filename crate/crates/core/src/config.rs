//! Declarative experiment files (TOML).
//!
//! ```toml
//! spec = "reach_gl(5, 0); reach_gl(0, 0)"
//! horizon = 200
//!
//! [env]
//! dim = 2
//! agents = 2
//!
//! [train]
//! iterations = 40
//! seed = 1
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::NavConfig;
use crate::error::{Error, Result};
use crate::spec_lang::{parse, Spec};
use crate::trainer::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Inline specification text; exclusive with `spec_file`.
    #[serde(default)]
    pub spec: Option<String>,
    /// Path to a specification file, relative to the config file.
    #[serde(default)]
    pub spec_file: Option<PathBuf>,
    pub horizon: usize,
    pub env: NavConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let (Some(f), Some(dir)) = (&cfg.spec_file, path.parent()) {
            if f.is_relative() {
                cfg.spec_file = Some(dir.join(f));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.spec, &self.spec_file) {
            (Some(_), Some(_)) => return Err(Error::Config("give either spec or spec_file, not both".into())),
            (None, None) => return Err(Error::Config("missing key: spec or spec_file".into())),
            _ => {}
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        self.train.validate()
    }

    pub fn load_spec(&self) -> Result<Spec> {
        let text = match (&self.spec, &self.spec_file) {
            (Some(s), _) => s.clone(),
            (None, Some(f)) => std::fs::read_to_string(f)?,
            (None, None) => return Err(Error::Config("missing key: spec or spec_file".into())),
        };
        let spec = parse(&text)?;
        spec.check_dims(self.env.dim, Some(self.env.agents))?;
        Ok(spec)
    }
}
