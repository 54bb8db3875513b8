//! Run configuration, stored as TOML.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::AgentPolicy;
use crate::env::{
    load_price_series, ArmSpec, CostModel, Environment, PriceSeries, SYNTHETIC_PRICES,
};
use crate::error::{Error, Result};
use crate::mechanism::theorem2_step_size;

/// Per-agent utilization shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhiSpec {
    Explicit(Vec<f64>),
    /// `φ_n = min(α / N, 1)` for every agent.
    Homogeneous {
        homogeneous: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StepSize {
    /// The horizon-tuned step size of the regret guarantee.
    #[default]
    Theorem2,
    Explicit(f64),
}

/// Settings for estimating `S*` when costs are continuous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSettings {
    pub samples: usize,
    pub iterations: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            samples: 2000,
            iterations: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: u64,
    #[serde(rename = "R")]
    pub r: usize,
    pub seed: u64,
    pub phi: PhiSpec,
    #[serde(default)]
    pub eta: StepSize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub arms: Vec<ArmSpec>,
    pub cost_model: CostModel,
    /// Empty means every agent is truthful.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agent_policies: Vec<AgentPolicy>,
    #[serde(default)]
    pub oracle: OracleSettings,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Reads and validates a config file. A relative price-series path is
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::from_toml_str(&text)?;
        if let CostModel::EdgeComputing { price_series, .. } = &mut config.cost_model {
            if price_series != SYNTHETIC_PRICES && Path::new(price_series).is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                *price_series = base.join(&*price_series).to_string_lossy().into_owned();
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k == 0 || self.n == 0 || self.t == 0 || self.r == 0 {
            return bad(format!(
                "K, N, T, R must all be at least 1 (got {}, {}, {}, {})",
                self.k, self.n, self.t, self.r
            ));
        }
        if self.arms.len() != self.k {
            return bad(format!(
                "{} arms listed for K = {}",
                self.arms.len(),
                self.k
            ));
        }
        for arm in &self.arms {
            arm.validate()?;
        }
        self.cost_model.validate()?;
        match &self.phi {
            PhiSpec::Explicit(phi) => {
                if phi.len() != self.n {
                    return bad(format!("{} shares listed for N = {}", phi.len(), self.n));
                }
                if let Some(p) = phi.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return bad(format!("share {p} outside [0, 1]"));
                }
            }
            PhiSpec::Homogeneous { homogeneous } => {
                if !(homogeneous.is_finite() && *homogeneous >= 0.0) {
                    return bad(format!("homogeneous alpha {homogeneous} must be >= 0"));
                }
            }
        }
        if !self.agent_policies.is_empty() && self.agent_policies.len() != self.n {
            return bad(format!(
                "{} agent policies for N = {}",
                self.agent_policies.len(),
                self.n
            ));
        }
        match self.eta {
            StepSize::Explicit(eta) if !(eta.is_finite() && eta > 0.0) => {
                return bad(format!("explicit step size {eta} must be positive"));
            }
            StepSize::Theorem2 => {
                theorem2_step_size::<f64>(self.k, self.t, &self.phi())?;
            }
            _ => {}
        }
        if self.oracle.samples == 0 || self.oracle.iterations == 0 {
            return bad("oracle samples and iterations must be positive".into());
        }
        Ok(())
    }

    pub fn phi(&self) -> Vec<f64> {
        match &self.phi {
            PhiSpec::Explicit(phi) => phi.clone(),
            PhiSpec::Homogeneous { homogeneous } => {
                vec![(homogeneous / self.n as f64).min(1.0); self.n]
            }
        }
    }

    pub fn step_size(&self) -> Result<f64> {
        match self.eta {
            StepSize::Explicit(eta) => Ok(eta),
            StepSize::Theorem2 => theorem2_step_size(self.k, self.t, &self.phi()),
        }
    }

    pub fn policies(&self) -> Vec<AgentPolicy> {
        if self.agent_policies.is_empty() {
            vec![AgentPolicy::Truthful; self.n]
        } else {
            self.agent_policies.clone()
        }
    }

    pub fn mean_rewards(&self) -> Vec<f64> {
        self.arms.iter().map(ArmSpec::mean_reward).collect()
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }

    pub fn price_series(&self) -> Result<Option<PriceSeries>> {
        match &self.cost_model {
            CostModel::EdgeComputing { price_series, .. } if price_series != SYNTHETIC_PRICES => {
                let file = File::open(price_series)
                    .map_err(|_| Error::MissingArtifact(PathBuf::from(price_series)))?;
                Ok(Some(load_price_series(file)?))
            }
            _ => Ok(None),
        }
    }

    /// Environment of run `run`.
    pub fn environment(&self, run: usize) -> Result<Environment> {
        Environment::new(
            self.arms.clone(),
            &self.cost_model,
            self.n,
            self.run_seed(run),
            self.price_series()?,
        )
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(
            self.to_toml_string()?.as_bytes(),
        )))
    }
}
