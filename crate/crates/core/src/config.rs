//! TOML experiment files.
//!
//! ```toml
//! seed = 7
//! trials = 50
//! horizons = [1000, 10000, 100000]
//! output = "out/gini2"
//!
//! [distortion]
//! family = "gini"
//!
//! [instance]
//! arms = [{ kind = "bernoulli", p = 0.2 }, { kind = "bernoulli", p = 0.8 }]
//!
//! [[policies]]
//! algorithm = "ce_ucb"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distortion::Distortion;
use crate::envs::{ArmModel, BanditInstance};
use crate::error::{config, Error, Result};
use crate::policies::PolicyConfig;

fn default_inter_es() -> f64 {
    0.5
}

/// A builtin distortion by name and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistortionSpec {
    Mean,
    DualPower {
        s: f64,
    },
    Quadratic {
        s: f64,
    },
    Cvar {
        c: f64,
    },
    Pht {
        s: f64,
    },
    MeanMedian,
    InterEs {
        #[serde(default = "default_inter_es")]
        c: f64,
    },
    WangRtd,
    Gini,
    InvertedS {
        beta: f64,
    },
}

impl DistortionSpec {
    pub fn build(&self) -> Result<Distortion> {
        Ok(match *self {
            DistortionSpec::Mean => Distortion::mean(),
            DistortionSpec::DualPower { s } => Distortion::dual_power(s)?,
            DistortionSpec::Quadratic { s } => Distortion::quadratic(s)?,
            DistortionSpec::Cvar { c } => Distortion::cvar(c)?,
            DistortionSpec::Pht { s } => Distortion::pht(s)?,
            DistortionSpec::MeanMedian => Distortion::mean_median(),
            DistortionSpec::InterEs { c } => Distortion::inter_es(c)?,
            DistortionSpec::WangRtd => Distortion::wang_rtd(),
            DistortionSpec::Gini => Distortion::gini(),
            DistortionSpec::InvertedS { beta } => Distortion::inverted_s(beta)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub arms: Vec<ArmModel>,
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub horizons: Vec<u64>,
    /// Output path stem; `.csv` and `.json` are appended.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Keep the per-round `(t, arm, reward)` record in traces.
    #[serde(default)]
    pub record_rounds: bool,
    pub distortion: DistortionSpec,
    pub instance: InstanceSpec,
    #[serde(default)]
    pub policies: Vec<PolicyConfig>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| config(e.to_string().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
        Ok((Self::parse(&text)?, text))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(config("trials must be at least 1"));
        }
        if self.horizons.is_empty() {
            return Err(config("horizons must not be empty"));
        }
        if self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config("horizons must be strictly increasing"));
        }
        if self.horizons[0] < 2 {
            return Err(config("horizons must be at least 2"));
        }
        for p in &self.policies {
            p.validate()?;
        }
        self.build_instance()?;
        self.build_distortion()?;
        Ok(())
    }

    pub fn build_instance(&self) -> Result<BanditInstance> {
        BanditInstance::new(self.instance.arms.clone()).map_err(|e| match e {
            Error::Domain(m) => config(format!("instance.arms: {m}")),
            other => other,
        })
    }

    pub fn build_distortion(&self) -> Result<Distortion> {
        self.distortion.build().map_err(|e| match e {
            Error::Domain(m) => config(format!("distortion: {m}")),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Git-style blob hash: SHA-256 of `"blob <len>\0" + bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}
