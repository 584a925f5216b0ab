//! Experiment configuration: one TOML file with a section per subsystem.
//! Every key is optional; missing keys take the built-in default, and CLI
//! flags override both.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ppo::env::{CodecConfig, EnvConfig, StreamConfig};
use crate::ppo::{PpoConfig, Scenario};
use crate::qoe::QoeWeights;
use crate::sim::{dbm_per_hz_to_watts, ChannelParams, GeometryConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub iterations: usize,
    pub workers: usize,
    pub episodes_per_worker: usize,
    pub eval_episodes: usize,
    /// Writes an intermediate checkpoint every this many iterations; 0
    /// keeps only the final one.
    pub checkpoint_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            iterations: 400,
            workers: 4,
            episodes_per_worker: 1,
            eval_episodes: 100,
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    pub env: EnvConfig,
    pub geometry: GeometryConfig,
    pub channel: ChannelParams,
    pub qoe: QoeWeights,
    pub codec: CodecConfig,
    pub stream: StreamConfig,
    pub ppo: PpoConfig,
}

/// Values given on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
    pub workers: Option<usize>,
    pub iterations: Option<usize>,
}

const NOISE_DBM_KEY: &str = "noise_psd_dbm";

impl ExperimentConfig {
    pub fn scenario(&self) -> Scenario {
        Scenario {
            env: self.env,
            geometry: self.geometry,
            channel: self.channel,
            qoe: self.qoe,
            codec: self.codec,
            stream: self.stream,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario().validate()?;
        self.ppo.validate()?;
        let r = &self.run;
        if r.iterations == 0 || r.workers == 0 || r.episodes_per_worker == 0 || r.eval_episodes == 0 {
            return Err(Error::InvalidParameter(
                "run: iterations, workers, episodes_per_worker and eval_episodes must be >= 1".into(),
            ));
        }
        if r.seed > i64::MAX as u64 {
            return Err(Error::InvalidParameter(format!("run: seed must be <= {}", i64::MAX)));
        }
        Ok(())
    }

    /// Parses TOML text. `channel.noise_psd_dbm` (dBm/Hz) is accepted in
    /// place of `channel.noise_psd` (W/Hz) and converted here.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::format("config", e.to_string()))?;
        if let Some(toml::Value::Table(channel)) = table.get_mut("channel") {
            if let Some(v) = channel.remove(NOISE_DBM_KEY) {
                if channel.contains_key("noise_psd") {
                    return Err(Error::format(
                        "config",
                        "channel.noise_psd and channel.noise_psd_dbm are mutually exclusive",
                    ));
                }
                let dbm = match v {
                    toml::Value::Float(f) => f,
                    toml::Value::Integer(i) => i as f64,
                    other => {
                        return Err(Error::format(
                            "config",
                            format!("channel.noise_psd_dbm must be a number, got {}", other.type_str()),
                        ))
                    }
                };
                channel.insert("noise_psd".into(), toml::Value::Float(dbm_per_hz_to_watts(dbm)));
            }
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| Error::format("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigRead {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Format { reason, .. } => Error::ConfigRead {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(e) = o.episodes {
            self.run.eval_episodes = e;
        }
        if let Some(w) = o.workers {
            self.run.workers = w;
        }
        if let Some(i) = o.iterations {
            self.run.iterations = i;
        }
    }

    /// Built-in defaults, then the file (if any), then CLI overrides.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }
}
