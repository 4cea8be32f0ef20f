//! Run configuration: built-in defaults, overridden by an optional TOML file,
//! overridden by command-line flags.

use std::path::Path;

use omrf_core::data::{SplitRatios, SynthSpec};
use omrf_core::train::{ModelConfig, TrainConfig};
use omrf_core::{Encoding, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub encoding: Encoding,
    pub split: SplitRatios,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            encoding: Encoding::Semantic,
            split: SplitRatios::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            synth: SynthSpec::default(),
        }
    }
}

/// Flag values that override the file; `None` leaves the file/default value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub encoding: Option<Encoding>,
    pub split: Option<SplitRatios>,
    pub augment: Option<bool>,
    pub iters: Option<u64>,
    pub batch: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    /// Defaults, then `file`, then `flags`.
    pub fn resolve(file: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(flags);
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(e) = o.encoding {
            self.encoding = e;
        }
        if let Some(s) = o.split {
            self.split = s;
        }
        if let Some(a) = o.augment {
            self.train.augment = a;
        }
        if let Some(i) = o.iters {
            self.train.max_iters = i;
        }
        if let Some(b) = o.batch {
            self.train.batch_size = b;
        }
        self.train.seed = self.seed;
    }
}

/// Parses `a,b,c` percentages that must sum to 100.
pub fn parse_split(s: &str) -> std::result::Result<SplitRatios, String> {
    let parts: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts.as_slice() {
        [train, val, test] if train + val + test == 100 => Ok(SplitRatios {
            train: *train,
            val: *val,
        }),
        [_, _, _] => Err("split percentages must sum to 100".into()),
        _ => Err("expected three comma-separated percentages".into()),
    }
}
