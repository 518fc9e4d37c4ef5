use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use evasion_core::harness::task::TaskConfig;
use evasion_core::learner::TrainConfig;
use evasion_core::missile::GuidanceLaw;

/// Invalid flags, config files or missing inputs. Maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// `desk`, `full` or a grid TOML path.
    pub grid: String,
    pub paired: bool,
    pub seed: u64,
    pub law: Option<GuidanceLaw>,
    /// Scenarios per study condition.
    pub scenarios: usize,
    pub jobs: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            grid: "desk".into(),
            paired: true,
            seed: 0,
            law: None,
            scenarios: 200,
            jobs: None,
        }
    }
}

/// Everything a run needs; read from one TOML file, then overridden by flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub task: TaskConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.train.validate().map_err(|e| config_error(e.to_string()))?;
        self.task.validate().map_err(|e| config_error(e.to_string()))?;
        if self.eval.scenarios == 0 {
            return Err(config_error("eval.scenarios must be positive"));
        }
        Ok(())
    }

    /// Writes the resolved configuration next to the run's outputs.
    pub fn echo(&self, out: &Path) -> anyhow::Result<()> {
        let text = toml::to_string_pretty(self).context("serializing resolved config")?;
        let path = out.join("config.toml");
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = RunConfig::default();
        c.train.episodes = 12;
        c.task.decision_interval = 4;
        c.eval.law = Some(GuidanceLaw::Apn);
        c.echo(dir.path()).unwrap();
        assert_eq!(RunConfig::load(Some(&dir.path().join("config.toml"))).unwrap(), c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[train]\nepisodes = 5\n").unwrap();
        let c = RunConfig::load(Some(&path)).unwrap();
        assert_eq!(c.train.episodes, 5);
        assert_eq!(c.train.gamma, 0.99);
    }
}
