use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::{AnyEnv, EnvSpec, Environment};
use crate::error::{Error, Result};
use crate::macros::{MacroKind, MacroPolicyConfig};
use crate::qlearn::{AgentConfig, Backend};

/// Environment variable that overrides `experiment.output_dir`.
pub const OUTPUT_DIR_ENV: &str = "MACROQ_OUTPUT_DIR";

pub const DEFAULT_TRIALS: usize = 10;
pub const DEFAULT_GAP_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    #[serde(default = "d_trials")]
    pub trials: usize,
    /// Defaults to `runs/<name>`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; defaults to the machine's parallelism.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "d_backend")]
    pub backend: Backend,
    /// Decisions before each reward event kept for the gap table.
    #[serde(default = "d_gap_window")]
    pub gap_window: usize,
}

fn d_trials() -> usize {
    DEFAULT_TRIALS
}
fn d_backend() -> Backend {
    Backend::Tabular
}
fn d_gap_window() -> usize {
    DEFAULT_GAP_WINDOW
}

/// A full run description. Trial `i` uses seed `agent.seed + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub env: EnvSpec,
    pub agent: AgentConfig,
    #[serde(default)]
    pub macros: MacroPolicyConfig,
}

impl ExperimentConfig {
    /// Parses and validates; errors name the offending field.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            match e.span() {
                Some(span) => {
                    let (line, column) = line_column(text, span.start);
                    Error::Config(format!("{message} (line {line}, column {column})"))
                }
                None => Error::Config(message),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Returns the parsed config together with the verbatim file contents.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, String)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Ok((Self::from_toml_str(&text)?, text))
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.name.trim().is_empty() {
            return Err(Error::Config("experiment.name: must not be empty".into()));
        }
        if e.trials == 0 {
            return Err(Error::Config("experiment.trials: must be at least 1".into()));
        }
        if e.workers == Some(0) {
            return Err(Error::Config("experiment.workers: must be at least 1".into()));
        }
        if e.gap_window == 0 {
            return Err(Error::Config("experiment.gap_window: must be at least 1".into()));
        }
        self.agent.validate()?;
        let env = self.build_env()?;
        if self.macros.kind != MacroKind::None {
            self.macros.validate(env.action_count())?;
        }
        Ok(())
    }

    pub fn build_env(&self) -> Result<AnyEnv> {
        self.env
            .build()
            .map_err(|err| Error::Config(format!("env: {err}")))
    }

    /// Output directory after applying the environment override.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            return PathBuf::from(dir);
        }
        self.experiment
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&self.experiment.name))
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.agent.seed.wrapping_add(trial as u64)
    }

    pub fn step_budget(&self) -> usize {
        self.agent.total_steps()
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}
