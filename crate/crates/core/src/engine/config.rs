use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::frontend::{parse_files, FrontendError, SourceUnit};
use crate::producers::{InvariantText, ProviderConfig};
use crate::scheduler::EnergyParams;
use crate::vm::{GenesisError, GenesisSpec, InvariantCheck, Program, VmState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantDef {
    pub id: String,
    /// Human-readable statement substituted into the invariant prompt.
    pub text: String,
    /// Zero-argument function whose `assert`s encode the invariant, e.g.
    /// `Token.checkSupply()`.
    pub check: String,
}

/// Campaign definition as written in a TOML file. Relative paths are resolved
/// against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub sources: Vec<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Execution budget; the primary, reproducible limit.
    #[serde(default)]
    pub max_execs: Option<u64>,
    /// Budget on the virtual clock (see [`super::VirtualClock`]).
    #[serde(default)]
    pub time_budget_secs: Option<f64>,
    /// Soft wall-clock cap. Runs that hit it are not reproducible.
    #[serde(default)]
    pub wall_limit_secs: Option<f64>,
    #[serde(default)]
    pub stop_on_first_bug: bool,
    #[serde(default)]
    pub metrics_fixture: Option<PathBuf>,
    #[serde(default)]
    pub energy: EnergyParams,
    #[serde(default)]
    pub genesis: GenesisSpec,
    #[serde(default)]
    pub invariants: Vec<InvariantDef>,
    #[serde(default)]
    pub llm: ProviderConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{0}")]
    Frontend(#[from] FrontendError),
    #[error("{0}")]
    Genesis(#[from] GenesisError),
    #[error("invariant `{id}`: {message}")]
    Invariant { id: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl CampaignConfig {
    pub fn from_toml(text: &str, base: &Path, shown: &str) -> Result<CampaignConfig, ConfigError> {
        let mut cfg: CampaignConfig = toml::from_str(text).map_err(|e| ConfigError::Schema {
            path: shown.to_string(),
            message: e.to_string(),
        })?;
        for s in &mut cfg.sources {
            *s = base.join(&*s);
        }
        if let Some(m) = &mut cfg.metrics_fixture {
            *m = base.join(&*m);
        }
        if let Some(c) = &mut cfg.llm.cassette {
            *c = base.join(&*c).display().to_string();
        }
        cfg.validate().map_err(|message| ConfigError::Schema {
            path: shown.to_string(),
            message,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<CampaignConfig, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: shown.clone(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        CampaignConfig::from_toml(&text, base, &shown)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.sources.is_empty() {
            return Err("`sources` must list at least one file".into());
        }
        if self.max_execs.is_none() && self.time_budget_secs.is_none() {
            return Err("set `max_execs` or `time_budget_secs`".into());
        }
        if let Some(t) = self.time_budget_secs {
            if !(t >= 0.0) {
                return Err(format!("time_budget_secs must be >= 0, got {t}"));
            }
        }
        self.energy.validate()?;
        self.llm.validate()?;
        Ok(())
    }

    pub fn parse_sources(&self) -> Result<SourceUnit, ConfigError> {
        let mut files = Vec::new();
        for p in &self.sources {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            })?;
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string());
            files.push((name, text));
        }
        Ok(parse_files(&files)?)
    }

    pub fn invariant_texts(&self) -> Vec<InvariantText> {
        self.invariants
            .iter()
            .map(|i| InvariantText {
                id: i.id.clone(),
                text: i.text.clone(),
            })
            .collect()
    }
}

/// Everything a campaign needs that is derived from the config once.
#[derive(Debug, Clone)]
pub struct CampaignSetup {
    pub config: CampaignConfig,
    pub program: Program,
    pub genesis: VmState,
    pub invariants: Vec<InvariantCheck>,
}

impl CampaignSetup {
    pub fn new(config: CampaignConfig) -> Result<CampaignSetup, ConfigError> {
        let unit = config.parse_sources()?;
        CampaignSetup::from_unit(config, unit)
    }

    pub fn from_unit(config: CampaignConfig, unit: SourceUnit) -> Result<CampaignSetup, ConfigError> {
        let program = Program::new(unit);
        if program.public_functions().is_empty() {
            return Err(ConfigError::Invalid("no public functions to fuzz".into()));
        }
        let genesis = VmState::genesis(&program, &config.genesis)?;
        let mut invariants = Vec::new();
        for inv in &config.invariants {
            let err = |message: String| ConfigError::Invariant {
                id: inv.id.clone(),
                message,
            };
            let f = program
                .lookup_signature(&inv.check)
                .ok_or_else(|| err(format!("unknown checker `{}`", inv.check)))?;
            let (_, decl) = program.unit.function(f);
            if !decl.params.is_empty() {
                return Err(err(format!("checker `{}` must take no arguments", inv.check)));
            }
            invariants.push(InvariantCheck {
                id: inv.id.clone(),
                func: f,
            });
        }
        Ok(CampaignSetup {
            config,
            program,
            genesis,
            invariants,
        })
    }
}
