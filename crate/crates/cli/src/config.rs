use std::path::{Path, PathBuf};

use serde::Deserialize;
use storeplace::demand::CorrelationParams;
use storeplace::eval::PipelineParams;
use storeplace::ingest::synth::CityConfig;
use storeplace::learners::ModelSpec;
use storeplace_service::DEFAULT_PORT;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    LeaveBrandOut,
    Split,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub protocol: ProtocolKind,
    /// Brand under test; defaults to the run target.
    pub brand: Option<String>,
    pub test_fraction: f64,
    pub repeats: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            protocol: ProtocolKind::LeaveBrandOut,
            brand: None,
            test_fraction: 0.2,
            repeats: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    pub job_after_s: f64,
    pub cors_origins: Vec<String>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            job_after_s: 2.0,
            cors_origins: Vec::new(),
        }
    }
}

/// Everything one invocation needs. Relative paths resolve against the
/// config file's directory.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding queries.jsonl, pois.csv, wifi.jsonl and aliases.json.
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    /// Brand or category name.
    pub target: Option<String>,
    pub seed: u64,
    pub threads: Option<usize>,
    /// Cutoff of the ranking metrics.
    pub k: usize,
    pub model: ModelSpec,
    /// Fitted model to rank with instead of training.
    pub model_file: Option<PathBuf>,
    pub params: PipelineParams,
    pub eval: EvalConfig,
    pub correlation: CorrelationParams,
    pub heatmap_cell_m: f64,
    pub serve: ServeConfig,
    pub city: CityConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            out: PathBuf::from("out"),
            target: None,
            seed: 0,
            threads: None,
            k: 10,
            model: ModelSpec::default(),
            model_file: None,
            params: PipelineParams::default(),
            eval: EvalConfig::default(),
            correlation: CorrelationParams::default(),
            heatmap_cell_m: 500.0,
            serve: ServeConfig::default(),
            city: CityConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let err = |msg: String| CliError::Config {
            path: path.to_path_buf(),
            msg,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut cfg = Self::parse(&text).map_err(|e| err(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.data = cfg.data.map(|p| base.join(p));
        cfg.model_file = cfg.model_file.map(|p| base.join(p));
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    pub fn data_dir(&self) -> Result<&Path, CliError> {
        self.data
            .as_deref()
            .ok_or_else(|| CliError::Usage("no data directory; pass --data or set `data` in the config".into()))
    }

    pub fn target_name(&self) -> Result<&str, CliError> {
        self.target
            .as_deref()
            .ok_or_else(|| CliError::Usage("no target; pass --target or set `target` in the config".into()))
    }

    /// Reject parameter values before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params.demand.exclusion.validate()?;
        self.model.validate()?;
        if self.k == 0 {
            return Err(CliError::Usage("k must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Usage("threads must be positive".into()));
        }
        if !(self.serve.job_after_s >= 0.0 && self.serve.job_after_s.is_finite()) {
            return Err(CliError::Usage(format!(
                "invalid serve.job_after_s {}",
                self.serve.job_after_s
            )));
        }
        Ok(())
    }
}
