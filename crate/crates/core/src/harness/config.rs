//! Run configuration documents and output manifests.

use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scaling::{ExperimentMode, ExperimentSpec};
use crate::system_model::{normalized_alpha, SystemConfig};

/// Optional `experiment` section of a config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub mode: ExperimentMode,
    /// Normalized overhead; derived from the system section when absent.
    #[serde(default)]
    pub alpha: Option<f64>,
    pub k_grid: Vec<u64>,
    pub trials: usize,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub include_qstar_in_predictor: bool,
}

/// A parsed config document: the system keys at top level plus an optional
/// `experiment` section.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub experiment: Option<ExperimentSection>,
}

/// Command-line overrides applied on top of a config document.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub trials: Option<usize>,
}

fn keyed_error(prefix: &str, err: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = err.path().to_string();
    let key = match (prefix.is_empty(), path.as_str()) {
        (true, p) => p.to_string(),
        (false, ".") => prefix.to_string(),
        (false, p) => format!("{prefix}.{p}"),
    };
    let inner = err.into_inner();
    if key == "." {
        Error::Config(inner.to_string())
    } else {
        Error::Config(format!("at `{key}`: {inner}"))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed JSON: {e}")))?;
        let serde_json::Value::Object(mut map) = value else {
            return Err(Error::Config("config document must be a JSON object".into()));
        };
        let experiment = match map.remove("experiment") {
            None | Some(serde_json::Value::Null) => None,
            Some(v) => Some(serde_path_to_error::deserialize(v).map_err(|e| keyed_error("experiment", e))?),
        };
        let system =
            serde_path_to_error::deserialize(serde_json::Value::Object(map)).map_err(|e| keyed_error("", e))?;
        Ok(RunConfig { system, experiment })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// `--alpha`, else the experiment's `alpha`, else the value derived from
    /// the physical parameters.
    pub fn resolved_alpha(&self, overrides: &Overrides) -> Result<f64> {
        let alpha = overrides
            .alpha
            .or(self.experiment.as_ref().and_then(|e| e.alpha))
            .unwrap_or_else(|| normalized_alpha(&self.system));
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!(
                "`alpha` must be nonnegative and finite, got {alpha}"
            )));
        }
        Ok(alpha)
    }

    /// The experiment to run, with overrides applied. Antenna counts come from
    /// the system section; the master seed defaults to 0.
    pub fn experiment_spec(&self, overrides: &Overrides) -> Result<ExperimentSpec> {
        let section = self
            .experiment
            .as_ref()
            .ok_or_else(|| Error::Config("missing `experiment` section".into()))?;
        let spec = ExperimentSpec {
            mode: section.mode,
            alpha: self.resolved_alpha(overrides)?,
            tx_antennas: self.system.tx_antennas,
            rx_antennas: self.system.rx_antennas,
            k_grid: section.k_grid.clone(),
            trials: overrides.trials.unwrap_or(section.trials),
            master_seed: overrides.seed.or(section.master_seed).unwrap_or(0),
            include_qstar_in_predictor: section.include_qstar_in_predictor,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Hex SHA-256 of the JSON serialization of `resolved`. Typed values
/// serialize with a fixed field order, so the digest does not depend on the
/// key order of the input document.
pub fn config_digest<T: Serialize>(resolved: &T) -> String {
    let bytes = serde_json::to_vec(resolved).expect("config values serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// Provenance record written next to every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub master_seed: u64,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
}

/// Current time, or `SOURCE_DATE_EPOCH` when set, as RFC 3339 seconds.
pub fn timestamp() -> String {
    let t = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<u64>().ok())
        .map(|secs| UNIX_EPOCH + Duration::from_secs(secs))
        .unwrap_or_else(SystemTime::now);
    humantime::format_rfc3339_seconds(t).to_string()
}

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
