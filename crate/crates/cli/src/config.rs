//! Run configuration and cap layering.

use std::collections::BTreeMap;
use std::path::Path;

use clap::ValueEnum;
use kmed::num::Q;
use kmed::stable::StableCaps;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Greedy,
    LogAdaptive,
    Merge,
    Stable,
    Main,
}

impl Algorithm {
    pub fn needs_k(self) -> bool {
        matches!(self, Algorithm::Merge | Algorithm::Stable | Algorithm::Main)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Greedy => "greedy",
            Algorithm::LogAdaptive => "log-adaptive",
            Algorithm::Merge => "merge",
            Algorithm::Stable => "stable",
            Algorithm::Main => "main",
        }
    }
}

/// Everything that determines a run's result. Execution knobs that cannot change the
/// result (thread fan-out, timing, output path) are kept out of the serialized form so
/// reports stay byte-identical across them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub k: Option<usize>,
    #[serde(with = "kmed::num::serde_q_opt")]
    pub f: Option<Q>,
    #[serde(with = "kmed::num::serde_q")]
    pub epsilon: Q,
    pub seed: u64,
    pub caps: StableCaps,
    #[serde(skip)]
    pub parallel: bool,
    #[serde(skip)]
    pub timing: bool,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, epsilon: Q) -> Self {
        RunConfig {
            algorithm,
            k: None,
            f: None,
            epsilon,
            seed: 0,
            caps: StableCaps::default(),
            parallel: false,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.algorithm.needs_k() && self.k.is_none() {
            return Err(CliError::Usage(format!("--k is required for {}", self.algorithm.name())));
        }
        if !self.algorithm.needs_k() && self.f.is_none() {
            return Err(CliError::Usage(format!("--f is required for {}", self.algorithm.name())));
        }
        if self.k == Some(0) {
            return Err(CliError::Usage("--k must be positive".into()));
        }
        if self.f.as_ref().is_some_and(|f| f < &Q::default()) {
            return Err(CliError::Usage("--f must be non-negative".into()));
        }
        if self.epsilon <= Q::default() || self.epsilon >= Q::from_integer(1.into()) {
            return Err(CliError::Usage("--eps must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Prefix of the environment variables overriding single caps, e.g. `KMED_CAP_RESTARTS=3`.
pub const ENV_PREFIX: &str = "KMED_CAP_";

fn defaults() -> Map<String, Value> {
    match serde_json::to_value(StableCaps::default()) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("caps serialize to an object"),
    }
}

fn overlay(base: &mut Map<String, Value>, from: Map<String, Value>, origin: &str) -> Result<(), CliError> {
    for (key, v) in from {
        if !base.contains_key(&key) {
            return Err(CliError::Usage(format!("unknown cap `{key}` in {origin}")));
        }
        base.insert(key, v);
    }
    Ok(())
}

/// Cap values given as text are read as JSON when possible (`3`, `null`, `"strict"`),
/// otherwise as a bare string (`threshold`).
fn text_value(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string()))
}

/// Defaults, then environment, then the caps file, then `name=value` flags.
pub fn load_caps(
    env: &BTreeMap<String, String>,
    file: Option<&Path>,
    flags: &[(String, String)],
) -> Result<StableCaps, CliError> {
    let mut caps = defaults();
    let from_env = env
        .iter()
        .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|name| (name.to_lowercase(), text_value(v))))
        .collect();
    overlay(&mut caps, from_env, "the environment")?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        match serde_json::from_str(&text) {
            Ok(Value::Object(m)) => overlay(&mut caps, m, &path.display().to_string())?,
            Ok(_) => return Err(CliError::Usage(format!("{}: caps file must hold a JSON object", path.display()))),
            Err(e) => return Err(CliError::Usage(format!("{}: {e}", path.display()))),
        }
    }
    let from_flags = flags.iter().map(|(k, v)| (k.clone(), text_value(v))).collect();
    overlay(&mut caps, from_flags, "--cap")?;
    serde_json::from_value(Value::Object(caps)).map_err(|e| CliError::Usage(format!("bad cap value: {e}")))
}

pub fn parse_cap_flag(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}
