//! Pluggable planners: map a session record to raw planner text.

mod mutate;
mod remote;
mod rule;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::SessionRecord;

pub use mutate::MutationBackend;
pub use remote::{ChatMessage, ChatRequest, ChatResponse, RemoteChat};
pub use rule::{family_plan, OracleLexicon, RuleOracle, TaskFamily};

/// System preamble sent ahead of every remote request.
pub const PREAMBLE: &str = include_str!("../../data/preamble.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendReply {
    pub text: String,
    /// Seconds spent producing the reply.
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend timed out after {0:.1} s")]
    Timeout(f64),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}

/// A planner φ. Implementations must not mutate anything the record refers to.
pub trait PlanBackend: Send + Sync {
    fn name(&self) -> &str;

    fn plan(&self, record: &SessionRecord) -> Result<BackendReply, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Rule,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("remote backend requires an endpoint")]
    MissingEndpoint,
    #[error("timeout must be positive")]
    BadTimeout,
    #[error("invalid backend config: {0}")]
    Parse(String),
    #[error("environment variable {name}: {reason}")]
    Env { name: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Seconds.
    pub timeout: f64,
    pub max_output_tokens: u32,
    /// Name of the environment variable holding a bearer token.
    pub api_key_env: Option<String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Rule,
            endpoint: None,
            model: None,
            timeout: 30.0,
            max_output_tokens: 256,
            api_key_env: None,
        }
    }
}

pub const ENV_KIND: &str = "PLANNER_BACKEND";
pub const ENV_ENDPOINT: &str = "PLANNER_ENDPOINT";
pub const ENV_MODEL: &str = "PLANNER_MODEL";
pub const ENV_TIMEOUT: &str = "PLANNER_TIMEOUT";

impl BackendConfig {
    pub fn rule() -> Self {
        Self::default()
    }

    pub fn remote(endpoint: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::Remote,
            endpoint: Some(endpoint.into()),
            ..Self::default()
        }
    }

    /// Parse only; call `validate` once overrides are applied.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(ConfigError::BadTimeout);
        }
        if self.kind == BackendKind::Remote && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(ConfigError::MissingEndpoint);
        }
        Ok(())
    }

    /// Apply `PLANNER_*` overrides from the given variables.
    pub fn with_env<I, K, V>(mut self, vars: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        for (k, v) in vars {
            let v: String = v.into();
            match k.as_ref() {
                ENV_KIND => {
                    self.kind = match v.as_str() {
                        "rule" => BackendKind::Rule,
                        "remote" => BackendKind::Remote,
                        _ => {
                            return Err(ConfigError::Env {
                                name: ENV_KIND.into(),
                                reason: format!("expected rule or remote, got `{v}`"),
                            })
                        }
                    }
                }
                ENV_ENDPOINT => self.endpoint = Some(v),
                ENV_MODEL => self.model = Some(v),
                ENV_TIMEOUT => {
                    self.timeout = v.parse().map_err(|_| ConfigError::Env {
                        name: ENV_TIMEOUT.into(),
                        reason: format!("`{v}` is not a number of seconds"),
                    })?
                }
                _ => {}
            }
        }
        self.validate()?;
        Ok(self)
    }

    /// Apply overrides from the process environment.
    pub fn with_process_env(self) -> Result<Self, ConfigError> {
        self.with_env(std::env::vars())
    }

    pub fn timeout_duration(&self) -> Duration {
        Duration::from_secs_f64(self.timeout)
    }
}

/// Instantiate the configured backend. The lexicon feeds the rule oracle.
pub fn build_backend(config: &BackendConfig, lexicon: &OracleLexicon) -> Result<Box<dyn PlanBackend>, ConfigError> {
    config.validate()?;
    Ok(match config.kind {
        BackendKind::Rule => Box::new(RuleOracle::new(lexicon.clone())),
        BackendKind::Remote => Box::new(RemoteChat::new(config.clone())?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remote_requires_endpoint() {
        let cfg = BackendConfig {
            kind: BackendKind::Remote,
            ..BackendConfig::default()
        };
        assert_eq!(cfg.validate(), Err(ConfigError::MissingEndpoint));
    }

    #[test]
    fn env_overrides_file() {
        let cfg = BackendConfig::from_toml("kind = \"rule\"\ntimeout = 5.0\n").unwrap();
        let cfg = cfg
            .with_env([
                (ENV_KIND, "remote"),
                (ENV_ENDPOINT, "http://127.0.0.1:9/v1/chat/completions"),
                (ENV_TIMEOUT, "2.5"),
                ("UNRELATED", "x"),
            ])
            .unwrap();
        assert_eq!(cfg.kind, BackendKind::Remote);
        assert_eq!(cfg.timeout, 2.5);
        assert!(BackendConfig::default().with_env([(ENV_TIMEOUT, "soon")]).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(BackendConfig::from_toml("kind = \"rule\"\nspeed = 3\n").is_err());
    }

    #[test]
    fn preamble_states_grammar() {
        assert!(PREAMBLE.contains("PLAN:"));
        assert!(PREAMBLE.contains("FAILURE(kind)"));
    }
}
