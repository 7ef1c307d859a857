//! Backend selection shared by the subcommands.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use planner_core::{BackendConfig, BackendKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Rule,
    Remote,
}

/// Precedence: flags, then `PLANNER_*` variables, then the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct BackendArgs {
    /// Planner backend.
    #[arg(long, value_enum)]
    pub backend: Option<KindArg>,
    /// TOML file with a backend section (kind, endpoint, model, timeout, ...).
    #[arg(long)]
    pub backend_config: Option<PathBuf>,
    /// Chat-completions URL for the remote backend.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
}

impl BackendArgs {
    pub fn resolve(&self) -> anyhow::Result<BackendConfig> {
        self.resolve_with_env(std::env::vars())
    }

    pub fn resolve_with_env<I>(&self, env: I) -> anyhow::Result<BackendConfig>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut config = match &self.backend_config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                BackendConfig::from_toml(&text)?
            }
            None => BackendConfig::default(),
        };
        config = config.with_env(env)?;
        if let Some(kind) = self.backend {
            config.kind = match kind {
                KindArg::Rule => BackendKind::Rule,
                KindArg::Remote => BackendKind::Remote,
            };
        }
        if let Some(e) = &self.endpoint {
            config.endpoint = Some(e.clone());
        }
        if let Some(m) = &self.model {
            config.model = Some(m.clone());
        }
        if let Some(t) = self.timeout {
            config.timeout = t;
        }
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_environment() {
        let args = BackendArgs {
            backend: Some(KindArg::Remote),
            endpoint: Some("http://127.0.0.1:9/v1/chat/completions".into()),
            ..BackendArgs::default()
        };
        let env = vec![("PLANNER_TIMEOUT".to_string(), "3".to_string())];
        let cfg = args.resolve_with_env(env).unwrap();
        assert_eq!(cfg.kind, BackendKind::Remote);
        assert_eq!(cfg.timeout, 3.0);
    }

    #[test]
    fn remote_without_endpoint_is_rejected() {
        let args = BackendArgs {
            backend: Some(KindArg::Remote),
            ..BackendArgs::default()
        };
        assert!(args.resolve_with_env(Vec::new()).is_err());
    }
}
