use std::io;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{BackendConfig, BackendError, BackendReply, ConfigError, PlanBackend, PREAMBLE};
use crate::protocol::{serialize_prompt, SessionRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Minimal chat-completion request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub messages: Vec<ChatMessage>,
    pub max_tokens: u32,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub choices: Vec<ChatChoice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatChoice {
    pub message: ChatMessage,
}

/// Blocking client for an OpenAI-style `/chat/completions` endpoint.
pub struct RemoteChat {
    config: BackendConfig,
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteChat {
    pub fn new(config: BackendConfig) -> Result<Self, ConfigError> {
        let endpoint = config.endpoint.clone().ok_or(ConfigError::MissingEndpoint)?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout_duration()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            endpoint,
            agent,
        })
    }

    pub fn request_body(&self, record: &SessionRecord) -> ChatRequest {
        ChatRequest {
            model: self.config.model.clone(),
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: PREAMBLE.to_string(),
                },
                ChatMessage {
                    role: "user".into(),
                    content: serialize_prompt(record),
                },
            ],
            max_tokens: self.config.max_output_tokens,
            temperature: 0.0,
        }
    }

    fn map_error(&self, e: ureq::Error) -> BackendError {
        match e {
            ureq::Error::Timeout(_) => BackendError::Timeout(self.config.timeout),
            ureq::Error::Io(ref io) if matches!(io.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) => {
                BackendError::Timeout(self.config.timeout)
            }
            other => BackendError::Unavailable(other.to_string()),
        }
    }
}

impl PlanBackend for RemoteChat {
    fn name(&self) -> &str {
        "remote"
    }

    fn plan(&self, record: &SessionRecord) -> Result<BackendReply, BackendError> {
        let started = Instant::now();
        let mut req = self.agent.post(&self.endpoint);
        if let Some(var) = &self.config.api_key_env {
            if let Ok(key) = std::env::var(var) {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
        }
        let mut resp = req
            .send_json(self.request_body(record))
            .map_err(|e| self.map_error(e))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(BackendError::Unavailable(format!("endpoint answered HTTP {}", status.as_u16())));
        }
        let body: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| match self.map_error(e) {
                BackendError::Unavailable(m) => BackendError::Unavailable(format!("malformed response: {m}")),
                t => t,
            })?;
        let text = body
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Unavailable("response has no choices".into()))?;
        Ok(BackendReply {
            text,
            latency: started.elapsed().as_secs_f64(),
        })
    }
}
