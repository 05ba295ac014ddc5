//! Controller back ends: an HTTP chat-completions client, a scripted
//! controller and a replaying mock.

use std::collections::{BTreeMap, VecDeque};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::scripted;
use crate::dsl::{OperatorSpec, ReasoningMode};
use crate::problem::Domain;
use crate::rng::SeedStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Diagnosis,
    Coding,
}

/// Structured context travelling with a request. It is not part of the
/// logged request; only the scripted back end reads it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RequestContext {
    pub domain: Option<Domain>,
    pub parents: Vec<OperatorSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub stage: Stage,
    /// `None` for population initialization.
    pub mode: Option<ReasoningMode>,
    pub attempt: usize,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(skip)]
    pub context: RequestContext,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BackendReply {
    pub text: String,
    #[serde(default)]
    pub usage: BTreeMap<String, u64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Response(String),
    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),
    #[error("mock back end has no replies left")]
    Exhausted,
    /// An error recorded in a trace, replayed verbatim.
    #[error("{0}")]
    Replayed(String),
}

pub trait Backend: Send {
    fn name(&self) -> &str;
    fn complete(&mut self, request: &BackendRequest) -> Result<BackendReply, BackendError>;
}

/// Rule-based controller that never touches the network. It ignores the
/// prompt text and works from the request context, so prompt-only changes
/// cannot alter its replies.
#[derive(Clone, Debug)]
pub struct ScriptedBackend {
    stream: SeedStream,
    calls: u64,
}

impl ScriptedBackend {
    pub fn new(stream: SeedStream) -> Self {
        Self { stream, calls: 0 }
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&mut self, request: &BackendRequest) -> Result<BackendReply, BackendError> {
        let stream = self.stream.derive(self.calls);
        self.calls += 1;
        let domain = request
            .context
            .domain
            .ok_or_else(|| BackendError::Response("scripted back end needs a domain in the request context".into()))?;
        let text = match request.stage {
            Stage::Diagnosis => scripted::diagnosis_reply(request.mode, &request.context.parents),
            Stage::Coding => scripted::coding_reply(domain, request.mode, &request.context.parents, stream),
        };
        let mut usage = BTreeMap::new();
        usage.insert("completion_chars".to_string(), text.len() as u64);
        Ok(BackendReply { text, usage })
    }
}

/// Replays canned replies in order. An `Err` entry simulates a failure.
#[derive(Clone, Debug, Default)]
pub struct MockBackend {
    replies: VecDeque<Result<BackendReply, BackendError>>,
}

impl MockBackend {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut mock = Self::default();
        for r in replies {
            mock.push_reply(r);
        }
        mock
    }

    pub fn push_reply(&mut self, text: impl Into<String>) {
        self.replies.push_back(Ok(BackendReply {
            text: text.into(),
            usage: BTreeMap::new(),
        }));
    }

    pub fn push(&mut self, reply: Result<BackendReply, BackendError>) {
        self.replies.push_back(reply);
    }

    pub fn push_failure(&mut self, message: impl Into<String>) {
        self.replies.push_back(Err(BackendError::Transport(message.into())));
    }

    pub fn remaining(&self) -> usize {
        self.replies.len()
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&mut self, _request: &BackendRequest) -> Result<BackendReply, BackendError> {
        self.replies.pop_front().unwrap_or(Err(BackendError::Exhausted))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpSettings {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for HttpSettings {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            api_key_env: "COEVO_API_KEY".into(),
            timeout_secs: 60,
        }
    }
}

/// Chat-completions client.
pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: String,
}

impl HttpBackend {
    pub fn new(settings: &HttpSettings) -> Result<Self, BackendError> {
        let api_key = std::env::var(&settings.api_key_env)
            .map_err(|_| BackendError::MissingCredential(settings.api_key_env.clone()))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(settings.timeout_secs)))
            .build()
            .into();
        Ok(Self {
            agent,
            url: format!("{}/chat/completions", settings.base_url.trim_end_matches('/')),
            model: settings.model.clone(),
            api_key,
        })
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&mut self, request: &BackendRequest) -> Result<BackendReply, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let value: Value = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| BackendError::Transport(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Response(e.to_string()))?;
        let text = value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError::Response("no choices[0].message.content".into()))?
            .to_string();
        let usage = value
            .get("usage")
            .and_then(Value::as_object)
            .map(|m| m.iter().filter_map(|(k, v)| Some((k.clone(), v.as_u64()?))).collect())
            .unwrap_or_default();
        Ok(BackendReply { text, usage })
    }
}
