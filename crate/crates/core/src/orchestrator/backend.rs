use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::text::sha256_hex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("no scripted response for agent `{agent_id}` (request {request_hash})")]
    Unscripted { agent_id: String, request_hash: String },
    #[error("injected failure for agent `{0}`")]
    Injected(String),
    #[error("invalid backend settings: {0}")]
    Settings(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSettings {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings {
            model: "rule-simulator".into(),
            temperature: 0.0,
            max_tokens: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: "user".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub agent_id: String,
    pub role_prompt: String,
    pub messages: Vec<ChatMessage>,
}

impl GenerationRequest {
    /// Full prompt text as logged in transcripts.
    pub fn prompt_text(&self) -> String {
        let mut s = format!("[system]\n{}\n", self.role_prompt);
        for m in &self.messages {
            s.push_str(&format!("[{}]\n{}\n", m.role, m.content));
        }
        s
    }

    pub fn request_hash(&self) -> String {
        sha256_hex(self.prompt_text())
    }

    /// Concatenated message bodies without the role prompt.
    pub fn body(&self) -> String {
        self.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n")
    }
}

/// Text-generation backend. Implementations must tolerate concurrent calls.
pub trait GenerationBackend: Send + Sync {
    fn settings(&self) -> &GenerationSettings;
    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError>;
}

/// OpenAI-compatible `/chat/completions` client.
pub struct HttpChatBackend {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
    settings: GenerationSettings,
}

impl HttpChatBackend {
    pub fn new(base_url: &str, api_key: Option<String>, settings: GenerationSettings, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpChatBackend {
            agent,
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            settings,
        }
    }

    pub fn request_body(&self, request: &GenerationRequest) -> serde_json::Value {
        let mut messages = vec![json!({"role": "system", "content": request.role_prompt})];
        messages.extend(request.messages.iter().map(|m| json!({"role": m.role, "content": m.content})));
        json!({
            "model": self.settings.model,
            "temperature": self.settings.temperature,
            "max_tokens": self.settings.max_tokens,
            "messages": messages,
        })
    }
}

impl GenerationBackend for HttpChatBackend {
    fn settings(&self) -> &GenerationSettings {
        &self.settings
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(self.request_body(request))
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError::Status { status, body });
        }
        let v: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| BackendError::Malformed("missing choices[0].message.content".into()))
    }
}

/// Canned responses keyed by `(agent_id, request hash)`, with an optional
/// per-agent default and an optional fallback backend for anything else.
/// Every call is logged under a mutex.
pub struct ScriptedBackend {
    settings: GenerationSettings,
    exact: BTreeMap<(String, String), String>,
    per_agent: BTreeMap<String, String>,
    fallback: Option<Arc<dyn GenerationBackend>>,
    calls: Mutex<Vec<(String, String)>>,
}

/// On-disk form of a script.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub per_agent: BTreeMap<String, String>,
    #[serde(default)]
    pub exact: Vec<ScriptEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub agent_id: String,
    pub request_hash: String,
    pub response: String,
}

impl ScriptedBackend {
    pub fn new(settings: GenerationSettings) -> Self {
        ScriptedBackend {
            settings,
            exact: BTreeMap::new(),
            per_agent: BTreeMap::new(),
            fallback: None,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn from_script(script: Script, settings: GenerationSettings) -> Self {
        let mut b = Self::new(settings);
        b.per_agent = script.per_agent;
        for e in script.exact {
            b.exact.insert((e.agent_id, e.request_hash), e.response);
        }
        b
    }

    pub fn with_response(mut self, agent_id: &str, request_hash: &str, response: &str) -> Self {
        self.exact.insert((agent_id.into(), request_hash.into()), response.into());
        self
    }

    pub fn with_default(mut self, agent_id: &str, response: &str) -> Self {
        self.per_agent.insert(agent_id.into(), response.into());
        self
    }

    pub fn with_fallback(mut self, fallback: Arc<dyn GenerationBackend>) -> Self {
        self.fallback = Some(fallback);
        self
    }

    /// `(agent_id, request_hash)` of every call so far, in call order.
    pub fn calls(&self) -> Vec<(String, String)> {
        self.calls.lock().expect("call log lock").clone()
    }
}

impl GenerationBackend for ScriptedBackend {
    fn settings(&self) -> &GenerationSettings {
        &self.settings
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        let hash = request.request_hash();
        self.calls
            .lock()
            .expect("call log lock")
            .push((request.agent_id.clone(), hash.clone()));
        if let Some(r) = self.exact.get(&(request.agent_id.clone(), hash.clone())) {
            return Ok(r.clone());
        }
        if let Some(r) = self.per_agent.get(&request.agent_id) {
            return Ok(r.clone());
        }
        match &self.fallback {
            Some(f) => f.generate(request),
            None => Err(BackendError::Unscripted { agent_id: request.agent_id.clone(), request_hash: hash }),
        }
    }
}

/// Wraps a backend and fails every call for one agent.
pub struct FailingBackend {
    pub inner: Arc<dyn GenerationBackend>,
    pub fail_agent: String,
}

impl GenerationBackend for FailingBackend {
    fn settings(&self) -> &GenerationSettings {
        self.inner.settings()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        if request.agent_id == self.fail_agent {
            Err(BackendError::Injected(request.agent_id.clone()))
        } else {
            self.inner.generate(request)
        }
    }
}
