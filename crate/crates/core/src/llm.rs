//! Chat-completion client abstraction: one OpenAI-compatible wire
//! dialect behind profiles, with retry/backoff, request capture for
//! tests, and deterministic mock/replay backends.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport error after {attempts} attempts ({profile}): {message}")]
    Exhausted {
        profile: String,
        attempts: u32,
        message: String,
    },
    #[error("no fixture for request (mock backend), fingerprint {0}")]
    MissingFixture(String),
    #[error("no captured response for fingerprint {0}")]
    MissingCapture(String),
    #[error("capture file {path}: {message}")]
    Capture { path: String, message: String },
    #[error("missing environment variable {0} for profile {1}")]
    MissingEnv(String, String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed response from {profile}: {message}")]
    MalformedResponse { profile: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_profile: String,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("empty message list".into()));
        }
        if self.temperature < 0.0 {
            return Err(LlmError::InvalidRequest("negative temperature".into()));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be >= 1".into()));
        }
        Ok(())
    }

    /// Stable hash of (messages, temperature, max_tokens, model);
    /// identical requests share fingerprints across runs.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::json!({
            "messages": self.messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "model_profile": self.model_profile,
        });
        let mut hasher = Sha256::new();
        hasher.update(canonical.to_string().as_bytes());
        hex_str(&hasher.finalize())
    }
}

fn hex_str(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: FinishReason,
}

/// Connection profile for one chat endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientProfile {
    pub name: String,
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
}

fn default_retries() -> u32 {
    3
}

fn default_timeout_s() -> u64 {
    60
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

/// HTTP client speaking `POST {endpoint}/chat/completions` with
/// exponential backoff.
pub struct HttpChatClient {
    profile: ClientProfile,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(profile: ClientProfile) -> Result<Self, LlmError> {
        let api_key = match &profile.auth_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| LlmError::MissingEnv(var.clone(), profile.name.clone()))?,
            ),
            None => None,
        };
        Ok(Self {
            profile,
            api_key,
            client: reqwest::blocking::Client::new(),
        })
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    content: String,
}

impl ChatClient for HttpChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let body = serde_json::json!({
            "model": self.profile.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let url = format!(
            "{}/chat/completions",
            self.profile.endpoint.trim_end_matches('/')
        );

        let mut last_err = String::new();
        let mut backoff = Duration::from_millis(250);
        for attempt in 0..=self.profile.retries {
            if attempt > 0 {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            let mut req = self
                .client
                .post(&url)
                .timeout(Duration::from_secs(self.profile.timeout_s))
                .json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send().and_then(|r| r.error_for_status()) {
                Ok(resp) => {
                    let wire: WireResponse =
                        resp.json().map_err(|e| LlmError::MalformedResponse {
                            profile: self.profile.name.clone(),
                            message: e.to_string(),
                        })?;
                    let choice =
                        wire.choices
                            .into_iter()
                            .next()
                            .ok_or_else(|| LlmError::MalformedResponse {
                                profile: self.profile.name.clone(),
                                message: "empty choices".into(),
                            })?;
                    let finish_reason = match choice.finish_reason.as_deref() {
                        Some("length") => FinishReason::Length,
                        Some("stop") | None => FinishReason::Stop,
                        Some(_) => FinishReason::Error,
                    };
                    return Ok(ChatResponse {
                        text: choice.message.content,
                        finish_reason,
                    });
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(LlmError::Exhausted {
            profile: self.profile.name.clone(),
            attempts: self.profile.retries + 1,
            message: last_err,
        })
    }
}

type DefaultFn = Box<dyn Fn(&ChatRequest) -> String + Send + Sync>;

/// Deterministic mock backend for tests. Responses come from a
/// fingerprint-keyed fixture map, a scripted FIFO queue, or a
/// content-based default function, in that order. Every request is
/// captured for assertion.
pub struct MockChatClient {
    fixtures: HashMap<String, String>,
    script: Mutex<Vec<String>>,
    default_fn: Option<DefaultFn>,
    captured: Mutex<Vec<ChatRequest>>,
    fail_first: Mutex<u32>,
}

impl Default for MockChatClient {
    fn default() -> Self {
        Self::new()
    }
}

impl MockChatClient {
    pub fn new() -> Self {
        Self {
            fixtures: HashMap::new(),
            script: Mutex::new(Vec::new()),
            default_fn: None,
            captured: Mutex::new(Vec::new()),
            fail_first: Mutex::new(0),
        }
    }

    pub fn with_fixture(mut self, request: &ChatRequest, response: impl Into<String>) -> Self {
        self.fixtures.insert(request.fingerprint(), response.into());
        self
    }

    /// Queue responses returned in order regardless of request content.
    pub fn with_script(self, responses: Vec<String>) -> Self {
        {
            let mut script = self.script.lock().unwrap();
            *script = responses;
            script.reverse();
        }
        self
    }

    pub fn with_default_fn(
        mut self,
        f: impl Fn(&ChatRequest) -> String + Send + Sync + 'static,
    ) -> Self {
        self.default_fn = Some(Box::new(f));
        self
    }

    /// Fail the first `n` calls with a transport error.
    pub fn with_failures(self, n: u32) -> Self {
        *self.fail_first.lock().unwrap() = n;
        self
    }

    pub fn captured_requests(&self) -> Vec<ChatRequest> {
        self.captured.lock().unwrap().clone()
    }
}

impl ChatClient for MockChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        self.captured.lock().unwrap().push(request.clone());
        {
            let mut fail = self.fail_first.lock().unwrap();
            if *fail > 0 {
                *fail -= 1;
                return Err(LlmError::Exhausted {
                    profile: request.model_profile.clone(),
                    attempts: 1,
                    message: "mock transport failure".into(),
                });
            }
        }
        let text = if let Some(t) = self.fixtures.get(&request.fingerprint()) {
            t.clone()
        } else if let Some(t) = self.script.lock().unwrap().pop() {
            t
        } else if let Some(f) = &self.default_fn {
            f(request)
        } else {
            return Err(LlmError::MissingFixture(request.fingerprint()));
        };
        // Crude truncation model: max_tokens as a whitespace-token
        // budget, matching how real endpoints report finish_reason.
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() > request.max_tokens as usize {
            Ok(ChatResponse {
                text: tokens[..request.max_tokens as usize].join(" "),
                finish_reason: FinishReason::Length,
            })
        } else {
            Ok(ChatResponse {
                text,
                finish_reason: FinishReason::Stop,
            })
        }
    }
}

/// Retry wrapper with N forced re-attempts for any inner client.
pub struct RetryingClient<C> {
    inner: C,
    retries: u32,
}

impl<C: ChatClient> RetryingClient<C> {
    pub fn new(inner: C, retries: u32) -> Self {
        Self { inner, retries }
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }
}

impl<C: ChatClient> ChatClient for RetryingClient<C> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut last = None;
        for _ in 0..=self.retries {
            match self.inner.complete(request) {
                Ok(r) => return Ok(r),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap())
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CaptureFile {
    responses: HashMap<String, ChatResponse>,
}

/// Records every (fingerprint, response) pair flowing through an inner
/// client; the capture can later drive a [`ReplayClient`].
pub struct RecordingClient<C> {
    inner: C,
    captured: Mutex<CaptureFile>,
}

impl<C: ChatClient> RecordingClient<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            captured: Mutex::new(CaptureFile::default()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        let captured = self.captured.lock().unwrap();
        let json =
            serde_json::to_string_pretty(&*captured).map_err(|e| LlmError::Capture {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        fs::write(path, json).map_err(|e| LlmError::Capture {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

impl<C: ChatClient> ChatClient for RecordingClient<C> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let response = self.inner.complete(request)?;
        self.captured
            .lock()
            .unwrap()
            .responses
            .insert(request.fingerprint(), response.clone());
        Ok(response)
    }
}

/// Replays captured responses keyed by request fingerprint; an unseen
/// fingerprint is an error.
pub struct ReplayClient {
    responses: HashMap<String, ChatResponse>,
}

impl ReplayClient {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path).map_err(|e| LlmError::Capture {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let capture: CaptureFile =
            serde_json::from_str(&text).map_err(|e| LlmError::Capture {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        Ok(Self {
            responses: capture.responses,
        })
    }

    pub fn empty() -> Self {
        Self {
            responses: HashMap::new(),
        }
    }
}

impl ChatClient for ReplayClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        self.responses
            .get(&request.fingerprint())
            .cloned()
            .ok_or_else(|| LlmError::MissingCapture(request.fingerprint()))
    }
}

impl<C: ChatClient + ?Sized> ChatClient for &C {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<C: ChatClient + ?Sized> ChatClient for Box<C> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<C: ChatClient + ?Sized> ChatClient for std::sync::Arc<C> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}
