use std::fmt;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;

use super::{ChatClient, Completion, CompletionRequest, TransportError};

pub const ENV_ENDPOINT: &str = "ASMPLAN_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "ASMPLAN_LLM_API_KEY";
pub const ENV_MODEL: &str = "ASMPLAN_LLM_MODEL";

const BODY_EXCERPT: usize = 200;

#[derive(Clone)]
pub struct HttpConfig {
    pub endpoint: String,
    pub api_key: String,
    pub model: String,
    pub timeout: Duration,
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff: Duration,
    /// Minimum spacing between request starts on this client. Off when `None`.
    pub min_interval: Option<Duration>,
}

impl fmt::Debug for HttpConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpConfig")
            .field("endpoint", &self.endpoint)
            .field("api_key", &"<redacted>")
            .field("model", &self.model)
            .field("timeout", &self.timeout)
            .field("max_retries", &self.max_retries)
            .field("backoff", &self.backoff)
            .field("min_interval", &self.min_interval)
            .finish()
    }
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, model: impl Into<String>) -> Self {
        HttpConfig {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            model: model.into(),
            timeout: Duration::from_secs(60),
            max_retries: 2,
            backoff: Duration::from_millis(500),
            min_interval: None,
        }
    }

    /// Reads endpoint, credential and model from the environment.
    pub fn from_env() -> Result<Self, TransportError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, TransportError> {
        let get = |key: &str| {
            lookup(key)
                .filter(|v| !v.trim().is_empty())
                .ok_or_else(|| TransportError::Config(format!("{key} is not set")))
        };
        let endpoint = get(ENV_ENDPOINT)?;
        let api_key = get(ENV_API_KEY)?;
        let model = lookup(ENV_MODEL)
            .filter(|v| !v.trim().is_empty())
            .unwrap_or_else(|| "gpt-4".to_string());
        Ok(Self::new(endpoint, api_key, model))
    }

    fn check(&self) -> Result<(), TransportError> {
        if self.endpoint.trim().is_empty() {
            return Err(TransportError::Config("endpoint is empty".into()));
        }
        if self.api_key.trim().is_empty() {
            return Err(TransportError::Config("credential is empty".into()));
        }
        Ok(())
    }
}

/// Blocking chat-completion client with bounded retries on transient failures.
pub struct HttpChatClient {
    config: HttpConfig,
    client: reqwest::blocking::Client,
    last_start: Mutex<Option<Instant>>,
}

impl fmt::Debug for HttpChatClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpChatClient").field("config", &self.config).finish()
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

enum Attempt {
    Done(String),
    Transient(TransportError),
    Fatal(TransportError),
}

impl HttpChatClient {
    /// Fails on incomplete configuration without touching the network.
    pub fn new(config: HttpConfig) -> Result<Self, TransportError> {
        config.check()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| TransportError::Config(e.to_string()))?;
        Ok(HttpChatClient {
            config,
            client,
            last_start: Mutex::new(None),
        })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn pace(&self) {
        let Some(gap) = self.config.min_interval else {
            return;
        };
        let mut last = self.last_start.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(prev) = *last {
            let wait = gap.saturating_sub(prev.elapsed());
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
        *last = Some(Instant::now());
    }

    fn attempt(&self, req: &CompletionRequest, retries: u32) -> Attempt {
        self.pace();
        let sent = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(&self.config.api_key)
            .json(req)
            .send();
        let resp = match sent {
            Ok(r) => r,
            Err(e) => {
                let transient = e.is_timeout() || e.is_connect() || e.is_request();
                let err = TransportError::Network {
                    message: e.without_url().to_string(),
                    retries,
                };
                return if transient {
                    Attempt::Transient(err)
                } else {
                    Attempt::Fatal(err)
                };
            }
        };
        let status = resp.status();
        let body = match resp.text() {
            Ok(b) => b,
            Err(e) => {
                return Attempt::Transient(TransportError::Network {
                    message: e.without_url().to_string(),
                    retries,
                })
            }
        };
        tracing::debug!(status = status.as_u16(), body = %excerpt(&body), "chat completion response");
        if !status.is_success() {
            let err = TransportError::Status {
                status: status.as_u16(),
                body: excerpt(&body),
                retries,
            };
            return if status.is_server_error() || status.as_u16() == 429 {
                Attempt::Transient(err)
            } else {
                Attempt::Fatal(err)
            };
        }
        match serde_json::from_str::<ChatResponse>(&body) {
            Ok(parsed) => match parsed.choices.into_iter().next() {
                Some(choice) => Attempt::Done(choice.message.content),
                None => Attempt::Fatal(TransportError::MalformedBody { body: excerpt(&body) }),
            },
            Err(_) => Attempt::Fatal(TransportError::MalformedBody { body: excerpt(&body) }),
        }
    }
}

impl ChatClient for HttpChatClient {
    fn model(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, req: &CompletionRequest) -> Result<Completion, TransportError> {
        req.validate()?;
        tracing::debug!(
            endpoint = %self.config.endpoint,
            model = %req.model,
            messages = req.messages.len(),
            authorization = "Bearer <redacted>",
            "chat completion request"
        );
        let mut retries = 0;
        loop {
            match self.attempt(req, retries) {
                Attempt::Done(content) => return Ok(Completion { content, retries }),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Transient(e) if retries >= self.config.max_retries => return Err(e),
                Attempt::Transient(e) => {
                    let delay = self.config.backoff * 2u32.pow(retries);
                    tracing::warn!(error = %e, retry = retries + 1, ?delay, "transient failure, retrying");
                    std::thread::sleep(delay);
                    retries += 1;
                }
            }
        }
    }
}

fn excerpt(body: &str) -> String {
    if body.chars().count() <= BODY_EXCERPT {
        body.to_string()
    } else {
        let cut: String = body.chars().take(BODY_EXCERPT).collect();
        format!("{cut}…")
    }
}
