//! Reasoning and synthesis providers.
//!
//! [`scripted`] holds the deterministic providers used by every test and by
//! default in the CLI. [`http`] and [`chat`] connect the same traits to an
//! external chat-completion endpoint.

pub mod chat;
pub mod embed;
pub mod http;
pub mod scripted;
pub mod stub;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpChatClient, HttpConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("endpoint returned HTTP {status} after {retries} retries: {body}")]
    Status { status: u16, body: String, retries: u32 },
    #[error("request failed after {retries} retries: {message}")]
    Network { message: String, retries: u32 },
    #[error("response body is not a chat completion: {body}")]
    MalformedBody { body: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Wire shape of a chat-completion request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl CompletionRequest {
    pub const DEFAULT_MAX_TOKENS: u32 = 1024;

    /// Temperature 0 and the default token cap.
    pub fn new(model: impl Into<String>, messages: Vec<Message>) -> Self {
        CompletionRequest {
            model: model.into(),
            messages,
            temperature: 0.0,
            max_tokens: Self::DEFAULT_MAX_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<(), TransportError> {
        if self.messages.is_empty() {
            return Err(TransportError::InvalidRequest("no messages".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(TransportError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub content: String,
    /// Transient failures retried before this reply arrived.
    pub retries: u32,
}

pub trait ChatClient {
    /// Model name placed in outgoing requests.
    fn model(&self) -> &str;

    fn complete(&self, req: &CompletionRequest) -> Result<Completion, TransportError>;
}

impl<T: ChatClient + ?Sized> ChatClient for &T {
    fn model(&self) -> &str {
        (**self).model()
    }

    fn complete(&self, req: &CompletionRequest) -> Result<Completion, TransportError> {
        (**self).complete(req)
    }
}

/// Worked examples embedded in external-reasoner prompts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FewShotConfig {
    exemplars: Vec<Exemplar>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub instruction: String,
    pub plan: String,
}

impl FewShotConfig {
    pub const MAX_EXEMPLARS: usize = 2;

    pub fn new(exemplars: Vec<Exemplar>) -> Result<Self, TransportError> {
        if exemplars.len() > Self::MAX_EXEMPLARS {
            return Err(TransportError::Config(format!(
                "at most {} exemplars, got {}",
                Self::MAX_EXEMPLARS,
                exemplars.len()
            )));
        }
        Ok(FewShotConfig { exemplars })
    }

    /// The first `shots` built-in exemplars.
    pub fn builtin(shots: usize) -> Result<Self, TransportError> {
        let all = [
            Exemplar {
                instruction: "Assemble one connector C901".into(),
                plan: "At workstation 1, perform Step 1: pick signal cable from Shelf 1, place signal cable.\n\
                       At workstation 1, perform Step 2: switch to stripping tool, place signal cable.\n\
                       At workstation 2, perform Step 3: pick crimp terminal from Shelf 1, press_fit signal cable."
                    .into(),
            },
            Exemplar {
                instruction: "Build a connector C905".into(),
                plan: "At workstation 1, perform Step 1: switch to insert press, pick insulator insert from Shelf 2, install insulator insert.\n\
                       At workstation 2, perform Step 2: pick metal housing from Shelf 2, install insulator insert."
                    .into(),
            },
        ];
        if shots > all.len() {
            return Err(TransportError::Config(format!(
                "shot count {shots} exceeds {}",
                all.len()
            )));
        }
        Self::new(all[..shots].to_vec())
    }

    pub fn exemplars(&self) -> &[Exemplar] {
        &self.exemplars
    }

    pub fn shots(&self) -> usize {
        self.exemplars.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_serializes_to_chat_shape() {
        let req = CompletionRequest::new("m", vec![Message::system("s"), Message::user("u")]);
        let v = serde_json::to_value(&req).unwrap();
        assert_eq!(
            v,
            serde_json::json!({
                "model": "m",
                "messages": [{"role": "system", "content": "s"}, {"role": "user", "content": "u"}],
                "temperature": 0.0,
                "max_tokens": 1024
            })
        );
    }

    #[test]
    fn request_validation() {
        let mut req = CompletionRequest::new("m", vec![]);
        assert!(req.validate().is_err());
        req.messages.push(Message::user("x"));
        assert!(req.validate().is_ok());
        req.temperature = 2.5;
        assert!(req.validate().is_err());
    }

    #[test]
    fn few_shot_bounds() {
        assert_eq!(FewShotConfig::builtin(0).unwrap().shots(), 0);
        assert_eq!(FewShotConfig::builtin(2).unwrap().shots(), 2);
        assert!(FewShotConfig::builtin(3).is_err());
        let ex = FewShotConfig::builtin(2).unwrap().exemplars()[0].clone();
        assert!(FewShotConfig::new(vec![ex.clone(), ex.clone(), ex]).is_err());
    }
}
