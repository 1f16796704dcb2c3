//! Chat-completion transports: live HTTP, cassette replay and recording.

use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn user(model: &str, content: &str, temperature: f64) -> ChatRequest {
        ChatRequest {
            model: model.to_string(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: content.to_string(),
            }],
            temperature,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("http: {0}")]
    Http(String),
    #[error("reply has no choices[0].message.content")]
    Shape,
    #[error("cassette has no unused interaction for this request")]
    NotRecorded,
    #[error("cassette {path}: {message}")]
    Cassette { path: String, message: String },
}

pub trait ChatTransport {
    /// Sends one request and returns the reply text.
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

impl<T: ChatTransport + ?Sized> ChatTransport for Box<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        (**self).complete(request)
    }
}

/// POSTs `{model, messages, temperature}` and reads `choices[0].message.content`.
pub struct HttpTransport {
    endpoint: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: &str, api_key: &str, timeout: Duration) -> HttpTransport {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpTransport {
            endpoint: endpoint.to_string(),
            api_key: api_key.to_string(),
            agent,
        }
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(request)
            .map_err(|e| TransportError::Http(e.to_string()))?;
        let body: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| TransportError::Http(e.to_string()))?;
        body.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or(TransportError::Shape)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub request: ChatRequest,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cassette {
    pub interactions: Vec<Interaction>,
}

impl Cassette {
    pub fn load(path: &Path) -> Result<Cassette, TransportError> {
        let err = |message: String| TransportError::Cassette {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), TransportError> {
        let mut text = serde_json::to_string_pretty(self).expect("cassette serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| TransportError::Cassette {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Replays recorded interactions. Each recorded interaction answers at most
/// one request; requests are matched by full equality.
pub struct Replay {
    interactions: Vec<Interaction>,
    used: Mutex<Vec<bool>>,
}

impl Replay {
    pub fn new(cassette: Cassette) -> Replay {
        let used = Mutex::new(vec![false; cassette.interactions.len()]);
        Replay {
            interactions: cassette.interactions,
            used,
        }
    }
}

impl ChatTransport for Replay {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut used = self.used.lock().expect("replay lock");
        let i = self
            .interactions
            .iter()
            .enumerate()
            .position(|(i, x)| !used[i] && x.request == *request)
            .ok_or(TransportError::NotRecorded)?;
        used[i] = true;
        Ok(self.interactions[i].response.clone())
    }
}

/// Wraps a transport and keeps every successful exchange.
pub struct Recorder<T> {
    inner: T,
    log: Mutex<Cassette>,
}

impl<T: ChatTransport> Recorder<T> {
    pub fn new(inner: T) -> Recorder<T> {
        Recorder {
            inner,
            log: Mutex::new(Cassette::default()),
        }
    }

    pub fn cassette(&self) -> Cassette {
        self.log.lock().expect("recorder lock").clone()
    }
}

impl<T: ChatTransport> ChatTransport for Recorder<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let response = self.inner.complete(request)?;
        self.log.lock().expect("recorder lock").interactions.push(Interaction {
            request: request.clone(),
            response: response.clone(),
        });
        Ok(response)
    }
}
