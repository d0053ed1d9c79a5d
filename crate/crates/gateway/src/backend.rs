//! Chat-completion clients for remote model backends and judges.
//!
//! The wire contract is a generic chat-completion endpoint: POST a JSON
//! body with model, messages, seed, and temperature 0; read the first
//! choice's message content. Credentials come from the environment
//! (`ECOM_BACKEND_KEY`, `ECOM_JUDGE_KEY`), never from files.

use std::time::Duration;

use ecom_core::agents::{BackendError, CompletionRequest, ModelBackend};
use serde::Deserialize;
use serde_json::json;

pub const BACKEND_KEY_ENV: &str = "ECOM_BACKEND_KEY";
pub const JUDGE_KEY_ENV: &str = "ECOM_JUDGE_KEY";

pub struct HttpChatBackend {
    url: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpChatBackend {
    pub fn new(url: &str, model: &str, api_key: Option<String>) -> HttpChatBackend {
        HttpChatBackend {
            url: url.to_string(),
            model: model.to_string(),
            api_key,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("client builds"),
        }
    }

    pub fn from_env(url: &str, model: &str, key_env: &str) -> HttpChatBackend {
        HttpChatBackend::new(url, model, std::env::var(key_env).ok())
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

impl ModelBackend for HttpChatBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let mut messages = vec![json!({ "role": "system", "content": request.system })];
        for m in &request.messages {
            messages.push(json!({ "role": m.role, "content": m.content }));
        }
        let body = json!({
            "model": self.model,
            "messages": messages,
            "seed": request.seed,
            "temperature": 0,
        });
        let mut req = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let response = req.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Unavailable(e.to_string())
            }
        })?;
        if !response.status().is_success() {
            return Err(BackendError::Unavailable(format!(
                "HTTP {}",
                response.status()
            )));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Unavailable("empty choices".into()))
    }
}
