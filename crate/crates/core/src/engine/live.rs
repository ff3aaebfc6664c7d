//! OpenAI-compatible chat-completion client.

use std::path::Path;
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Engine, EngineError, EngineRequest, EngineResponse, Pricing, Usage};

/// Transport for one chat-completion POST. Returns `(status, body)`; an `Err`
/// is a transport-level failure (connection refused, timeout, ...).
pub trait ChatBackend: Send + Sync {
    fn post(&self, body: &Value) -> Result<(u16, String), String>;
}

pub struct HttpChatBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
}

impl HttpChatBackend {
    pub fn new(base_url: &str, api_key: String, timeout: Duration) -> Result<Self, EngineError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EngineError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
        })
    }
}

impl ChatBackend for HttpChatBackend {
    fn post(&self, body: &Value) -> Result<(u16, String), String> {
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|e| e.to_string())?;
        Ok((status, text))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 2,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    fn is_transient(status: u16) -> bool {
        matches!(status, 408 | 409 | 429 | 500 | 502 | 503 | 504)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveEngineConfig {
    pub model: String,
    pub base_url: String,
    pub api_key_env: String,
    pub pricing: Pricing,
    pub timeout_secs: f64,
}

impl Default for LiveEngineConfig {
    fn default() -> Self {
        Self {
            model: "gpt-4o".into(),
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            pricing: Pricing::default(),
            timeout_secs: 120.0,
        }
    }
}

pub struct LiveEngine {
    model: String,
    pricing: Pricing,
    retry: RetryPolicy,
    backend: Box<dyn ChatBackend>,
}

impl LiveEngine {
    pub fn from_config(config: &LiveEngineConfig) -> Result<Self, EngineError> {
        let api_key = std::env::var(&config.api_key_env).map_err(|_| {
            EngineError::Config(format!(
                "environment variable {} is not set",
                config.api_key_env
            ))
        })?;
        let backend = HttpChatBackend::new(
            &config.base_url,
            api_key,
            Duration::from_secs_f64(config.timeout_secs),
        )?;
        Ok(Self::with_backend(
            config.model.clone(),
            config.pricing,
            Box::new(backend),
        ))
    }

    pub fn with_backend(model: String, pricing: Pricing, backend: Box<dyn ChatBackend>) -> Self {
        Self {
            model,
            pricing,
            retry: RetryPolicy::default(),
            backend,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn request_body(&self, request: &EngineRequest) -> Result<Value, EngineError> {
        let mut messages = Vec::new();
        if let Some(system) = &request.system_text {
            messages.push(json!({"role": "system", "content": system}));
        }
        let content = if request.images.is_empty() {
            json!(request.user_text)
        } else {
            let mut parts = vec![json!({"type": "text", "text": request.user_text})];
            for image in &request.images {
                parts.push(json!({
                    "type": "image_url",
                    "image_url": {"url": image_data_url(image)?},
                }));
            }
            Value::Array(parts)
        };
        messages.push(json!({"role": "user", "content": content}));
        let mut body = json!({"model": self.model, "messages": messages});
        for (key, value) in &request.knobs {
            body[key] = json!(value);
        }
        Ok(body)
    }
}

fn image_data_url(path: &Path) -> Result<String, EngineError> {
    let bytes = std::fs::read(path)
        .map_err(|e| EngineError::InvalidRequest(format!("reading {}: {e}", path.display())))?;
    let mime = match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
    {
        Some(ext) if ext == "jpg" || ext == "jpeg" => "image/jpeg",
        Some(ext) if ext == "gif" => "image/gif",
        Some(ext) if ext == "webp" => "image/webp",
        _ => "image/png",
    };
    let encoded = base64::engine::general_purpose::STANDARD.encode(bytes);
    Ok(format!("data:{mime};base64,{encoded}"))
}

/// Parses a chat-completion response body into text and token usage.
pub(crate) fn parse_chat_response(body: &str) -> Result<(String, Usage), EngineError> {
    let value: Value = serde_json::from_str(body).map_err(|e| EngineError::Provider {
        status: None,
        message: format!("malformed response body: {e}"),
    })?;
    let text = value["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| EngineError::Provider {
            status: None,
            message: "response has no choices[0].message.content".into(),
        })?
        .to_string();
    let usage = Usage {
        input_tokens: value["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
        output_tokens: value["usage"]["completion_tokens"].as_u64().unwrap_or(0),
    };
    Ok((text, usage))
}

impl Engine for LiveEngine {
    fn complete(&self, request: &EngineRequest) -> Result<EngineResponse, EngineError> {
        request.validate()?;
        let body = self.request_body(request)?;
        let start = Instant::now();
        let mut backoff = self.retry.initial_backoff;
        let mut attempt = 0;
        loop {
            let outcome = self.backend.post(&body);
            let transient_error = match outcome {
                Ok((status, text)) if (200..300).contains(&status) => {
                    let (text, usage) = parse_chat_response(&text)?;
                    return Ok(EngineResponse {
                        text,
                        usage,
                        cost_estimate: self.pricing.estimate(usage),
                        latency: start.elapsed().as_secs_f64(),
                    });
                }
                Ok((status, text)) => {
                    let err = EngineError::Provider {
                        status: Some(status),
                        message: text.chars().take(500).collect(),
                    };
                    if !RetryPolicy::is_transient(status) {
                        return Err(err);
                    }
                    err
                }
                Err(message) => EngineError::Provider {
                    status: None,
                    message,
                },
            };
            if attempt >= self.retry.max_retries {
                return Err(transient_error);
            }
            tracing::warn!(attempt, error = %transient_error, "retrying engine request");
            std::thread::sleep(backoff);
            backoff *= 2;
            attempt += 1;
        }
    }

    fn model_name(&self) -> &str {
        &self.model
    }
}
