//! Language-model engines.
//!
//! Every component that talks to a model goes through [`Engine::complete`]
//! with a single-shot [`EngineRequest`]. The request `tag` names the caller
//! (`query_analyzer`, `action_predictor`, `tool:<name>`, ...) so scripted
//! playbooks can route responses without inspecting prompt text.

mod live;
mod parse;
mod scripted;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use live::{ChatBackend, HttpChatBackend, LiveEngine, LiveEngineConfig, RetryPolicy};
pub use parse::{extract_code_block, parse_tagged_fields, TaggedFields};
pub use scripted::{Playbook, PlaybookEntry, ScriptedEngine};

/// Caller tags attached to engine requests.
pub mod tags {
    pub const QUERY_ANALYZER: &str = "query_analyzer";
    pub const ACTION_PREDICTOR: &str = "action_predictor";
    pub const COMMAND_GENERATOR: &str = "command_generator";
    pub const CONTEXT_VERIFIER: &str = "context_verifier";
    pub const SOLUTION_SUMMARIZER: &str = "solution_summarizer";
    pub const DIRECT_SOLVER: &str = "direct_solver";
    pub const ANSWER_JUDGE: &str = "answer_judge";

    pub fn tool(name: &str) -> String {
        format!("tool:{name}")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid engine request: {0}")]
    InvalidRequest(String),
    #[error("provider error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Provider {
        status: Option<u16>,
        message: String,
    },
    #[error("playbook exhausted: no entry left for tag `{tag}`")]
    PlaybookExhausted { tag: String },
    #[error(
        "playbook mismatch at entry {index}: expected tag `{expected}`, got request tagged `{got}`"
    )]
    PlaybookMismatch {
        index: usize,
        expected: String,
        got: String,
    },
    #[error("engine configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineRequest {
    pub system_text: Option<String>,
    pub user_text: String,
    pub images: Vec<PathBuf>,
    /// Decoding knobs such as `temperature`; empty means provider defaults.
    pub knobs: BTreeMap<String, f64>,
    pub tag: String,
}

impl EngineRequest {
    pub fn new(tag: impl Into<String>, user_text: impl Into<String>) -> Self {
        Self {
            system_text: None,
            user_text: user_text.into(),
            images: Vec::new(),
            knobs: BTreeMap::new(),
            tag: tag.into(),
        }
    }

    pub fn with_image(mut self, image: impl Into<PathBuf>) -> Self {
        self.images.push(image.into());
        self
    }

    pub fn with_system(mut self, system: impl Into<String>) -> Self {
        self.system_text = Some(system.into());
        self
    }

    pub fn with_knob(mut self, key: &str, value: f64) -> Self {
        self.knobs.insert(key.to_string(), value);
        self
    }

    /// Planner and executor calls decode deterministically unless overridden.
    pub fn deterministic(self) -> Self {
        self.with_knob("temperature", 0.0)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.user_text.trim().is_empty() {
            return Err(EngineError::InvalidRequest("user_text is empty".into()));
        }
        for image in &self.images {
            if !image.is_file() {
                return Err(EngineError::InvalidRequest(format!(
                    "image `{}` does not exist",
                    image.display()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

/// Per-token prices in a single currency unit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Pricing {
    pub input_per_token: f64,
    pub output_per_token: f64,
}

impl Pricing {
    pub fn estimate(&self, usage: Usage) -> f64 {
        usage.input_tokens as f64 * self.input_per_token
            + usage.output_tokens as f64 * self.output_per_token
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineResponse {
    pub text: String,
    pub usage: Usage,
    pub cost_estimate: f64,
    pub latency: f64,
}

impl EngineResponse {
    /// A zero-cost response, as produced by offline engines.
    pub fn free(text: impl Into<String>, latency: f64) -> Self {
        Self {
            text: text.into(),
            usage: Usage::default(),
            cost_estimate: 0.0,
            latency,
        }
    }
}

pub trait Engine: Send + Sync {
    fn complete(&self, request: &EngineRequest) -> Result<EngineResponse, EngineError>;

    fn model_name(&self) -> &str {
        "unnamed"
    }
}

impl<E: Engine + ?Sized> Engine for Arc<E> {
    fn complete(&self, request: &EngineRequest) -> Result<EngineResponse, EngineError> {
        (**self).complete(request)
    }

    fn model_name(&self) -> &str {
        (**self).model_name()
    }
}

/// Returns the user text verbatim.
#[derive(Debug, Default, Clone, Copy)]
pub struct EchoEngine;

impl Engine for EchoEngine {
    fn complete(&self, request: &EngineRequest) -> Result<EngineResponse, EngineError> {
        request.validate()?;
        Ok(EngineResponse::free(request.user_text.clone(), 0.0))
    }

    fn model_name(&self) -> &str {
        "echo"
    }
}

type ResponderFn = dyn Fn(&EngineRequest) -> Result<String, EngineError> + Send + Sync;

/// Engine backed by a closure. Useful for synthetic experiments where the
/// response depends on prompt content.
pub struct FnEngine {
    responder: Box<ResponderFn>,
}

impl FnEngine {
    pub fn new(
        responder: impl Fn(&EngineRequest) -> Result<String, EngineError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            responder: Box::new(responder),
        }
    }
}

impl Engine for FnEngine {
    fn complete(&self, request: &EngineRequest) -> Result<EngineResponse, EngineError> {
        request.validate()?;
        let start = Instant::now();
        let text = (self.responder)(request)?;
        Ok(EngineResponse::free(text, start.elapsed().as_secs_f64()))
    }

    fn model_name(&self) -> &str {
        "fn"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeteredCall {
    pub tag: String,
    pub usage: Usage,
    pub cost: f64,
}

/// Wraps an engine and records the usage and cost of every successful call.
pub struct UsageMeter {
    inner: Arc<dyn Engine>,
    calls: Mutex<Vec<MeteredCall>>,
}

impl UsageMeter {
    pub fn new(inner: Arc<dyn Engine>) -> Self {
        Self {
            inner,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<MeteredCall> {
        self.calls.lock().expect("meter lock").clone()
    }

    pub fn total_cost(&self) -> f64 {
        self.calls().iter().map(|c| c.cost).sum()
    }
}

impl Engine for UsageMeter {
    fn complete(&self, request: &EngineRequest) -> Result<EngineResponse, EngineError> {
        let response = self.inner.complete(request)?;
        self.calls.lock().expect("meter lock").push(MeteredCall {
            tag: request.tag.clone(),
            usage: response.usage,
            cost: response.cost_estimate,
        });
        Ok(response)
    }

    fn model_name(&self) -> &str {
        self.inner.model_name()
    }
}
