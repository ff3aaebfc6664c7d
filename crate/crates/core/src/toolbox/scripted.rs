use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;
use serde_json::Value;

use super::{ToolArgs, ToolCard, ToolContext, ToolError, ToolMetadata, ToolOutput};

/// A card that replays canned payloads, for tools that cannot run offline
/// (object detectors, slow services) and for tests.
///
/// Payloads are served in order; the last one repeats once the queue is
/// drained.
pub struct ScriptedTool {
    metadata: ToolMetadata,
    responses: Vec<Value>,
    delay: Option<Duration>,
    served: Mutex<usize>,
}

#[derive(Deserialize)]
struct ScriptedToolFile {
    metadata: ToolMetadata,
    responses: Vec<Value>,
    #[serde(default)]
    delay_secs: Option<f64>,
}

impl ScriptedTool {
    pub fn new(metadata: ToolMetadata, responses: Vec<Value>) -> Self {
        Self {
            metadata,
            responses,
            delay: None,
            served: Mutex::new(0),
        }
    }

    /// Sleeps before answering, to exercise timeouts.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    /// Reads `{metadata, responses, delay_secs?}` from a JSON file.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("reading scripted tool {}: {e}", path.display()))?;
        let file: ScriptedToolFile = serde_json::from_str(&text)
            .map_err(|e| format!("parsing scripted tool {}: {e}", path.display()))?;
        let mut tool = Self::new(file.metadata, file.responses);
        tool.delay = file.delay_secs.map(Duration::from_secs_f64);
        Ok(tool)
    }

    pub fn calls(&self) -> usize {
        *self.served.lock().expect("scripted tool lock")
    }
}

impl ToolCard for ScriptedTool {
    fn metadata(&self) -> &ToolMetadata {
        &self.metadata
    }

    fn execute(&self, _args: &ToolArgs, _ctx: &ToolContext) -> Result<ToolOutput, ToolError> {
        if let Some(delay) = self.delay {
            std::thread::sleep(delay);
        }
        let mut served = self.served.lock().expect("scripted tool lock");
        let payload = self
            .responses
            .get(*served)
            .or(self.responses.last())
            .cloned()
            .unwrap_or(Value::Null);
        *served += 1;
        Ok(ToolOutput::new(payload))
    }
}
