//! The append-only trajectory, its prompt rendering and its canonical JSON
//! form.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::executor::StepExecution;
use crate::planner::{Action, FinalAnswer, InitialPlan, Verdict};

pub const SCHEMA_VERSION: u32 = 1;

/// Default per-result cap, in characters, when rendering for prompts.
pub const DEFAULT_RESULT_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Ok,
    ActionParseFailure,
    CommandParseFailure,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub action: Action,
    pub execution: StepExecution,
    pub status: StepStatus,
    pub started_at: DateTime<Utc>,
    pub ended_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    VerifierStop,
    MaxSteps,
    TimeBudget,
    EngineFailure,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::VerifierStop => "verifier_stop",
            Termination::MaxSteps => "max_steps",
            Termination::TimeBudget => "time_budget",
            Termination::EngineFailure => "engine_failure",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub steps: usize,
    /// Seconds spent in the budgeted loop (analysis through last verdict).
    pub wall_clock: f64,
    /// Seconds spent summarizing, kept out of the budget.
    pub summary_time: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub schema_version: u32,
    pub query_id: String,
    pub query: String,
    pub image: Option<PathBuf>,
    pub initial_plan: Option<InitialPlan>,
    pub steps: Vec<StepRecord>,
    /// Verifier verdicts, one per verified step.
    pub verdicts: Vec<Verdict>,
    pub final_answer: Option<FinalAnswer>,
    pub termination: Option<Termination>,
    pub totals: Totals,
}

#[derive(Debug, thiserror::Error)]
pub enum MemoryError {
    #[error("step index {got} does not follow {expected_prev}")]
    IndexGap { expected_prev: usize, got: usize },
    #[error("trajectory schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u32 },
    #[error("malformed trajectory: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Trajectory {
    pub fn new(
        query_id: impl Into<String>,
        query: impl Into<String>,
        image: Option<PathBuf>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            query_id: query_id.into(),
            query: query.into(),
            image,
            initial_plan: None,
            steps: Vec::new(),
            verdicts: Vec::new(),
            final_answer: None,
            termination: None,
            totals: Totals::default(),
        }
    }

    pub fn append_step(&mut self, record: StepRecord) -> Result<(), MemoryError> {
        if record.index != self.steps.len() + 1 {
            return Err(MemoryError::IndexGap {
                expected_prev: self.steps.len(),
                got: record.index,
            });
        }
        self.steps.push(record);
        self.totals.steps = self.steps.len();
        Ok(())
    }

    /// Canonical JSON: sorted keys, two-space indent, shortest round-trip
    /// float formatting, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("trajectory is always serializable");
        let mut text = serde_json::to_string_pretty(&value).expect("value is always serializable");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, MemoryError> {
        let value: Value = serde_json::from_str(text)?;
        let found = value
            .get("schema_version")
            .and_then(Value::as_u64)
            .unwrap_or(0);
        if found != u64::from(SCHEMA_VERSION) {
            return Err(MemoryError::SchemaVersionMismatch {
                found,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), MemoryError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|source| MemoryError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        std::fs::write(path, self.to_canonical_json()).map_err(|source| MemoryError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, MemoryError> {
        let text = std::fs::read_to_string(path).map_err(|source| MemoryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

fn truncate(text: &str, limit: usize) -> String {
    match text.char_indices().nth(limit) {
        None => text.to_string(),
        Some((cut, _)) => {
            let dropped = text[cut..].chars().count();
            format!("{}\n... [truncated {dropped} characters]", &text[..cut])
        }
    }
}

/// The memory slot of planner prompts, with the default result cap.
pub fn render_for_prompt(trajectory: &Trajectory) -> String {
    render_for_prompt_with(trajectory, DEFAULT_RESULT_LIMIT)
}

pub fn render_for_prompt_with(trajectory: &Trajectory, result_limit: usize) -> String {
    if trajectory.steps.is_empty() {
        return "No previous steps.".to_string();
    }
    let mut out = String::new();
    for step in &trajectory.steps {
        out.push_str(&format!("Action Step {}:\n", step.index));
        out.push_str(&format!("  tool_name: {}\n", step.action.tool_name));
        out.push_str(&format!("  sub_goal: {}\n", step.action.sub_goal));
        if step.status != StepStatus::Ok {
            out.push_str(&format!(
                "  status: {}\n",
                serde_json::to_value(step.status)
                    .expect("status")
                    .as_str()
                    .unwrap_or("")
            ));
        }
        out.push_str(&format!("  command: {}\n", step.execution.command_text));
        match step.execution.results.as_slice() {
            [] => out.push_str("  result: (none)\n"),
            [single] => out.push_str(&format!(
                "  result: {}\n",
                truncate(&single.display_text(), result_limit)
            )),
            many => {
                for (i, r) in many.iter().enumerate() {
                    out.push_str(&format!(
                        "  result {}: {}\n",
                        i + 1,
                        truncate(&r.display_text(), result_limit)
                    ));
                }
            }
        }
        out.push('\n');
    }
    out.trim_end().to_string()
}

/// Human-readable listing of a whole solve, for `inspect`.
pub fn render_listing(trajectory: &Trajectory) -> String {
    let mut out = format!("Query: {}\n", trajectory.query);
    if let Some(image) = &trajectory.image {
        out.push_str(&format!("Image: {}\n", image.display()));
    }
    if let Some(plan) = &trajectory.initial_plan {
        out.push_str(&format!("\nQuery Analysis:\n{}\n", plan.raw_text.trim()));
    }
    for (i, step) in trajectory.steps.iter().enumerate() {
        out.push_str(&format!("\nAction Step {}:\n", step.index));
        out.push_str(&format!("Tool: {}\n", step.action.tool_name));
        out.push_str(&format!("Sub-goal: {}\n", step.action.sub_goal));
        if !step.action.context.is_empty() {
            out.push_str(&format!("Context: {}\n", step.action.context));
        }
        out.push_str(&format!(
            "Command:\n{}\n",
            step.execution.command_text.trim_end()
        ));
        for (k, result) in step.execution.results.iter().enumerate() {
            out.push_str(&format!("Result {}:\n{}\n", k + 1, result.display_text()));
        }
        if step.execution.timed_out {
            out.push_str("(timed out)\n");
        }
        if let Some(verdict) = trajectory.verdicts.get(i) {
            let word = if verdict.stop_signal {
                "STOP"
            } else {
                "CONTINUE"
            };
            out.push_str(&format!("Verification: {word}\n"));
        }
    }
    if let Some(answer) = &trajectory.final_answer {
        out.push_str(&format!("\nFinal Answer:\n{}\n", answer.text.trim()));
    }
    if let Some(t) = trajectory.termination {
        out.push_str(&format!("\nTermination: {}\n", t.as_str()));
    }
    out
}
