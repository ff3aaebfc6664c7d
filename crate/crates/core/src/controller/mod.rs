//! The solve loop: analyze once, then predict, execute and verify until the
//! verifier stops or a budget runs out, then summarize.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clock::{Clock, SystemClock};
use crate::engine::{tags, Engine, EngineRequest, UsageMeter};
use crate::executor::{run_step, StepError, StepExecution, StepRequest};
use crate::memory::{StepRecord, StepStatus, Termination, Trajectory, DEFAULT_RESULT_LIMIT};
use crate::planner::{FinalAnswer, Planner, PlannerError, PromptSet};
use crate::toolbox::{RegistryError, ToolRegistry, ToolResult};
use crate::BASE_TOOL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub max_steps: usize,
    /// Seconds for the analysis, action, execution and verification loop.
    pub max_time: f64,
    pub enabled_tools: BTreeSet<String>,
    pub base_tools: BTreeSet<String>,
    pub cache_dir: PathBuf,
    /// Per-result character cap in prompt renderings of the trajectory.
    pub result_limit: usize,
    #[serde(skip)]
    pub prompts: PromptSet,
}

impl Default for SolveConfig {
    fn default() -> Self {
        let base = BTreeSet::from([BASE_TOOL.to_string()]);
        Self {
            max_steps: 10,
            max_time: 300.0,
            enabled_tools: base.clone(),
            base_tools: base,
            cache_dir: std::env::temp_dir().join("toolcards-cache"),
            result_limit: DEFAULT_RESULT_LIMIT,
            prompts: PromptSet::builtin(),
        }
    }
}

impl SolveConfig {
    pub fn with_tools<I: IntoIterator<Item = S>, S: Into<String>>(mut self, enabled: I) -> Self {
        self.enabled_tools = enabled.into_iter().map(Into::into).collect();
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if self.max_steps == 0 {
            return Err(SolveError::Config("max_steps must be at least 1".into()));
        }
        if self.max_time.is_nan() || self.max_time <= 0.0 {
            return Err(SolveError::Config("max_time must be positive".into()));
        }
        if let Some(missing) = self
            .base_tools
            .iter()
            .find(|b| !self.enabled_tools.contains(*b))
        {
            return Err(SolveError::Config(format!(
                "base tool `{missing}` is not enabled"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub steps_used: usize,
    /// Steps whose tool is not the generalist base tool.
    pub external_tool_calls: usize,
    pub base_tool_calls: usize,
    pub cost: f64,
    pub wall_clock: f64,
}

impl SolveStats {
    pub fn from_trajectory(t: &Trajectory) -> Self {
        let base_tool_calls = t
            .steps
            .iter()
            .filter(|s| s.action.tool_name == BASE_TOOL)
            .count();
        Self {
            steps_used: t.steps.len(),
            external_tool_calls: t.steps.len() - base_tool_calls,
            base_tool_calls,
            cost: t.totals.cost,
            wall_clock: t.totals.wall_clock + t.totals.summary_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub trajectory: Trajectory,
    pub answer_text: String,
    pub termination: Termination,
    pub stats: SolveStats,
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("invalid solve configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Infrastructure(StepError),
}

/// First 12 hex characters of SHA-256 over the query and image path.
pub fn query_id(query: &str, image: Option<&Path>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(query.as_bytes());
    hasher.update([0u8]);
    if let Some(image) = image {
        hasher.update(image.to_string_lossy().as_bytes());
    }
    hex::encode(hasher.finalize())[..12].to_string()
}

pub fn solve(
    query: &str,
    image: Option<&Path>,
    config: &SolveConfig,
    registry: &ToolRegistry,
    engine: Arc<dyn Engine>,
) -> Result<Solution, SolveError> {
    solve_with_clock(
        query,
        image,
        config,
        registry,
        engine,
        &SystemClock::default(),
    )
}

fn failed_step(
    index: usize,
    action: crate::planner::Action,
    message: String,
    status: StepStatus,
) -> (StepExecution, StepStatus, crate::planner::Action, usize) {
    (
        StepExecution {
            command_text: String::new(),
            command: None,
            results: vec![ToolResult::error(message, 0.0)],
            analysis: String::new(),
            explanation: String::new(),
            duration: 0.0,
            timed_out: false,
        },
        status,
        action,
        index,
    )
}

/// [`solve`] with an explicit clock for timestamps, durations and budgets.
pub fn solve_with_clock(
    query: &str,
    image: Option<&Path>,
    config: &SolveConfig,
    registry: &ToolRegistry,
    engine: Arc<dyn Engine>,
    clock: &dyn Clock,
) -> Result<Solution, SolveError> {
    config.validate()?;
    registry.check_known(&config.enabled_tools)?;
    if query.trim().is_empty() {
        return Err(SolveError::InvalidInput("query is empty".into()));
    }
    if let Some(path) = image.filter(|p| !p.is_file()) {
        return Err(SolveError::InvalidInput(format!(
            "image `{}` does not exist",
            path.display()
        )));
    }

    let meter = Arc::new(UsageMeter::new(engine));
    let metered: Arc<dyn Engine> = meter.clone();
    let id = query_id(query, image);
    let query_dir = config.cache_dir.join(&id);
    let mut trajectory = Trajectory::new(id, query, image.map(Path::to_path_buf));
    let planner = Planner::new(
        metered.as_ref(),
        registry,
        &config.enabled_tools,
        &config.prompts,
    )?
    .with_result_limit(config.result_limit);

    let start = clock.seconds();
    let deadline = start + config.max_time;
    let over_budget = || clock.seconds() >= deadline;

    let termination = 'run: {
        let plan = match planner.analyze_query(query, image) {
            Ok(plan) => plan,
            Err(err) => {
                tracing::error!(error = %err, "query analysis failed");
                break 'run Termination::EngineFailure;
            }
        };
        trajectory.initial_plan = Some(plan.clone());
        for step in 1..=config.max_steps {
            if over_budget() {
                break 'run Termination::TimeBudget;
            }
            let started_at = clock.now();
            let (execution, status, action, index) = match planner.predict_action(
                query,
                image,
                &plan,
                &trajectory,
                step,
                config.max_steps,
            ) {
                Ok(action) => {
                    if over_budget() {
                        break 'run Termination::TimeBudget;
                    }
                    let request = StepRequest {
                        query,
                        image,
                        action: &action,
                        registry,
                        engine: Arc::clone(&metered),
                        prompts: &config.prompts,
                        clock,
                        deadline: Some(deadline),
                        query_dir: query_dir.clone(),
                        step_dir: query_dir.join(format!("step_{step}")),
                    };
                    match run_step(&request) {
                        Ok(execution) => {
                            let status = if execution.command.is_none() {
                                StepStatus::CommandParseFailure
                            } else if execution.timed_out {
                                StepStatus::Timeout
                            } else {
                                StepStatus::Ok
                            };
                            (execution, status, action, step)
                        }
                        Err(StepError::Engine(err)) => {
                            tracing::error!(error = %err, step, "command generation failed");
                            break 'run Termination::EngineFailure;
                        }
                        Err(other) => return Err(SolveError::Infrastructure(other)),
                    }
                }
                Err(PlannerError::ActionParseFailure { partial, reason }) => failed_step(
                    step,
                    *partial,
                    format!("action parse failure: {reason}"),
                    StepStatus::ActionParseFailure,
                ),
                Err(PlannerError::Engine(err)) => {
                    tracing::error!(error = %err, step, "action prediction failed");
                    break 'run Termination::EngineFailure;
                }
                Err(PlannerError::Registry(err)) => return Err(err.into()),
            };
            let timed_out = execution.timed_out;
            let record = StepRecord {
                index,
                action,
                execution,
                status,
                started_at,
                ended_at: clock.now(),
            };
            trajectory
                .append_step(record)
                .expect("steps are appended with consecutive indices");
            if timed_out || over_budget() {
                break 'run Termination::TimeBudget;
            }
            match planner.verify_context(query, image, &plan, &trajectory) {
                Ok(verdict) => {
                    let stop = verdict.stop_signal;
                    trajectory.verdicts.push(verdict);
                    if stop {
                        break 'run Termination::VerifierStop;
                    }
                }
                Err(err) => {
                    tracing::error!(error = %err, step, "verification failed");
                    break 'run Termination::EngineFailure;
                }
            }
        }
        Termination::MaxSteps
    };
    trajectory.totals.wall_clock = clock.seconds() - start;

    if termination != Termination::EngineFailure {
        let summary_start = clock.seconds();
        let mut answer = match planner.summarize(query, image, &trajectory) {
            Ok(answer) => answer,
            Err(err) => {
                tracing::error!(error = %err, "summarization failed");
                FinalAnswer {
                    failed: true,
                    ..Default::default()
                }
            }
        };
        answer.budget_exhausted =
            matches!(termination, Termination::MaxSteps | Termination::TimeBudget);
        trajectory.final_answer = Some(answer);
        trajectory.totals.summary_time = clock.seconds() - summary_start;
    }
    trajectory.termination = Some(termination);
    trajectory.totals.cost = meter.total_cost();

    if query_dir.is_dir() {
        if let Err(err) = trajectory.save(&query_dir.join("trajectory.json")) {
            tracing::warn!(error = %err, "could not persist trajectory in the cache directory");
        }
    }
    Ok(finish(trajectory, termination))
}

fn finish(trajectory: Trajectory, termination: Termination) -> Solution {
    let answer_text = trajectory
        .final_answer
        .as_ref()
        .map(|a| a.text.clone())
        .unwrap_or_default();
    Solution {
        stats: SolveStats::from_trajectory(&trajectory),
        trajectory,
        answer_text,
        termination,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectMode {
    ZeroShot,
    ChainOfThought,
}

pub const CHAIN_OF_THOUGHT_INSTRUCTION: &str = "Think step by step.";

pub fn direct_prompt(query: &str, mode: DirectMode) -> String {
    match mode {
        DirectMode::ZeroShot => query.to_string(),
        DirectMode::ChainOfThought => format!("{CHAIN_OF_THOUGHT_INSTRUCTION}\n\n{query}"),
    }
}

/// Single-call baseline without the tool loop.
pub fn solve_direct(
    query: &str,
    image: Option<&Path>,
    mode: DirectMode,
    engine: Arc<dyn Engine>,
) -> Solution {
    solve_direct_with_clock(query, image, mode, engine, &SystemClock::default())
}

pub fn solve_direct_with_clock(
    query: &str,
    image: Option<&Path>,
    mode: DirectMode,
    engine: Arc<dyn Engine>,
    clock: &dyn Clock,
) -> Solution {
    let meter = UsageMeter::new(engine);
    let mut trajectory =
        Trajectory::new(query_id(query, image), query, image.map(Path::to_path_buf));
    let mut request = EngineRequest::new(tags::DIRECT_SOLVER, direct_prompt(query, mode));
    if let Some(path) = image {
        request = request.with_image(path);
    }
    let start = clock.seconds();
    let termination = match meter.complete(&request) {
        Ok(response) => {
            trajectory.final_answer = Some(FinalAnswer::from_response(&response.text));
            Termination::VerifierStop
        }
        Err(err) => {
            tracing::error!(error = %err, "direct solve failed");
            trajectory.final_answer = Some(FinalAnswer {
                failed: true,
                ..Default::default()
            });
            Termination::EngineFailure
        }
    };
    trajectory.totals.wall_clock = clock.seconds() - start;
    trajectory.totals.cost = meter.total_cost();
    trajectory.termination = Some(termination);
    finish(trajectory, termination)
}
