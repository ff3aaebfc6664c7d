//! Command generation and execution: turns an [`Action`] into a validated
//! [`CommandScript`] and runs it against the selected card.

mod script;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};

use crate::clock::Clock;
use crate::engine::{
    extract_code_block, parse_tagged_fields, tags, Engine, EngineError, EngineRequest,
};
use crate::planner::{image_slot, Action, PromptSet};
use crate::toolbox::{
    validate_args, RegistryError, ToolArgs, ToolCard, ToolContext, ToolMetadata, ToolResult,
};

pub use script::{
    parse_script, render_statements, CommandScript, Expr, RuleViolation, ScriptError, Statement,
    StatementKind, EXEC_TARGET,
};

/// Everything recorded about one executed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepExecution {
    /// The script text exactly as generated.
    pub command_text: String,
    /// Parsed script; absent when generation never produced a valid one.
    pub command: Option<CommandScript>,
    /// One result per exec call, in call order.
    pub results: Vec<ToolResult>,
    pub analysis: String,
    pub explanation: String,
    pub duration: f64,
    pub timed_out: bool,
}

impl StepExecution {
    /// The result bound to `execution` last, which is the step's output.
    pub fn primary(&self) -> Option<&ToolResult> {
        self.results.last()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StepError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("step directory {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedCommand {
    pub analysis: String,
    pub explanation: String,
    pub script_text: String,
}

const COMMAND_FIELDS: [&str; 3] = ["analysis", "explanation", "command"];

/// Renders the command-generation prompt. `correction` is appended when a
/// previous attempt failed to parse.
pub fn command_prompt(
    prompts: &PromptSet,
    query: &str,
    image: Option<&Path>,
    action: &Action,
    metadata: &ToolMetadata,
    correction: Option<&str>,
) -> String {
    let mut prompt = PromptSet::fill(
        &prompts.command_generator,
        &[
            ("question", query),
            ("image", &image_slot(image)),
            ("context", &action.context),
            ("sub_goal", &action.sub_goal),
            ("tool_name", &action.tool_name),
            ("tool_metadata", &metadata.render()),
        ],
    );
    if let Some(reason) = correction {
        prompt.push_str(&format!(
            "\n\nYour previous command was rejected: {reason}\nReturn a corrected <command> that follows the rules exactly."
        ));
    }
    prompt
}

pub fn generate_command(
    engine: &dyn Engine,
    prompt: String,
) -> Result<GeneratedCommand, EngineError> {
    let response =
        engine.complete(&EngineRequest::new(tags::COMMAND_GENERATOR, prompt).deterministic())?;
    let fields = parse_tagged_fields(&response.text, &COMMAND_FIELDS);
    let command_part = fields
        .get("command")
        .cloned()
        .unwrap_or_else(|| response.text.clone());
    Ok(GeneratedCommand {
        analysis: fields.get("analysis").cloned().unwrap_or_default(),
        explanation: fields.get("explanation").cloned().unwrap_or_default(),
        script_text: extract_code_block(&command_part),
    })
}

fn eval(expr: &Expr, env: &HashMap<String, Result<Value, String>>) -> Result<Value, String> {
    Ok(match expr {
        Expr::Str(s) => Value::String(s.clone()),
        Expr::Int(v) => Value::from(*v),
        Expr::Float(v) => Number::from_f64(*v)
            .map(Value::Number)
            .unwrap_or(Value::Null),
        Expr::Bool(b) => Value::Bool(*b),
        Expr::Null => Value::Null,
        Expr::Ident(name) => match env.get(name) {
            Some(bound) => bound.clone()?,
            None => return Err(format!("name `{name}` is not defined")),
        },
        Expr::Index(name, index) => {
            let bound = match env.get(name) {
                Some(bound) => bound.clone()?,
                None => return Err(format!("name `{name}` is not defined")),
            };
            let Value::Array(items) = bound else {
                return Err(format!("`{name}` is not a list"));
            };
            let len = items.len() as i64;
            let at = if *index < 0 { len + index } else { *index };
            if !(0..len).contains(&at) {
                return Err(format!(
                    "index {index} out of range for `{name}` of length {len}"
                ));
            }
            items[at as usize].clone()
        }
        Expr::List(items) => Value::Array(
            items
                .iter()
                .map(|e| eval(e, env))
                .collect::<Result<_, _>>()?,
        ),
        Expr::Map(entries) => Value::Object(
            entries
                .iter()
                .map(|(k, e)| Ok((k.clone(), eval(e, env)?)))
                .collect::<Result<_, String>>()?,
        ),
    })
}

fn relative_to(path: &Path, root: &Path) -> PathBuf {
    path.strip_prefix(root)
        .map(Path::to_path_buf)
        .unwrap_or_else(|_| path.to_path_buf())
}

fn call_card(
    card: &Arc<dyn ToolCard>,
    args: ToolArgs,
    ctx: &ToolContext,
    clock: &dyn Clock,
    remaining: Option<f64>,
) -> (ToolResult, bool) {
    let start = clock.seconds();
    let outcome = match remaining {
        None => Ok(card.execute(&args, ctx)),
        Some(budget) => {
            let (tx, rx) = mpsc::channel();
            let worker_card = Arc::clone(card);
            let worker_ctx = ctx.clone();
            std::thread::spawn(move || {
                let _ = tx.send(worker_card.execute(&args, &worker_ctx));
            });
            rx.recv_timeout(Duration::from_secs_f64(budget.max(0.0)))
        }
    };
    let elapsed = clock.seconds() - start;
    match outcome {
        Ok(Ok(output)) => {
            let artifacts = output
                .artifacts
                .iter()
                .map(|p| relative_to(p, &ctx.root_dir))
                .collect();
            (ToolResult::ok(output.payload, artifacts, elapsed), false)
        }
        Ok(Err(err)) => (ToolResult::error(err.to_string(), elapsed), false),
        Err(RecvTimeoutError::Timeout) => (
            ToolResult::error(
                format!(
                    "timeout: tool call exceeded the remaining budget of {:.3}s",
                    remaining.unwrap_or(0.0)
                ),
                elapsed,
            ),
            true,
        ),
        Err(RecvTimeoutError::Disconnected) => (
            ToolResult::error("tool panicked during execution", elapsed),
            false,
        ),
    }
}

/// Evaluates bindings and runs every exec call in order.
///
/// `deadline` is in [`Clock::seconds`] units; a call still running when it
/// passes is abandoned and a timeout result is appended. Argument and tool
/// errors become error results and later calls still run.
pub fn execute_script(
    script: &CommandScript,
    card: &Arc<dyn ToolCard>,
    ctx: &ToolContext,
    clock: &dyn Clock,
    deadline: Option<f64>,
) -> Result<StepExecution, StepError> {
    let start = clock.seconds();
    std::fs::create_dir_all(&ctx.work_dir).map_err(|source| StepError::Io {
        path: ctx.work_dir.clone(),
        source,
    })?;
    let script_path = ctx.work_dir.join("command.txt");
    std::fs::write(&script_path, &script.raw).map_err(|source| StepError::Io {
        path: script_path,
        source,
    })?;

    let mut env: HashMap<String, Result<Value, String>> = HashMap::new();
    let mut results = Vec::new();
    let mut timed_out = false;
    for stmt in &script.statements {
        match stmt {
            Statement::Binding { target, value } => {
                env.insert(target.clone(), eval(value, &env));
            }
            Statement::ExecAssign { kwargs } => {
                let remaining = deadline.map(|d| d - clock.seconds());
                if remaining.is_some_and(|r| r <= 0.0) {
                    results.push(ToolResult::error(
                        "timeout: time budget exhausted before the tool call",
                        0.0,
                    ));
                    timed_out = true;
                    break;
                }
                let args: Result<ToolArgs, String> = kwargs
                    .iter()
                    .map(|(k, e)| Ok((k.clone(), eval(e, &env)?)))
                    .collect();
                let args = match args
                    .map_err(|e| e.to_string())
                    .and_then(|a| validate_args(card.metadata(), &a).map_err(|e| e.to_string()))
                {
                    Ok(args) => args,
                    Err(message) => {
                        results.push(ToolResult::error(message, 0.0));
                        continue;
                    }
                };
                let (result, expired) = call_card(card, args, ctx, clock, remaining);
                results.push(result);
                if expired {
                    timed_out = true;
                    break;
                }
            }
        }
    }
    Ok(StepExecution {
        command_text: script.raw.clone(),
        command: Some(script.clone()),
        results,
        analysis: String::new(),
        explanation: String::new(),
        duration: clock.seconds() - start,
        timed_out,
    })
}

/// Inputs for one generate, parse and execute round.
pub struct StepRequest<'a> {
    pub query: &'a str,
    pub image: Option<&'a Path>,
    pub action: &'a Action,
    pub registry: &'a crate::toolbox::ToolRegistry,
    pub engine: Arc<dyn Engine>,
    pub prompts: &'a PromptSet,
    pub clock: &'a dyn Clock,
    pub deadline: Option<f64>,
    /// `<cache_dir>/<query_id>`.
    pub query_dir: PathBuf,
    /// `<cache_dir>/<query_id>/step_<k>`.
    pub step_dir: PathBuf,
}

/// Generates, parses and executes one step. A script that fails to parse
/// gets one corrective regeneration; a second failure yields an execution
/// whose single result is the parse error.
pub fn run_step(req: &StepRequest<'_>) -> Result<StepExecution, StepError> {
    let start = req.clock.seconds();
    let card = req.registry.get(&req.action.tool_name)?;
    let metadata = card.metadata();
    let mut correction: Option<String> = None;
    let mut generated;
    let mut attempt = 0;
    let script = loop {
        let prompt = command_prompt(
            req.prompts,
            req.query,
            req.image,
            req.action,
            metadata,
            correction.as_deref(),
        );
        generated = generate_command(req.engine.as_ref(), prompt)?;
        match parse_script(&generated.script_text) {
            Ok(script) => break script,
            Err(err) if attempt == 0 => {
                tracing::warn!(tool = %req.action.tool_name, error = %err, "command rejected, regenerating");
                correction = Some(err.to_string());
                attempt += 1;
            }
            Err(err) => {
                return Ok(StepExecution {
                    command_text: generated.script_text,
                    command: None,
                    results: vec![ToolResult::error(
                        format!("command parse error: {err}"),
                        0.0,
                    )],
                    analysis: generated.analysis,
                    explanation: generated.explanation,
                    duration: req.clock.seconds() - start,
                    timed_out: false,
                });
            }
        }
    };
    let mut input_dirs = Vec::new();
    if let Some(parent) = req.image.and_then(Path::parent) {
        input_dirs.push(parent.to_path_buf());
    }
    let ctx = ToolContext {
        engine: Arc::clone(&req.engine),
        work_dir: req.step_dir.clone(),
        root_dir: req.query_dir.clone(),
        input_dirs,
    };
    let mut execution = execute_script(&script, card, &ctx, req.clock, req.deadline)?;
    execution.analysis = generated.analysis;
    execution.explanation = generated.explanation;
    execution.duration = req.clock.seconds() - start;
    Ok(execution)
}
