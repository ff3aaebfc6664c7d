//! Greedy toolset selection on a small synthetic validation set. Each
//! example has its own scripted playbook that only reaches the right answer
//! when the calculator is in the toolbox.
//!
//! cargo run --example optimize_toolset

use std::collections::BTreeSet;
use std::sync::Arc;

use anyhow::Result;
use toolcards::bench::{AgentSolver, Example, ScoreMode, Scorer};
use toolcards::builtin_tools::{default_registry, net::FixtureTransport};
use toolcards::engine::{Playbook, PlaybookEntry, ScriptedEngine};
use toolcards::optimizer::{optimize_toolset, OptimizeOptions};
use toolcards::{Engine, SolveConfig, BASE_TOOL};

const CALC: &str = "Python_Code_Generator_Tool";

fn action(tool: &str) -> String {
    format!("<justification>: fits\n<context>: none\n<sub_goal>: answer the question\n<tool_name>: {tool}")
}

fn command(code: &str) -> String {
    format!("<analysis>: one call\n<explanation>: direct\n<command>:\n```python\n{code}\n```")
}

fn summary(answer: &str) -> String {
    format!("1. Summary:\nDone.\n\n4. Answer to the Query:\n{answer}\n")
}

/// Right answer with the calculator available, a guess without it.
fn playbook(example: &Example) -> Arc<dyn Engine> {
    let (right, guess) = match example.example_id.as_str() {
        "easy" => ("12", "12"),
        "hard" => ("unknown", "unknown"),
        _ => (example.answer.as_str(), "unknown"),
    };
    Arc::new(ScriptedEngine::new(Playbook::lenient(vec![
        PlaybookEntry::new("query_analyzer", "Required skills:\n1. Arithmetic"),
        PlaybookEntry::new("action_predictor", action(CALC)).containing(CALC),
        PlaybookEntry::new("action_predictor", action(BASE_TOOL)),
        PlaybookEntry::new(
            "command_generator",
            command("execution = tool.execute(query=\"compute\")"),
        )
        .containing(CALC),
        PlaybookEntry::new(
            "command_generator",
            command("execution = tool.execute(prompt=\"guess\")"),
        ),
        PlaybookEntry::new(format!("tool:{CALC}"), "```python\nprint(6 * 7)\n```"),
        PlaybookEntry::new(format!("tool:{BASE_TOOL}"), "Probably something."),
        PlaybookEntry::new("context_verifier", "<analysis>: done\n<stop_signal>: True"),
        PlaybookEntry::new("solution_summarizer", summary(right)).containing(CALC),
        PlaybookEntry::new("solution_summarizer", summary(guess)),
    ])))
}

fn main() -> Result<()> {
    let registry = Arc::new(default_registry(Arc::new(FixtureTransport::new("unused")))?);
    let examples = vec![
        Example::new("mult-1", "What is 6 times 7?", "42"),
        Example::new("mult-2", "Compute 6 * 7.", "42"),
        Example::new("easy", "What is 3 times 4?", "12"),
        Example::new("hard", "Prove the Riemann hypothesis.", "QED"),
    ];
    let cache = std::env::temp_dir().join("toolcards-optimize");
    let config = SolveConfig {
        cache_dir: cache,
        ..SolveConfig::default()
    };
    let solver =
        AgentSolver::per_example(registry.clone(), |ex| Ok(playbook(ex))).with_tick_clock();
    let base = BTreeSet::from([BASE_TOOL.to_string()]);
    let report = optimize_toolset(
        &registry,
        &base,
        &examples,
        &OptimizeOptions::default(),
        &config,
        &solver,
        &Scorer::new(ScoreMode::Exact),
    )?;
    print!("{}", report.render_table());
    Ok(())
}
