#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::Value;
use toolcards::clock::TickClock;
use toolcards::config::Config;
use toolcards::controller::solve_with_clock;
use toolcards::engine::PlaybookEntry;
use toolcards::{Solution, ToolMetadata};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn replay_dir(name: &str) -> PathBuf {
    fixtures().join("replays").join(name)
}

pub struct ReplayQuery {
    pub query: String,
    pub image: Option<PathBuf>,
    pub answer: String,
}

/// The query, optional image and reference answer recorded for a replay.
pub fn replay_query(name: &str) -> ReplayQuery {
    let text = std::fs::read_to_string(fixtures().join("replays/queries.json")).unwrap();
    let all: Value = serde_json::from_str(&text).unwrap();
    let entry = &all[name];
    ReplayQuery {
        query: entry["query"].as_str().unwrap().to_string(),
        image: entry["image"]
            .as_str()
            .map(|p| fixtures().join("replays").join(p)),
        answer: entry["answer"].as_str().unwrap().to_string(),
    }
}

/// Runs a replay from its directory's `config.toml` on a tick clock.
pub fn run_replay(name: &str, cache: &Path) -> Solution {
    let mut config = Config::load(Some(&replay_dir(name).join("config.toml"))).unwrap();
    config.solve.cache_dir = Some(cache.to_path_buf());
    let registry = config.registry().unwrap();
    let solve_config = config.solve_config(&registry).unwrap();
    let engine = config.engine(None).unwrap();
    let q = replay_query(name);
    solve_with_clock(
        &q.query,
        q.image.as_deref(),
        &solve_config,
        &registry,
        engine,
        &TickClock::default(),
    )
    .unwrap()
}

pub fn tools_used(solution: &Solution) -> Vec<String> {
    solution
        .trajectory
        .steps
        .iter()
        .map(|s| s.action.tool_name.clone())
        .collect()
}

pub fn action(tool: &str, sub_goal: &str) -> String {
    format!("<justification>: {tool} fits this step.\n<context>: none\n<sub_goal>: {sub_goal}\n<tool_name>: {tool}\n")
}

pub fn command(code: &str) -> String {
    format!(
        "<analysis>: direct call\n<explanation>: one call\n<command>:\n```python\n{code}\n```\n"
    )
}

pub fn verdict(stop: bool) -> String {
    let signal = if stop { "True" } else { "False" };
    format!("<analysis>: checked\n<stop_signal>: {signal}\n")
}

pub fn summary(answer: &str) -> String {
    format!("1. Summary:\nDone.\n\n4. Answer to the Query:\n{answer}\n\n5. Additional Insights:\nNone.\n")
}

/// A lenient playbook that always calls `tool` and never lets the verifier
/// stop.
pub fn never_stop(tool: &str, code: &str) -> Vec<PlaybookEntry> {
    vec![
        PlaybookEntry::new(
            "query_analyzer",
            "Required skills:\n1. Patience\n\nRelevant tools:\n1. Any",
        ),
        PlaybookEntry::new("action_predictor", action(tool, "keep going")),
        PlaybookEntry::new("command_generator", command(code)),
        PlaybookEntry::new(format!("tool:{tool}"), "still working"),
        PlaybookEntry::new("context_verifier", verdict(false)),
        PlaybookEntry::new("solution_summarizer", summary("unknown")),
    ]
}

/// Metadata for a test card taking one string `query`.
pub fn query_card(name: &str) -> ToolMetadata {
    serde_json::from_value(serde_json::json!({
        "tool_name": name,
        "tool_description": "A test card.",
        "input_types": {"query": "str - anything"},
        "output_type": "str",
        "demo_commands": [{"command": "execution = tool.execute(query=\"x\")", "description": "call it"}],
    }))
    .unwrap()
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).unwrap();
    }
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

pub fn shared<T: toolcards::Engine + 'static>(engine: T) -> Arc<dyn toolcards::Engine> {
    Arc::new(engine)
}
