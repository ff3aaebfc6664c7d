mod common;

use std::path::Path;

use serde_json::json;

use common::*;
use toolcards::cli::{run, EXIT_OK, EXIT_USAGE};
use toolcards::engine::PlaybookEntry;
use toolcards::{Termination, Trajectory, BASE_TOOL};

const PYTHON: &str = "Python_Code_Generator_Tool";

fn run_args(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(
        std::iter::once("toolcards").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn solve_baseball(out: &Path) -> (i32, String) {
    let q = replay_query("baseball");
    let config = replay_dir("baseball").join("config.toml");
    let image = q.image.unwrap();
    let (code, stdout, err) = run_args(&[
        "solve",
        "--config",
        path(&config),
        "--query",
        &q.query,
        "--image",
        path(&image),
        "--out",
        path(out),
    ]);
    assert!(err.is_empty(), "{err}");
    (code, stdout)
}

#[test]
fn solve_writes_trajectory_and_prints_answer() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout) = solve_baseball(dir.path());
    assert_eq!(code, EXIT_OK);
    assert!(
        stdout.starts_with("Termination: verifier_stop after 2 step(s)"),
        "{stdout}"
    );
    let answer = stdout.split("Final Answer:").nth(1).unwrap();
    assert!(answer.contains("20"), "{answer}");
    let trajectory = Trajectory::load(&dir.path().join("trajectory.json")).unwrap();
    assert_eq!(trajectory.steps.len(), 2);
    assert_eq!(trajectory.termination, Some(Termination::VerifierStop));
}

#[test]
fn max_steps_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let entries = never_stop(BASE_TOOL, "execution = tool.execute(prompt=\"again\")");
    write_json(&dir.path().join("playbook.json"), &entries);
    std::fs::write(
        dir.path().join("config.toml"),
        format!("[tools]\nenabled = [\"{BASE_TOOL}\"]\n\n[engine]\nkind = \"scripted\"\nplaybook = \"playbook.json\"\nstrict = false\n"),
    )
    .unwrap();
    let out = dir.path().join("out");
    let (code, stdout, _) = run_args(&[
        "solve",
        "--config",
        path(&dir.path().join("config.toml")),
        "--query",
        "Loop forever?",
        "--max-steps",
        "1",
        "--out",
        path(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(
        stdout.starts_with("Termination: max_steps after 1 step(s)"),
        "{stdout}"
    );
    let trajectory = Trajectory::load(&out.join("trajectory.json")).unwrap();
    assert_eq!(trajectory.steps.len(), 1);

    let (code, _, err) = run_args(&[
        "solve",
        "--config",
        path(&dir.path().join("config.toml")),
        "--query",
        "x",
        "--max-steps",
        "0",
    ]);
    assert_eq!(code, EXIT_USAGE, "{err}");
}

/// A playbook that reaches `right` only when the calculator is in the
/// toolbox and answers `fallback` otherwise.
fn calculator_playbook(right: &str, fallback: &str) -> Vec<PlaybookEntry> {
    vec![
        PlaybookEntry::new("query_analyzer", "Required skills:\n1. Arithmetic"),
        PlaybookEntry::new("action_predictor", action(PYTHON, "compute it")).containing(PYTHON),
        PlaybookEntry::new("action_predictor", action(BASE_TOOL, "guess it")),
        PlaybookEntry::new(
            "command_generator",
            command("execution = tool.execute(query=\"compute it\")"),
        )
        .containing(PYTHON),
        PlaybookEntry::new(
            "command_generator",
            command("execution = tool.execute(prompt=\"guess it\")"),
        ),
        PlaybookEntry::new(format!("tool:{PYTHON}"), "```python\nprint(6 * 7)\n```"),
        PlaybookEntry::new(format!("tool:{BASE_TOOL}"), "Probably something."),
        PlaybookEntry::new("context_verifier", verdict(true)),
        PlaybookEntry::new("solution_summarizer", summary(right)).containing(PYTHON),
        PlaybookEntry::new("solution_summarizer", summary(fallback)),
    ]
}

#[test]
fn optimize_selects_the_tool_that_helps() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("a", "42", "42", "unknown"),
        ("b", "42", "42", "unknown"),
        ("c", "7", "7", "7"),
        ("d", "13", "unknown", "unknown"),
    ];
    let mut dataset = String::new();
    for (id, answer, with_tool, without) in cases {
        write_json(
            &dir.path().join(format!("playbooks/{id}.json")),
            &calculator_playbook(with_tool, without),
        );
        dataset.push_str(&format!(
            "{}\n",
            json!({"example_id": id, "question": format!("Question {id}?"), "answer": answer})
        ));
    }
    std::fs::write(dir.path().join("data.jsonl"), dataset).unwrap();
    std::fs::write(
        dir.path().join("config.toml"),
        format!("[tools]\nenabled = [\"{BASE_TOOL}\", \"{PYTHON}\"]\n\n[engine]\nkind = \"scripted\"\nplaybook = \"playbooks\"\nstrict = false\n"),
    )
    .unwrap();
    let out = dir.path().join("out");
    let args = |val_n: &'static str| {
        vec![
            "optimize".to_string(),
            "--config".into(),
            path(&dir.path().join("config.toml")).into(),
            "--dataset".into(),
            path(&dir.path().join("data.jsonl")).into(),
            "--val-n".into(),
            val_n.into(),
            "--out".into(),
            path(&out).into(),
        ]
    };
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let code = run(
        std::iter::once("toolcards".to_string()).chain(args("4")),
        &mut stdout,
        &mut stderr,
    );
    let stdout = String::from_utf8(stdout).unwrap();
    assert_eq!(code, EXIT_OK, "{}", String::from_utf8_lossy(&stderr));
    assert!(
        stdout.contains(&format!("Optimized toolset: {BASE_TOOL}, {PYTHON}")),
        "{stdout}"
    );
    assert!(stdout.contains("+0.500"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("optimization.json")).unwrap())
            .unwrap();
    // Every registered non-base card is a candidate; only the calculator helps.
    let candidates = report["candidates"].as_object().unwrap();
    assert_eq!(candidates.len(), 8);
    assert_eq!(
        candidates
            .values()
            .filter(|c| c["delta"].as_f64().unwrap() != 0.0)
            .count(),
        1
    );
    assert_eq!(candidates[PYTHON]["delta"], 0.5);

    let code = run(
        std::iter::once("toolcards".to_string()).chain(args("0")),
        &mut Vec::new(),
        &mut Vec::new(),
    );
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn inspect_lists_steps_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    solve_baseball(dir.path());
    let trajectory = dir.path().join("trajectory.json");
    let (code, text, _) = run_args(&["inspect", "--trajectory", path(&trajectory)]);
    assert_eq!(code, EXIT_OK);
    let one = text.find("Action Step 1").unwrap();
    let two = text.find("Action Step 2").unwrap();
    assert!(one < two);
    assert!(text.contains("Object_Detector_Tool"));

    let (code, stats, _) = run_args(&[
        "inspect",
        "--trajectory",
        path(&trajectory),
        "--format",
        "stats",
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(stats.contains("External tool fraction: 1.000"), "{stats}");
    assert!(stats.contains("Steps: 2"), "{stats}");
}

#[test]
fn tools_lists_configured_cards() {
    let config = replay_dir("agentic").join("config.toml");
    let (code, text, _) = run_args(&["tools", "--config", path(&config)]);
    assert_eq!(code, EXIT_OK);
    for name in [
        BASE_TOOL,
        "Google_Search_Tool",
        "Wikipedia_Knowledge_Searcher_Tool",
        "URL_Text_Extractor_Tool",
    ] {
        assert!(text.contains(name), "{name} missing:\n{text}");
    }
    assert_eq!(text.matches("(base)").count(), 1);
    assert!(text.lines().next().unwrap().starts_with(BASE_TOOL));

    let (code, json_text, _) = run_args(&["tools", "--config", path(&config), "--json"]);
    assert_eq!(code, EXIT_OK);
    let cards: serde_json::Value = serde_json::from_str(&json_text).unwrap();
    let cards = cards.as_array().unwrap();
    // Every built-in card is registered; `enabled` only narrows solves.
    assert_eq!(cards.len(), 9);
    assert_eq!(cards.iter().filter(|c| c["base"] == true).count(), 1);
    assert!(cards
        .iter()
        .all(|c| c["digest"].as_str().unwrap().len() == 12));
}
