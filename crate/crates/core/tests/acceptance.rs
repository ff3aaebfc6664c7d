//! One test per acceptance criterion. `cargo test --test acceptance` prints a
//! pass/fail line for each; the live smoke test is ignored unless asked for.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use common::*;
use toolcards::bench::{
    run_benchmark, AgentSolver, BenchOptions, Example, ExampleSolver, ScoreMode, Scorer,
    TrajectoryStats,
};
use toolcards::builtin_tools::calc::{self, CalcError, Limits};
use toolcards::builtin_tools::{CalculatorTool, GeneralistTool};
use toolcards::clock::SystemClock;
use toolcards::controller::{solve, solve_direct, DirectMode, SolveError};
use toolcards::engine::{FnEngine, Playbook, PlaybookEntry, ScriptedEngine};
use toolcards::executor::{execute_script, parse_script, Expr, RuleViolation, Statement};
use toolcards::memory::{StepStatus, Totals};
use toolcards::optimizer::{optimize_candidates, OptimizeOptions};
use toolcards::planner::{Action, FinalAnswer, InitialPlan, PromptSet, Verdict};
use toolcards::toolbox::{ScriptedTool, ToolStatus};
use toolcards::{
    Solution, SolveConfig, StepRecord, Termination, ToolCard, ToolContext, ToolRegistry,
    ToolResult, Trajectory, BASE_TOOL,
};

const BUDGET: Duration = Duration::from_secs(5);

fn within_budget(start: Instant) {
    let elapsed = start.elapsed();
    assert!(elapsed < BUDGET, "took {elapsed:?}");
}

// ---------------------------------------------------------------------------
// 1. Reference replays
// ---------------------------------------------------------------------------

/// Maximal runs of arithmetic characters that contain an operator.
fn arithmetic_runs(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_ascii_digit() || "()+-*/ ".contains(c)))
        .map(str::trim)
        .filter(|run| {
            run.chars().any(|c| "+-*/".contains(c))
                && run.chars().filter(char::is_ascii_digit).count() >= 2
        })
        .map(String::from)
        .collect()
}

/// True when some expression in `text` uses exactly 1, 1, 6 and 9 and
/// evaluates to 24, independently of how it is parenthesized.
fn contains_game24_solution(text: &str) -> bool {
    arithmetic_runs(text).iter().any(|expr| {
        let mut digits: Vec<char> = expr.chars().filter(char::is_ascii_digit).collect();
        digits.sort();
        let outcome = calc::run_source(&format!("print({expr})"), Limits::default());
        digits == ['1', '1', '6', '9']
            && outcome.error.is_none()
            && (outcome.stdout == "24" || outcome.stdout == "24.0")
    })
}

#[test]
fn criterion_1_reference_replays_match_step_counts_tools_and_answers() {
    let start = Instant::now();
    let cases: [(&str, usize, &[&str]); 3] = [
        (
            "baseball",
            2,
            &["Image_Captioner_Tool", "Object_Detector_Tool"],
        ),
        ("game24", 3, &["Python_Code_Generator_Tool"; 3]),
        (
            "agentic",
            5,
            &[
                "Wikipedia_Knowledge_Searcher_Tool",
                "Google_Search_Tool",
                "Wikipedia_Knowledge_Searcher_Tool",
                "Google_Search_Tool",
                "URL_Text_Extractor_Tool",
            ],
        ),
    ];
    for (name, steps, tools) in cases {
        let dir = tempfile::tempdir().unwrap();
        let solution = run_replay(name, dir.path());
        assert_eq!(solution.termination, Termination::VerifierStop, "{name}");
        assert_eq!(solution.trajectory.steps.len(), steps, "{name}");
        assert_eq!(tools_used(&solution), tools, "{name}");
        assert!(
            solution
                .trajectory
                .steps
                .iter()
                .all(|s| s.status == StepStatus::Ok),
            "{name}"
        );
        assert!(
            solution
                .trajectory
                .steps
                .iter()
                .all(|s| s.execution.primary().unwrap().is_ok()),
            "{name}"
        );

        let direct = &solution
            .trajectory
            .final_answer
            .as_ref()
            .unwrap()
            .direct_answer;
        match name {
            "game24" => assert!(contains_game24_solution(direct), "{direct}"),
            _ => assert!(
                direct
                    .split(|c: char| !c.is_ascii_digit())
                    .any(|t| t == replay_query(name).answer),
                "{direct}"
            ),
        }

        // Same inputs, same bytes.
        let again = run_replay(name, tempfile::tempdir().unwrap().path());
        assert_eq!(
            solution.trajectory.to_canonical_json(),
            again.trajectory.to_canonical_json(),
            "{name}"
        );
    }

    // The third game-of-24 program really finds the expression.
    let dir = tempfile::tempdir().unwrap();
    let game = run_replay("game24", dir.path());
    let printed = game.trajectory.steps[2]
        .execution
        .primary()
        .unwrap()
        .payload["execution_result"]
        .as_str()
        .unwrap()
        .to_string();
    assert!(contains_game24_solution(&printed), "{printed}");
    let first = game.trajectory.steps[0]
        .execution
        .primary()
        .unwrap()
        .payload["execution_result"]
        .as_str()
        .unwrap()
        .to_string();
    assert!(first.ends_with("-0.75"), "{first}");

    within_budget(start);
}

#[test]
fn expression_oracle_rejects_wrong_arithmetic() {
    assert!(contains_game24_solution("answer: ((1 + 1) * 9) + 6"));
    assert!(contains_game24_solution("6 + (9 * (1 + 1))"));
    assert!(!contains_game24_solution("(9 + 1) * (6 / 2)"));
    assert!(!contains_game24_solution("(6 * 9) / (1 + 1)"));
    assert!(!contains_game24_solution("6 * 4"));
}

// ---------------------------------------------------------------------------
// 2. Toolset optimization against a brute-force oracle
// ---------------------------------------------------------------------------

/// Answers correctly iff the enabled toolset's row says so; counts solves
/// per toolset.
struct Table {
    rows: BTreeMap<BTreeSet<String>, Vec<bool>>,
    calls: Mutex<BTreeMap<BTreeSet<String>, usize>>,
    total: AtomicUsize,
}

impl ExampleSolver for Table {
    fn solve(&self, example: &Example, config: &SolveConfig) -> Result<Solution, SolveError> {
        self.total.fetch_add(1, Ordering::SeqCst);
        *self
            .calls
            .lock()
            .unwrap()
            .entry(config.enabled_tools.clone())
            .or_default() += 1;
        let i: usize = example.example_id.parse().unwrap();
        let ok = self.rows[&config.enabled_tools][i];
        let answer = if ok {
            example.answer.clone()
        } else {
            "no idea".to_string()
        };
        Ok(solve_direct(
            &example.question,
            None,
            DirectMode::ZeroShot,
            Arc::new(FnEngine::new(move |_| Ok(answer.clone()))),
        ))
    }
}

fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[test]
fn criterion_2_optimizer_matches_brute_force_oracle() {
    let start = Instant::now();
    let n = 20;
    let examples: Vec<Example> = (0..n)
        .map(|i| Example::new(i.to_string(), format!("question {i}"), format!("answer{i}")))
        .collect();
    let base = set(&[BASE_TOOL]);
    let candidates: Vec<String> = ["Alpha", "Beta", "Gamma", "Delta", "Epsilon", "Zeta", "Eta"]
        .map(String::from)
        .to_vec();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let base_row: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    let mut rows = BTreeMap::new();
    rows.insert(base.clone(), base_row.clone());
    for (k, name) in candidates.iter().enumerate() {
        // Alternate helpful, neutral and harmful rows; neutral ones flip
        // pairs of answers so the count is unchanged.
        let mut row = base_row.clone();
        match k % 3 {
            0 => row.iter_mut().take(k + 2).for_each(|c| *c = true),
            1 => {
                let (t, f) = (
                    row.iter().position(|c| *c).unwrap(),
                    row.iter().position(|c| !*c).unwrap(),
                );
                row[t] = false;
                row[f] = true;
            }
            _ => row.iter_mut().take(5).for_each(|c| *c = false),
        }
        let mut toolset = base.clone();
        toolset.insert(name.clone());
        rows.insert(toolset, row);
    }

    // Oracle: score every singleton independently.
    let accuracy = |row: &Vec<bool>| row.iter().filter(|c| **c).count() as f64 / n as f64;
    let base_acc = accuracy(&base_row);
    let mut oracle_delta = BTreeMap::new();
    let mut oracle_selected = base.clone();
    for name in &candidates {
        let mut toolset = base.clone();
        toolset.insert(name.clone());
        let delta = accuracy(&rows[&toolset]) - base_acc;
        if delta > 0.0 {
            oracle_selected.insert(name.clone());
        }
        oracle_delta.insert(name.clone(), delta);
    }
    assert!(
        oracle_delta.values().any(|d| *d == 0.0),
        "the table must contain a zero-delta tool"
    );
    assert!(oracle_delta.values().any(|d| *d < 0.0) && oracle_delta.values().any(|d| *d > 0.0));

    let config =
        SolveConfig::default().with_tools(base.iter().cloned().chain(candidates.iter().cloned()));
    let scorer = Scorer::new(ScoreMode::Exact);
    let table = Table {
        rows: rows.clone(),
        calls: Mutex::new(BTreeMap::new()),
        total: AtomicUsize::new(0),
    };
    let report = optimize_candidates(
        &base,
        &candidates,
        &examples,
        &OptimizeOptions::default(),
        &config,
        &table,
        &scorer,
    )
    .unwrap();

    for name in &candidates {
        assert_eq!(report.candidates[name].delta, oracle_delta[name], "{name}");
        assert_eq!(
            report.candidates[name].selected,
            oracle_delta[name] > 0.0,
            "{name}"
        );
    }
    assert_eq!(report.selected, oracle_selected);
    assert_eq!(report.evaluations, candidates.len() + 1);
    assert_eq!(
        table.total.load(Ordering::SeqCst),
        (candidates.len() + 1) * n
    );
    let calls = table.calls.lock().unwrap().clone();
    assert_eq!(calls.len(), candidates.len() + 1);
    assert!(calls.values().all(|c| *c == n));

    // Every ordering of the candidates selects the same toolset.
    let mut order = candidates.clone();
    for seed in 0..6 {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let t = Table {
            rows: rows.clone(),
            calls: Mutex::new(BTreeMap::new()),
            total: AtomicUsize::new(0),
        };
        let permuted = optimize_candidates(
            &base,
            &order,
            &examples,
            &OptimizeOptions::default(),
            &config,
            &t,
            &scorer,
        )
        .unwrap();
        assert_eq!(permuted.selected, report.selected);
        assert_eq!(permuted.candidates, report.candidates);
        assert_eq!(permuted.ordering, order);
    }
    within_budget(start);
}

// ---------------------------------------------------------------------------
// 3. Command grammar
// ---------------------------------------------------------------------------

const POSITIVE: [(&str, usize); 3] = [
    ("execution = tool.execute(image=\"path/to/image\", labels=[\"baseball\"])", 1),
    (
        "image = \"path/to/image\"\nlabels = [\"baseball\", \"football\", \"basketball\"]\nthreshold = 0.5\nexecution = tool.execute(image=image, labels=labels, threshold=threshold)",
        1,
    ),
    (
        "execution = tool.execute(image=\"path/to/image1\", labels=[\"baseball\"], threshold=0.5)\nexecution = tool.execute(image=\"path/to/image2\", labels=[\"baseball\"], threshold=0.5)\nexecution = tool.execute(image=\"path/to/image3\", labels=[\"baseball\"], threshold=0.5)",
        3,
    ),
];

const NUMBERED_TARGETS: &str =
    "execution1 = tool.execute(query=\"...\")\nexecution2 = tool.execute(query=\"...\")";
const PER_ITEM: &str = "urls = [\n    \"https://example.com/article1\",\n    \"https://example.com/article2\"\n]\n\nexecution = tool.execute(url=urls[0])\nexecution = tool.execute(url=urls[1])";

fn ident() -> impl Strategy<Value = String> {
    (0usize..6).prop_map(|i| format!("v{i}"))
}

fn literal() -> impl Strategy<Value = Expr> {
    prop_oneof![
        any::<String>().prop_map(Expr::Str),
        any::<i64>().prop_map(Expr::Int),
        any::<f64>()
            .prop_filter("finite", |f| f.is_finite())
            .prop_map(Expr::Float),
        any::<bool>().prop_map(Expr::Bool),
        Just(Expr::Null),
    ]
}

fn value() -> impl Strategy<Value = Expr> {
    literal().prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 0..4).prop_map(Expr::List),
            proptest::collection::vec(("[a-z ]{0,6}", inner), 0..4).prop_map(|entries| {
                let mut seen = BTreeSet::new();
                Expr::Map(
                    entries
                        .into_iter()
                        .filter(|(k, _)| seen.insert(k.clone()))
                        .collect(),
                )
            }),
        ]
    })
}

fn kwargs(refs: Vec<String>) -> impl Strategy<Value = Vec<(String, Expr)>> {
    let arg = if refs.is_empty() {
        value().boxed()
    } else {
        prop_oneof![
            value(),
            proptest::sample::select(refs).prop_map(Expr::Ident)
        ]
        .boxed()
    };
    proptest::collection::btree_map("[a-z][a-z_0-9]{0,5}", arg, 0..4)
        .prop_map(|m| m.into_iter().collect())
}

/// Bindings over `v0..v5` followed by one to three exec calls; only the last
/// call references bindings, so the per-item rule never fires.
fn script() -> impl Strategy<Value = Vec<Statement>> {
    (
        proptest::collection::vec((ident(), value()), 0..5),
        0usize..3,
    )
        .prop_flat_map(|(bindings, extra_execs)| {
            let names: Vec<String> = bindings.iter().map(|(n, _)| n.clone()).collect();
            let lead = proptest::collection::vec(kwargs(Vec::new()), extra_execs);
            (Just(bindings), lead, kwargs(names)).prop_map(|(bindings, lead, last)| {
                let mut statements: Vec<Statement> = bindings
                    .into_iter()
                    .map(|(target, value)| Statement::Binding { target, value })
                    .collect();
                statements.extend(
                    lead.into_iter()
                        .map(|kwargs| Statement::ExecAssign { kwargs }),
                );
                statements.push(Statement::ExecAssign { kwargs: last });
                statements
            })
        })
}

#[test]
fn criterion_3_command_grammar_corpus() {
    let start = Instant::now();
    let prompt = PromptSet::builtin().command_generator;
    for (text, execs) in POSITIVE {
        assert!(
            prompt.contains(text),
            "corpus drifted from the prompt: {text}"
        );
        let script = parse_script(text).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert_eq!(script.exec_count(), execs);
    }
    for (text, expected) in [
        (
            NUMBERED_TARGETS,
            RuleViolation::ForbiddenTarget("execution1".into()),
        ),
        (
            PER_ITEM,
            RuleViolation::SeparatePerItemExecutions("urls".into()),
        ),
    ] {
        assert!(
            prompt.contains(text),
            "corpus drifted from the prompt: {text}"
        );
        let err = parse_script(text).unwrap_err();
        assert_eq!(err.violation(), Some(&expected), "{text}");
    }

    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig {
        cases: 256,
        ..ProptestConfig::default()
    });
    let checked = AtomicUsize::new(0);
    runner
        .run(&script(), |statements| {
            let rendered = toolcards::executor::render_statements(&statements);
            let parsed = parse_script(&rendered)
                .map_err(|e| TestCaseError::fail(format!("{e}\n{rendered}")))?;
            prop_assert_eq!(&parsed.statements, &statements);
            prop_assert_eq!(parsed.render(), rendered);
            checked.fetch_add(1, Ordering::SeqCst);
            Ok(())
        })
        .unwrap();
    assert!(checked.load(Ordering::SeqCst) >= 200);
    within_budget(start);
}

// ---------------------------------------------------------------------------
// 4. Restricted interpreter
// ---------------------------------------------------------------------------

fn sieve_sum(below: usize) -> i64 {
    let mut composite = vec![false; below];
    let mut sum = 0;
    for n in 2..below {
        if !composite[n] {
            sum += n as i64;
            (n * n..below).step_by(n).for_each(|m| composite[m] = true);
        }
    }
    sum
}

const PRIMES_BELOW_50: &str = "\
total = 0
n = 2
while n < 50:
    is_prime = True
    d = 2
    while d * d <= n:
        if n % d == 0:
            is_prime = False
            break
        d += 1
    if is_prime:
        total += n
    n += 1
print(f\"The sum of primes below 50 is: {total}\")";

#[test]
fn criterion_4_restricted_interpreter() {
    let start = Instant::now();
    let sum = calc::run_source(
        "numbers = [1, 2, 3, 4, 5]\nresult = sum(numbers)\nprint(f\"The sum is: {result}\")",
        Limits::default(),
    );
    assert_eq!(sum.stdout, "The sum is: 15");
    assert_eq!(sum.error, None);

    let primes = calc::run_source(PRIMES_BELOW_50, Limits::default());
    assert_eq!(primes.error, None);
    assert_eq!(
        primes.stdout,
        format!("The sum of primes below 50 is: {}", sieve_sum(50))
    );

    let runaway = calc::run_source(
        "total = 0\nfor i in range(10000000):\n    total += i\nprint(total)",
        Limits::default(),
    );
    assert_eq!(Limits::default().max_steps, 1_000_000);
    assert_eq!(runaway.error, Some(CalcError::StepLimitExceeded(1_000_000)));
    assert_eq!(runaway.stdout, "");

    // Division by zero is a structured error inside a successful tool call.
    let engine = Arc::new(ScriptedEngine::new(Playbook::strict(vec![
        PlaybookEntry::new(
            "tool:Python_Code_Generator_Tool",
            "```python\nx = 10\ny = 0\nprint(x / y)\n```",
        ),
    ])));
    let dir = tempfile::tempdir().unwrap();
    let ctx = ToolContext::new(engine, dir.path());
    let card: Arc<dyn ToolCard> = Arc::new(CalculatorTool::new());
    let script = parse_script("execution = tool.execute(query=\"Divide 10 by 0\")").unwrap();
    let step = execute_script(&script, &card, &ctx, &SystemClock::default(), None).unwrap();
    let result = step.primary().unwrap();
    assert_eq!(result.status, ToolStatus::Ok);
    assert_eq!(
        result.payload["error"],
        "line 3: ZeroDivisionError: division by zero"
    );
    assert_eq!(result.payload["execution_result"], "");
    within_budget(start);
}

// ---------------------------------------------------------------------------
// 5. Budgets
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_budgets_are_enforced() {
    let start = Instant::now();
    let registry = ToolRegistry::builder()
        .register(Arc::new(GeneralistTool::new()))
        .unwrap()
        .build()
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let config = SolveConfig {
        cache_dir: dir.path().to_path_buf(),
        ..SolveConfig::default()
    };
    assert_eq!(config.max_steps, 10);
    let engine = Arc::new(ScriptedEngine::new(Playbook::lenient(never_stop(
        BASE_TOOL,
        "execution = tool.execute(prompt=\"go\")",
    ))));
    let solution = solve("Never done?", None, &config, &registry, engine).unwrap();
    assert_eq!(solution.termination, Termination::MaxSteps);
    assert_eq!(solution.trajectory.steps.len(), 10);
    assert_eq!(solution.trajectory.verdicts.len(), 10);
    assert!(
        solution
            .trajectory
            .final_answer
            .as_ref()
            .unwrap()
            .budget_exhausted
    );

    let slow = ScriptedTool::new(query_card("Slow_Tool"), vec![json!("late")])
        .with_delay(Duration::from_secs(3));
    let registry = ToolRegistry::builder()
        .register(Arc::new(GeneralistTool::new()))
        .unwrap()
        .register(Arc::new(slow))
        .unwrap()
        .build()
        .unwrap();
    let config = SolveConfig {
        max_time: 0.5,
        cache_dir: dir.path().to_path_buf(),
        ..SolveConfig::default()
    }
    .with_tools([BASE_TOOL, "Slow_Tool"]);
    let engine = Arc::new(ScriptedEngine::new(Playbook::lenient(never_stop(
        "Slow_Tool",
        "execution = tool.execute(query=\"x\")",
    ))));
    let timed = Instant::now();
    let solution = solve("Slow?", None, &config, &registry, engine).unwrap();
    assert!(
        timed.elapsed() < Duration::from_secs(2),
        "the slow call was not abandoned"
    );
    assert_eq!(solution.termination, Termination::TimeBudget);
    let step = solution.trajectory.steps.last().unwrap();
    assert!(step.execution.timed_out);
    assert_eq!(step.status, StepStatus::Timeout);
    within_budget(start);
}

// ---------------------------------------------------------------------------
// 6. Trajectory durability
// ---------------------------------------------------------------------------

fn random_text(rng: &mut ChaCha8Rng) -> String {
    const POOL: &[&str] = &[
        "a",
        "Z",
        "7",
        " ",
        "\n",
        "\t",
        "\"",
        "\\",
        "é",
        "日",
        "\u{1F600}",
        "\u{0}",
        "{",
        "}",
        ":",
        "</>",
    ];
    (0..rng.gen_range(0..24))
        .map(|_| *POOL.choose(rng).unwrap())
        .collect()
}

fn random_float(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..4) {
        0 => rng.gen::<f64>(),
        1 => rng.gen_range(-1e6..1e6),
        2 => f64::from_bits(rng.gen::<u64>() & 0x7FEF_FFFF_FFFF_FFFF),
        _ => rng.gen_range(0..1000) as f64 / 1000.0,
    }
}

fn random_json(rng: &mut ChaCha8Rng, depth: usize) -> Value {
    match rng.gen_range(0..if depth == 0 { 5 } else { 7 }) {
        0 => Value::Null,
        1 => json!(rng.gen::<bool>()),
        2 => json!(rng.gen::<i64>()),
        3 => json!(random_float(rng)),
        4 => json!(random_text(rng)),
        5 => Value::Array(
            (0..rng.gen_range(0..4))
                .map(|_| random_json(rng, depth - 1))
                .collect(),
        ),
        _ => Value::Object(
            (0..rng.gen_range(0..4))
                .map(|_| (random_text(rng), random_json(rng, depth - 1)))
                .collect(),
        ),
    }
}

fn random_result(rng: &mut ChaCha8Rng) -> ToolResult {
    if rng.gen_bool(0.8) {
        let artifacts = (0..rng.gen_range(0..3))
            .map(|i| PathBuf::from(format!("step_1/crop_{i}.png")))
            .collect();
        ToolResult::ok(random_json(rng, 3), artifacts, random_float(rng))
    } else {
        ToolResult::error(random_text(rng), random_float(rng))
    }
}

fn random_trajectory(seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let image = rng
        .gen_bool(0.5)
        .then(|| PathBuf::from(format!("images/{}.png", rng.gen::<u32>())));
    let mut t = Trajectory::new(format!("{seed:012x}"), random_text(&mut rng), image);
    t.initial_plan = Some(InitialPlan {
        raw_text: random_text(&mut rng),
        summary: rng.gen_bool(0.5).then(|| random_text(&mut rng)),
        required_skills: rng.gen_bool(0.5).then(|| random_text(&mut rng)),
        relevant_tools: None,
        additional_considerations: rng.gen_bool(0.5).then(|| random_text(&mut rng)),
    });
    let tools = [
        BASE_TOOL,
        "Image_Captioner_Tool",
        "Python_Code_Generator_Tool",
        "Google_Search_Tool",
    ];
    let mut clock = Utc.with_ymd_and_hms(2025, 3, 1, 12, 0, 0).unwrap();
    for index in 1..=rng.gen_range(0..6) {
        let status = *[
            StepStatus::Ok,
            StepStatus::Ok,
            StepStatus::ActionParseFailure,
            StepStatus::CommandParseFailure,
            StepStatus::Timeout,
        ]
        .choose(&mut rng)
        .unwrap();
        let command_text = match rng.gen_range(0..3) {
            0 => format!(
                "execution = tool.execute(query={})",
                Expr::Str(random_text(&mut rng))
            ),
            1 => format!(
                "x = [1, 2.5, None]\nexecution = tool.execute(items=x, n={})",
                rng.gen::<i32>()
            ),
            _ => String::new(),
        };
        let command = (!command_text.is_empty() && status != StepStatus::CommandParseFailure)
            .then(|| parse_script(&command_text).unwrap());
        let started_at = clock;
        clock += chrono::Duration::nanoseconds(rng.gen_range(1..5_000_000_000));
        let step = StepRecord {
            index,
            action: Action {
                step_index: index,
                justification: random_text(&mut rng),
                context: random_text(&mut rng),
                sub_goal: random_text(&mut rng),
                tool_name: tools.choose(&mut rng).unwrap().to_string(),
            },
            execution: toolcards::executor::StepExecution {
                command_text,
                command,
                results: (0..rng.gen_range(0..3))
                    .map(|_| random_result(&mut rng))
                    .collect(),
                analysis: random_text(&mut rng),
                explanation: random_text(&mut rng),
                duration: random_float(&mut rng),
                timed_out: status == StepStatus::Timeout,
            },
            status,
            started_at,
            ended_at: clock,
        };
        t.append_step(step).unwrap();
        t.verdicts.push(Verdict {
            analysis: random_text(&mut rng),
            stop_signal: rng.gen(),
        });
    }
    if rng.gen_bool(0.8) {
        t.final_answer = Some(FinalAnswer {
            text: random_text(&mut rng),
            direct_answer: random_text(&mut rng),
            failed: rng.gen_bool(0.1),
            budget_exhausted: rng.gen(),
        });
    }
    t.termination = [
        Termination::VerifierStop,
        Termination::MaxSteps,
        Termination::TimeBudget,
        Termination::EngineFailure,
    ]
    .choose(&mut rng)
    .copied();
    t.totals = Totals {
        steps: t.steps.len(),
        wall_clock: random_float(&mut rng),
        summary_time: random_float(&mut rng),
        cost: random_float(&mut rng),
    };
    t
}

#[test]
fn criterion_6_trajectories_round_trip_byte_stably() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..100 {
        let original = random_trajectory(seed);
        let path = dir.path().join(format!("{seed}/trajectory.json"));
        original.save(&path).unwrap();
        let bytes = std::fs::read_to_string(&path).unwrap();
        let loaded = Trajectory::load(&path).unwrap();
        assert_eq!(loaded, original, "seed {seed}");
        assert_eq!(loaded.to_canonical_json(), bytes, "seed {seed}");
        loaded.save(&path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            bytes,
            "seed {seed}"
        );
        assert!(bytes.ends_with("}\n"));
    }
    within_budget(start);
}

// ---------------------------------------------------------------------------
// 7. Statistics
// ---------------------------------------------------------------------------

fn hand_built(tools: &[&str]) -> Trajectory {
    let mut t = Trajectory::new("q", "q", None);
    let at = Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap();
    for (i, tool) in tools.iter().enumerate() {
        t.append_step(StepRecord {
            index: i + 1,
            action: Action {
                step_index: i + 1,
                tool_name: tool.to_string(),
                ..Action::default()
            },
            execution: toolcards::executor::StepExecution {
                command_text: String::new(),
                command: None,
                results: vec![ToolResult::ok(Value::Null, Vec::new(), 0.0)],
                analysis: String::new(),
                explanation: String::new(),
                duration: 0.0,
                timed_out: false,
            },
            status: StepStatus::Ok,
            started_at: at,
            ended_at: at,
        })
        .unwrap();
    }
    t
}

#[test]
fn criterion_7_statistics_match_hand_computed_values() {
    let start = Instant::now();
    let (g, c, d, s) = (
        BASE_TOOL,
        "Image_Captioner_Tool",
        "Object_Detector_Tool",
        "Google_Search_Tool",
    );
    let trajectories = [
        hand_built(&[g, c, d]),
        hand_built(&[g]),
        hand_built(&[c, c]),
        hand_built(&[]),
        hand_built(&[g, s, g]),
    ];
    let stats = TrajectoryStats::from_trajectories(&trajectories);
    // 9 steps over 5 trajectories; 4 generalist steps, so 5 external.
    assert_eq!(stats.trajectories, 5);
    assert_eq!(stats.total_steps, 9);
    assert_eq!(
        stats.tool_usage_histogram,
        BTreeMap::from([(g.into(), 4), (c.into(), 3), (d.into(), 1), (s.into(), 1)])
    );
    assert_eq!(stats.external_tool_fraction, 5.0 / 9.0);
    assert_eq!(stats.avg_steps, 1.8);
    assert_eq!(
        stats.step_histogram,
        BTreeMap::from([(0, 1), (1, 1), (2, 1), (3, 2)])
    );

    // Three trials of a scripted run agree exactly.
    let registry = Arc::new(
        ToolRegistry::builder()
            .register(Arc::new(GeneralistTool::new()))
            .unwrap()
            .build()
            .unwrap(),
    );
    let solver = AgentSolver::per_example(registry, |_| {
        let mut entries = never_stop(BASE_TOOL, "execution = tool.execute(prompt=\"think\")");
        entries[4] = PlaybookEntry::new("context_verifier", verdict(true));
        entries[5] = PlaybookEntry::new("solution_summarizer", summary("The answer is 7."));
        Ok(Arc::new(ScriptedEngine::new(Playbook::lenient(entries))))
    })
    .with_tick_clock();
    let examples: Vec<Example> = ["7", "7", "8", "9"]
        .iter()
        .enumerate()
        .map(|(i, a)| Example::new(format!("e{i}"), "What is it?", *a))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let config = SolveConfig {
        cache_dir: dir.path().to_path_buf(),
        ..SolveConfig::default()
    };
    let options = BenchOptions {
        trials: 3,
        jobs: 2,
        trajectory_dir: None,
    };
    let report = run_benchmark(
        &examples,
        &config,
        &options,
        &solver,
        &Scorer::new(ScoreMode::Exact),
    )
    .unwrap();
    assert_eq!(report.trial_accuracies, vec![0.5, 0.5, 0.5]);
    assert_eq!(report.accuracy_mean, 0.5);
    assert_eq!(report.accuracy_std, 0.0);
    assert_eq!(report.stats.total_steps, 12);
    assert_eq!(report.stats.external_tool_fraction, 0.0);
    within_budget(start);
}

// ---------------------------------------------------------------------------
// 8. Live smoke
// ---------------------------------------------------------------------------

/// Needs a reachable model endpoint and its API key; reads the usual
/// `TOOLCARDS_*` settings.
#[test]
#[ignore]
fn criterion_8_live_smoke() {
    let mut config = toolcards::config::Config::load(None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    config.solve.cache_dir = Some(dir.path().to_path_buf());
    config.solve.max_steps = 3;
    config.solve.max_time = 120.0;
    config.tools.enabled = Some(vec![BASE_TOOL.to_string()]);
    let registry = config.registry().unwrap();
    let solve_config = config.solve_config(&registry).unwrap();
    let engine = config.engine(None).unwrap();
    let solution = solve("What is 17 + 25?", None, &solve_config, &registry, engine).unwrap();
    assert_ne!(solution.termination, Termination::EngineFailure);
    assert!(solution.trajectory.steps.len() <= 3);
    assert!(solution
        .trajectory
        .steps
        .iter()
        .all(|s| s.action.tool_name == BASE_TOOL));
    let path = dir.path().join("live.json");
    solution.trajectory.save(&path).unwrap();
    assert_eq!(Trajectory::load(&path).unwrap(), solution.trajectory);
    assert!(!solution.answer_text.trim().is_empty());
}
