//! Datasets, validation/test splits, answer scoring, multi-trial runs and
//! the trajectory statistics reported alongside accuracy.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clock::{Clock, SystemClock, TickClock};
use crate::controller::{solve_with_clock, Solution, SolveConfig, SolveError};
use crate::engine::{Engine, EngineError, EngineRequest};
use crate::memory::{Trajectory, SCHEMA_VERSION};
use crate::toolbox::ToolRegistry;
use crate::BASE_TOOL;

pub const DEFAULT_VAL_N: usize = 100;
pub const DEFAULT_TEST_N: usize = 200;
pub const DEFAULT_TRIALS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub example_id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, Value>,
}

impl Example {
    pub fn new(
        id: impl Into<String>,
        question: impl Into<String>,
        answer: impl Into<String>,
    ) -> Self {
        Self {
            example_id: id.into(),
            question: question.into(),
            image: None,
            answer: answer.into(),
            choices: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_choices<I: IntoIterator<Item = S>, S: Into<String>>(mut self, choices: I) -> Self {
        self.choices = Some(choices.into_iter().map(Into::into).collect());
        self
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let invalid = |reason: String| DatasetError::Invalid {
            example_id: self.example_id.clone(),
            reason,
        };
        if self.example_id.trim().is_empty() {
            return Err(invalid("example_id is empty".into()));
        }
        if let Some(choices) = &self.choices {
            if choices.len() < 2 {
                return Err(invalid(format!(
                    "multiple-choice examples need at least 2 choices, found {}",
                    choices.len()
                )));
            }
            if choices.len() > 26 {
                return Err(invalid("at most 26 lettered choices are supported".into()));
            }
            if choice_index(&self.answer, choices).is_none() {
                return Err(invalid(format!(
                    "answer `{}` matches no choice by letter or text",
                    self.answer
                )));
            }
        }
        Ok(())
    }

    /// Question text with lettered options appended, as sent to solvers.
    pub fn prompt(&self) -> String {
        match &self.choices {
            None => self.question.clone(),
            Some(choices) => {
                let mut text = format!("{}\n\nChoices:", self.question);
                for (i, c) in choices.iter().enumerate() {
                    text.push_str(&format!("\n({}) {c}", letter(i)));
                }
                text
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("example `{example_id}`: {reason}")]
    Invalid { example_id: String, reason: String },
    #[error("duplicate example_id `{0}`")]
    DuplicateId(String),
    #[error("need at least {needed} examples, found {available}")]
    TooFewExamples { needed: usize, available: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
}

const REQUIRED_FIELDS: [&str; 3] = ["example_id", "question", "answer"];

/// Reads line-delimited JSON records `{example_id, question, image?,
/// answer, choices?, metadata?}`. Blank lines are skipped; relative image
/// paths are resolved against the dataset's directory.
pub fn load_dataset(path: &Path) -> Result<Vec<Example>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_dataset(&text, base)
}

pub fn parse_dataset(text: &str, base: &Path) -> Result<Vec<Example>, DatasetError> {
    let mut examples = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw).map_err(|e| DatasetError::Parse {
            line,
            message: e.to_string(),
        })?;
        if !value.is_object() {
            return Err(DatasetError::Parse {
                line,
                message: "record is not a JSON object".into(),
            });
        }
        if let Some(field) = REQUIRED_FIELDS
            .iter()
            .find(|f| value.get(**f).is_none_or(Value::is_null))
        {
            return Err(DatasetError::MissingField { line, field });
        }
        let mut example: Example =
            serde_json::from_value(value).map_err(|e| DatasetError::Parse {
                line,
                message: e.to_string(),
            })?;
        example.validate()?;
        if let Some(image) = example.image.as_mut().filter(|p| p.is_relative()) {
            *image = base.join(&*image);
        }
        if !seen.insert(example.example_id.clone()) {
            return Err(DatasetError::DuplicateId(example.example_id));
        }
        examples.push(example);
    }
    Ok(examples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

/// Seeded disjoint sample: `val_n` validation examples, then up to `test_n`
/// test examples from what remains.
pub fn split_val_test(
    examples: &[Example],
    val_n: usize,
    test_n: usize,
    seed: u64,
) -> Result<Split, DatasetError> {
    if val_n == 0 {
        return Err(DatasetError::InvalidSplit(
            "the validation set must hold at least one example".into(),
        ));
    }
    if examples.len() < val_n {
        return Err(DatasetError::TooFewExamples {
            needed: val_n,
            available: examples.len(),
        });
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|i| examples[*i].clone()).collect();
    let test_end = (val_n + test_n).min(order.len());
    Ok(Split {
        seed,
        val: pick(&order[..val_n]),
        test: pick(&order[val_n..test_end]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    #[default]
    Exact,
    MultipleChoice,
    Judge,
}

impl std::str::FromStr for ScoreMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(ScoreMode::Exact),
            "multiple_choice" | "multiple-choice" | "mc" => Ok(ScoreMode::MultipleChoice),
            "judge" => Ok(ScoreMode::Judge),
            other => Err(format!(
                "unknown score mode `{other}` (expected exact, multiple_choice or judge)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Score {
    pub correct: bool,
    /// Why the verdict is unreliable, when it is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl Score {
    fn of(correct: bool) -> Self {
        Self {
            correct,
            flag: None,
        }
    }
}

/// Lowercase alphanumeric tokens.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn letter(i: usize) -> char {
    (b'A' + i as u8) as char
}

/// Position of `answer` among `choices`: a bare letter, a lettered form such
/// as `B)` or `(B) text`, or the choice text itself.
pub fn choice_index(answer: &str, choices: &[String]) -> Option<usize> {
    let a = answer.trim();
    if let Some(i) = option_letter(a).filter(|i| *i < choices.len()) {
        return Some(i);
    }
    let tokens = normalize_tokens(a);
    choices.iter().position(|c| normalize_tokens(c) == tokens)
}

/// Letter index when `token` is `B`, `(B)`, `B)`, `B.` or `B:`, or starts
/// with `(B)` / `B)` followed by text.
fn option_letter(token: &str) -> Option<usize> {
    let t = token.trim();
    let t = t.strip_prefix('(').unwrap_or(t);
    let mut chars = t.chars();
    let c = chars.next()?;
    if !c.is_ascii_uppercase() {
        return None;
    }
    let rest = chars.as_str();
    let ok = rest.is_empty()
        || rest.starts_with([')', '.', ':']) && (rest.len() == 1 || rest.starts_with(')'));
    ok.then(|| (c as u8 - b'A') as usize)
}

/// The option the answer commits to: the last lettered token such as
/// `(B)`, `B)` or a final bare `B`, else the choice whose text occurs last.
pub fn extract_choice(answer: &str, choices: &[String]) -> Option<usize> {
    let words: Vec<&str> = answer.split_whitespace().collect();
    let trim_tail = |w: &str| {
        w.trim_end_matches([',', ';', '*'])
            .trim_start_matches('*')
            .to_string()
    };
    let mut found = None;
    for (pos, raw) in words.iter().enumerate() {
        let w = trim_tail(raw);
        let decorated = w.starts_with('(') || w.ends_with([')', '.', ':']);
        let last = pos + 1 == words.len();
        if decorated || last {
            if let Some(i) = option_letter(&w).filter(|i| *i < choices.len()) {
                found = Some(i);
            }
        }
    }
    if found.is_some() {
        return found;
    }
    let hay = format!(" {} ", normalize_tokens(answer).join(" "));
    choices
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let needle = format!(" {} ", normalize_tokens(c).join(" "));
            (needle.trim() != "")
                .then(|| hay.rfind(&needle).map(|at| (at, i)))
                .flatten()
        })
        .max()
        .map(|(_, i)| i)
}

/// Normalized equality, or the normalized truth occurring as a whole-token
/// run inside the answer (so "a total of 20 baseballs." matches "20").
pub fn exact_match(answer: &str, truth: &str) -> bool {
    let (a, t) = (normalize_tokens(answer), normalize_tokens(truth));
    if t.is_empty() {
        return a.is_empty();
    }
    a.windows(t.len()).any(|w| w == t.as_slice())
}

pub const JUDGE_TAG: &str = crate::engine::tags::ANSWER_JUDGE;

pub const JUDGE_PROMPT: &str = "\
You are grading an answer against a reference. Reply with exactly True if the response is equivalent to the reference answer for the question, and False otherwise.

Question: {question}
Reference answer: {reference}
Response: {response}

Verdict (True or False):";

pub fn judge_prompt(answer: &str, example: &Example) -> String {
    JUDGE_PROMPT
        .replace("{question}", &example.question)
        .replace("{reference}", &example.answer)
        .replace("{response}", answer)
}

pub fn score_answer(
    answer: &str,
    example: &Example,
    mode: ScoreMode,
    judge: Option<&dyn Engine>,
) -> Score {
    match mode {
        ScoreMode::Exact => Score::of(exact_match(answer, &example.answer)),
        ScoreMode::MultipleChoice => {
            let Some(choices) = example.choices.as_deref() else {
                return Score::of(exact_match(answer, &example.answer));
            };
            let truth = choice_index(&example.answer, choices);
            Score::of(truth.is_some() && extract_choice(answer, choices) == truth)
        }
        ScoreMode::Judge => {
            let Some(engine) = judge else {
                return Score {
                    correct: false,
                    flag: Some("judge scoring needs an engine".into()),
                };
            };
            let request =
                EngineRequest::new(JUDGE_TAG, judge_prompt(answer, example)).deterministic();
            match engine.complete(&request) {
                Ok(response) => match crate::planner::parse_stop_signal(&response.text) {
                    Some(verdict) => Score::of(verdict),
                    None => Score {
                        correct: false,
                        flag: Some(format!(
                            "unreadable judge verdict: {}",
                            response.text.trim()
                        )),
                    },
                },
                Err(err) => Score {
                    correct: false,
                    flag: Some(format!("judge failed: {err}")),
                },
            }
        }
    }
}

/// Scoring settings shared by runs and toolset optimization.
#[derive(Clone, Default)]
pub struct Scorer {
    pub mode: ScoreMode,
    pub judge: Option<Arc<dyn Engine>>,
}

impl Scorer {
    pub fn new(mode: ScoreMode) -> Self {
        Self { mode, judge: None }
    }

    pub fn with_judge(mut self, engine: Arc<dyn Engine>) -> Self {
        self.judge = Some(engine);
        self
    }

    /// Scores the direct answer section of a solution.
    pub fn score(&self, solution: &Solution, example: &Example) -> Score {
        let text = solution
            .trajectory
            .final_answer
            .as_ref()
            .map(|a| a.direct_answer.as_str())
            .filter(|t| !t.is_empty())
            .unwrap_or(&solution.answer_text);
        score_answer(text, example, self.mode, self.judge.as_deref())
    }
}

/// Produces one solution per example under a given solve configuration.
pub trait ExampleSolver: Send + Sync {
    fn solve(&self, example: &Example, config: &SolveConfig) -> Result<Solution, SolveError>;
}

/// Builds the engine used for one example's solve.
pub type EngineSource = dyn Fn(&Example) -> Result<Arc<dyn Engine>, EngineError> + Send + Sync;

/// Runs the full agent loop for each example.
pub struct AgentSolver {
    registry: Arc<ToolRegistry>,
    engines: Box<EngineSource>,
    tick_clock: bool,
}

impl AgentSolver {
    /// One engine shared by every solve.
    pub fn shared(registry: Arc<ToolRegistry>, engine: Arc<dyn Engine>) -> Self {
        Self::per_example(registry, move |_| Ok(engine.clone()))
    }

    /// A fresh engine per solve, e.g. one scripted playbook per example.
    pub fn per_example(
        registry: Arc<ToolRegistry>,
        engines: impl Fn(&Example) -> Result<Arc<dyn Engine>, EngineError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            registry,
            engines: Box::new(engines),
            tick_clock: false,
        }
    }

    /// Drives each solve with a fresh [`TickClock`], making timestamps and
    /// durations reproducible.
    pub fn with_tick_clock(mut self) -> Self {
        self.tick_clock = true;
        self
    }
}

impl ExampleSolver for AgentSolver {
    fn solve(&self, example: &Example, config: &SolveConfig) -> Result<Solution, SolveError> {
        let engine = (self.engines)(example).map_err(|e| SolveError::Config(e.to_string()))?;
        let clock: Box<dyn Clock> = if self.tick_clock {
            Box::new(TickClock::default())
        } else {
            Box::new(SystemClock::default())
        };
        let mut config = config.clone();
        config.cache_dir = config.cache_dir.join(&example.example_id);
        solve_with_clock(
            &example.prompt(),
            example.image.as_deref(),
            &config,
            &self.registry,
            engine,
            clock.as_ref(),
        )
    }
}

/// Applies `f` to every item on up to `jobs` threads, keeping input order.
pub fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let out = f(item);
                *slots[i].lock().expect("result slot") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| {
            s.into_inner()
                .expect("result slot")
                .expect("every item is processed")
        })
        .collect()
}

/// Aggregate trajectory statistics: tool usage, external-tool share, steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub trajectories: usize,
    pub total_steps: usize,
    pub tool_usage_histogram: BTreeMap<String, usize>,
    /// Share of steps calling a tool other than the generalist base tool.
    pub external_tool_fraction: f64,
    pub avg_steps: f64,
    /// Step count to number of trajectories with that count.
    pub step_histogram: BTreeMap<usize, usize>,
    pub total_cost: f64,
}

impl TrajectoryStats {
    pub fn from_trajectories<'a>(trajectories: impl IntoIterator<Item = &'a Trajectory>) -> Self {
        let mut stats = Self::default();
        for t in trajectories {
            stats.trajectories += 1;
            stats.total_steps += t.steps.len();
            *stats.step_histogram.entry(t.steps.len()).or_default() += 1;
            for step in &t.steps {
                *stats
                    .tool_usage_histogram
                    .entry(step.action.tool_name.clone())
                    .or_default() += 1;
            }
            stats.total_cost += t.totals.cost;
        }
        let external: usize = stats
            .tool_usage_histogram
            .iter()
            .filter(|(name, _)| name.as_str() != BASE_TOOL)
            .map(|(_, n)| n)
            .sum();
        if stats.total_steps > 0 {
            stats.external_tool_fraction = external as f64 / stats.total_steps as f64;
        }
        if stats.trajectories > 0 {
            stats.avg_steps = stats.total_steps as f64 / stats.trajectories as f64;
        }
        stats
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleOutcome {
    pub example_id: String,
    pub trial: usize,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
    /// Solve termination, or `error` when the solve could not start.
    pub termination: String,
    pub steps: usize,
    pub tools: Vec<String>,
    pub cost: f64,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub trials: usize,
    pub examples: usize,
    pub score_mode: ScoreMode,
    /// `population`: the spread is over trials, divided by the trial count.
    pub std_kind: String,
    pub trial_accuracies: Vec<f64>,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub stats: TrajectoryStats,
    pub per_example: Vec<ExampleOutcome>,
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub trials: usize,
    pub jobs: usize,
    /// Trajectories are written to `<dir>/trial_<t>/<example_id>.json`.
    pub trajectory_dir: Option<PathBuf>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            jobs: 1,
            trajectory_dir: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("the example list is empty")]
    NoExamples,
    #[error(transparent)]
    Config(#[from] SolveError),
    #[error(transparent)]
    Memory(#[from] crate::memory::MemoryError),
}

/// Solves every example once per trial and aggregates accuracy and
/// trajectory statistics. Per-example failures are recorded as incorrect.
pub fn run_benchmark(
    examples: &[Example],
    config: &SolveConfig,
    options: &BenchOptions,
    solver: &dyn ExampleSolver,
    scorer: &Scorer,
) -> Result<RunReport, BenchError> {
    if options.trials == 0 {
        return Err(BenchError::NoTrials);
    }
    if examples.is_empty() {
        return Err(BenchError::NoExamples);
    }
    config.validate()?;
    let jobs: Vec<(usize, &Example)> = (1..=options.trials)
        .flat_map(|t| examples.iter().map(move |e| (t, e)))
        .collect();
    let results = parallel_map(&jobs, options.jobs, |(trial, example)| {
        let trial_config = SolveConfig {
            cache_dir: config.cache_dir.join(format!("trial_{trial}")),
            ..config.clone()
        };
        let outcome = solver.solve(example, &trial_config);
        (*trial, *example, outcome)
    });

    let mut per_example = Vec::with_capacity(results.len());
    let mut trajectories = Vec::new();
    let mut correct_per_trial = vec![0usize; options.trials];
    for (trial, example, outcome) in results {
        let record = match outcome {
            Ok(solution) => {
                let score = scorer.score(&solution, example);
                if let Some(dir) = &options.trajectory_dir {
                    solution.trajectory.save(
                        &dir.join(format!("trial_{trial}"))
                            .join(format!("{}.json", example.example_id)),
                    )?;
                }
                let record = ExampleOutcome {
                    example_id: example.example_id.clone(),
                    trial,
                    correct: score.correct,
                    flag: score.flag,
                    termination: solution.termination.as_str().into(),
                    steps: solution.stats.steps_used,
                    tools: solution
                        .trajectory
                        .steps
                        .iter()
                        .map(|s| s.action.tool_name.clone())
                        .collect(),
                    cost: solution.stats.cost,
                    answer: solution.answer_text.clone(),
                    error: None,
                };
                trajectories.push(solution.trajectory);
                record
            }
            Err(err) => ExampleOutcome {
                example_id: example.example_id.clone(),
                trial,
                correct: false,
                flag: None,
                termination: "error".into(),
                steps: 0,
                tools: Vec::new(),
                cost: 0.0,
                answer: String::new(),
                error: Some(err.to_string()),
            },
        };
        if record.correct {
            correct_per_trial[trial - 1] += 1;
        }
        per_example.push(record);
    }
    let trial_accuracies: Vec<f64> = correct_per_trial
        .iter()
        .map(|c| *c as f64 / examples.len() as f64)
        .collect();
    let (accuracy_mean, accuracy_std) = mean_std(&trial_accuracies);
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        trials: options.trials,
        examples: examples.len(),
        score_mode: scorer.mode,
        std_kind: "population".into(),
        trial_accuracies,
        accuracy_mean,
        accuracy_std,
        stats: TrajectoryStats::from_trajectories(&trajectories),
        per_example,
    })
}

impl RunReport {
    /// Sorted-key JSON with a trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report is always serializable");
        let mut text = serde_json::to_string_pretty(&value).expect("value is always serializable");
        text.push('\n');
        text
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "Accuracy: {:.1} ± {:.1} ({} examples, {} trials, population std)\n",
            self.accuracy_mean * 100.0,
            self.accuracy_std * 100.0,
            self.examples,
            self.trials
        ));
        for (i, acc) in self.trial_accuracies.iter().enumerate() {
            out.push_str(&format!("  trial {}: {:.1}\n", i + 1, acc * 100.0));
        }
        out.push_str(&render_stats(&self.stats));
        out
    }
}

pub fn render_stats(stats: &TrajectoryStats) -> String {
    let mut out = String::new();
    out.push_str(&format!("Trajectories: {}\n", stats.trajectories));
    out.push_str(&format!(
        "Steps: {} (avg {:.2})\n",
        stats.total_steps, stats.avg_steps
    ));
    out.push_str(&format!(
        "External tool fraction: {:.3}\n",
        stats.external_tool_fraction
    ));
    out.push_str(&format!("Cost: {:.6}\n", stats.total_cost));
    if !stats.tool_usage_histogram.is_empty() {
        out.push_str("Tool usage:\n");
        let width = stats
            .tool_usage_histogram
            .keys()
            .map(String::len)
            .max()
            .unwrap_or(0);
        for (tool, n) in &stats.tool_usage_histogram {
            out.push_str(&format!("  {tool:<width$}  {n}\n"));
        }
    }
    if !stats.step_histogram.is_empty() {
        out.push_str("Steps per trajectory:\n");
        for (steps, n) in &stats.step_histogram {
            out.push_str(&format!("  {steps:>3}  {n}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn choices(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn three_line_dataset() {
        let text = r#"{"example_id": "a", "question": "q1", "answer": "1"}

{"example_id": "b", "question": "q2", "answer": "B", "choices": ["x", "y"]}
{"example_id": "c", "question": "q3", "answer": "4 minutes", "image": "img/c.png", "metadata": {"domain": "math"}}
"#;
        let examples = parse_dataset(text, Path::new("data")).unwrap();
        assert_eq!(examples.len(), 3);
        assert_eq!(
            examples[2].image.as_deref(),
            Some(Path::new("data/img/c.png"))
        );
        assert_eq!(examples[2].metadata["domain"], "math");
    }

    #[test]
    fn malformed_lines_name_the_line() {
        let err = parse_dataset(
            "{\"example_id\": \"a\", \"question\": \"q\", \"answer\": \"1\"}\nnot json\n",
            Path::new(""),
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::Parse { line: 2, .. }), "{err}");
        let err = parse_dataset(
            "{\"example_id\": \"a\", \"answer\": \"1\"}\n",
            Path::new(""),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            DatasetError::MissingField {
                line: 1,
                field: "question"
            }
        ));
    }

    #[test]
    fn single_choice_names_the_example() {
        let text =
            r#"{"example_id": "lonely", "question": "q", "answer": "A", "choices": ["only"]}"#;
        let err = parse_dataset(text, Path::new("")).unwrap_err();
        assert!(err.to_string().contains("lonely"), "{err}");
    }

    #[test]
    fn nine_lettered_choices_with_answer_e() {
        let e = Example::new("sci", "q", "E")
            .with_choices(["a", "b", "c", "d", "e", "f", "g", "h", "i"]);
        assert!(e.validate().is_ok());
        assert_eq!(choice_index("E", e.choices.as_ref().unwrap()), Some(4));
    }

    #[test]
    fn split_sizes() {
        let examples: Vec<Example> = (0..300)
            .map(|i| Example::new(format!("e{i}"), "q", "a"))
            .collect();
        let s = split_val_test(&examples, 100, 200, 7).unwrap();
        assert_eq!((s.val.len(), s.test.len()), (100, 200));
        let val: BTreeSet<_> = s.val.iter().map(|e| &e.example_id).collect();
        assert!(s.test.iter().all(|e| !val.contains(&e.example_id)));

        let s = split_val_test(&examples[..250], 100, 200, 7).unwrap();
        assert_eq!((s.val.len(), s.test.len()), (100, 150));
        assert_eq!(
            split_val_test(&examples, 100, 200, 7).unwrap(),
            split_val_test(&examples, 100, 200, 7).unwrap()
        );
        assert_ne!(
            split_val_test(&examples, 100, 200, 7).unwrap().val,
            split_val_test(&examples, 100, 200, 8).unwrap().val
        );
        assert!(matches!(
            split_val_test(&examples[..50], 100, 200, 7),
            Err(DatasetError::TooFewExamples { .. })
        ));
        assert!(matches!(
            split_val_test(&examples, 0, 200, 7),
            Err(DatasetError::InvalidSplit(_))
        ));
    }

    #[test]
    fn exact_scoring() {
        let e = Example::new("b", "How many baseballs?", "20");
        assert!(
            score_answer(
                "Therefore, there are a total of 20 baseballs.",
                &e,
                ScoreMode::Exact,
                None
            )
            .correct
        );
        assert!(!score_answer("There are 120 baseballs.", &e, ScoreMode::Exact, None).correct);
        let kiwi = Example::new("k", "q", "4 minutes");
        assert!(score_answer("4 minutes", &kiwi, ScoreMode::Exact, None).correct);
        assert!(score_answer("  4 Minutes. ", &kiwi, ScoreMode::Exact, None).correct);
    }

    #[test]
    fn multiple_choice_scoring() {
        let c = choices(&["Normal tissue", "Necrotic tumor", "Viable tumor"]);
        let e = Example::new("p", "q", "B").with_choices(c.clone());
        assert!(
            score_answer(
                "The tissue shows necrosis. B) Necrotic tumor",
                &e,
                ScoreMode::MultipleChoice,
                None
            )
            .correct
        );
        assert!(
            score_answer(
                "A look at the image suggests (B).",
                &e,
                ScoreMode::MultipleChoice,
                None
            )
            .correct
        );
        assert!(
            score_answer(
                "The answer is necrotic tumor",
                &e,
                ScoreMode::MultipleChoice,
                None
            )
            .correct
        );
        assert!(!score_answer("(A) Normal tissue", &e, ScoreMode::MultipleChoice, None).correct);
        let by_text = Example::new("p", "q", "B) Necrotic tumor").with_choices(c);
        assert!(score_answer("B", &by_text, ScoreMode::MultipleChoice, None).correct);
    }

    #[test]
    fn judge_scoring() {
        use crate::engine::FnEngine;
        let e = Example::new("j", "q", "Paris");
        let yes = FnEngine::new(|r| {
            assert_eq!(r.tag, JUDGE_TAG);
            Ok("True".to_string())
        });
        assert!(score_answer("paris, France", &e, ScoreMode::Judge, Some(&yes)).correct);
        let down = FnEngine::new(|_| {
            Err(EngineError::Provider {
                status: None,
                message: "x".into(),
            })
        });
        let s = score_answer("Paris", &e, ScoreMode::Judge, Some(&down));
        assert!(!s.correct && s.flag.is_some());
        assert!(score_answer("Paris", &e, ScoreMode::Judge, None)
            .flag
            .is_some());
    }

    #[test]
    fn population_std() {
        assert_eq!(mean_std(&[1.0, 1.0, 1.0]), (1.0, 0.0));
        let (m, s) = mean_std(&[0.5, 0.75, 1.0]);
        assert!((m - 0.75).abs() < 1e-12);
        // Population variance of {-0.25, 0, 0.25} is 0.125 / 3.
        assert!((s - (0.125f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn parallel_map_keeps_order() {
        let items: Vec<u64> = (0..100).collect();
        assert_eq!(
            parallel_map(&items, 8, |x| x * 2),
            items.iter().map(|x| x * 2).collect::<Vec<_>>()
        );
        assert!(parallel_map(&Vec::<u8>::new(), 4, |x| *x).is_empty());
    }
}
