//! Greedy task-specific toolset selection.
//!
//! Stage 1 scores the base toolset on a validation set. Stage 2 scores each
//! remaining tool added to the base on its own. Stage 3 keeps the base plus
//! every tool whose accuracy gain is strictly positive. That is `n + 1`
//! evaluations for `n` candidates and makes no claim of global optimality.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bench::{parallel_map, Example, ExampleSolver, Scorer};
use crate::controller::{SolveConfig, SolveError};
use crate::memory::SCHEMA_VERSION;
use crate::toolbox::{RegistryError, ToolRegistry};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub example_id: String,
    pub trial: usize,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolsetEval {
    pub toolset: BTreeSet<String>,
    /// Mean over trials of the per-trial fraction correct.
    pub accuracy: f64,
    pub correct: usize,
    pub attempts: usize,
    pub trials: usize,
    pub per_example: Vec<Attempt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub eval: ToolsetEval,
    /// Accuracy with the tool minus the baseline accuracy.
    pub delta: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub schema_version: u32,
    pub base: BTreeSet<String>,
    pub baseline: ToolsetEval,
    pub candidates: BTreeMap<String, CandidateResult>,
    /// D*: the base plus every candidate with a strictly positive delta.
    pub selected: BTreeSet<String>,
    /// Candidate evaluation order.
    pub ordering: Vec<String>,
    pub evaluations: usize,
    pub trials: usize,
    pub validation_examples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error("the validation set is empty")]
    NoExamples,
    #[error("trials must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Config(#[from] SolveError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    /// Solves per example inside each evaluation.
    pub trials: usize,
    /// Threads used to solve examples within one evaluation.
    pub jobs: usize,
    /// Recorded in the report when the validation set was sampled.
    pub seed: Option<u64>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            trials: 1,
            jobs: 1,
            seed: None,
        }
    }
}

/// Accuracy of `toolset` on `examples`. Failed solves count as incorrect.
pub fn evaluate_accuracy(
    toolset: &BTreeSet<String>,
    examples: &[Example],
    options: &OptimizeOptions,
    solver_config: &SolveConfig,
    solver: &dyn ExampleSolver,
    scorer: &Scorer,
) -> Result<ToolsetEval, OptimizeError> {
    if examples.is_empty() {
        return Err(OptimizeError::NoExamples);
    }
    if options.trials == 0 {
        return Err(OptimizeError::NoTrials);
    }
    let config = SolveConfig {
        enabled_tools: toolset.clone(),
        ..solver_config.clone()
    };
    config.validate()?;

    let jobs: Vec<(usize, &Example)> = (1..=options.trials)
        .flat_map(|t| examples.iter().map(move |e| (t, e)))
        .collect();
    let per_example: Vec<Attempt> = parallel_map(&jobs, options.jobs, |(trial, example)| {
        let correct = match solver.solve(example, &config) {
            Ok(solution) => scorer.score(&solution, example).correct,
            Err(err) => {
                tracing::warn!(example = %example.example_id, error = %err, "solve failed; scored incorrect");
                false
            }
        };
        Attempt {
            example_id: example.example_id.clone(),
            trial: *trial,
            correct,
        }
    });
    let correct = per_example.iter().filter(|a| a.correct).count();
    // Every trial covers every example, so this equals the mean of the
    // per-trial accuracies without accumulating rounding.
    let accuracy = correct as f64 / per_example.len() as f64;
    Ok(ToolsetEval {
        toolset: toolset.clone(),
        accuracy,
        correct,
        attempts: per_example.len(),
        trials: options.trials,
        per_example,
    })
}

/// Runs the three stages with candidates taken in registration order.
pub fn optimize_toolset(
    registry: &ToolRegistry,
    base: &BTreeSet<String>,
    examples: &[Example],
    options: &OptimizeOptions,
    solver_config: &SolveConfig,
    solver: &dyn ExampleSolver,
    scorer: &Scorer,
) -> Result<OptimizationReport, OptimizeError> {
    registry.check_known(base)?;
    let candidates: Vec<String> = registry
        .names()
        .filter(|n| !base.contains(*n))
        .map(String::from)
        .collect();
    optimize_candidates(
        base,
        &candidates,
        examples,
        options,
        solver_config,
        solver,
        scorer,
    )
}

/// [`optimize_toolset`] over an explicit candidate order.
pub fn optimize_candidates(
    base: &BTreeSet<String>,
    candidates: &[String],
    examples: &[Example],
    options: &OptimizeOptions,
    solver_config: &SolveConfig,
    solver: &dyn ExampleSolver,
    scorer: &Scorer,
) -> Result<OptimizationReport, OptimizeError> {
    let baseline = evaluate_accuracy(base, examples, options, solver_config, solver, scorer)?;
    let mut results = BTreeMap::new();
    let mut selected = base.clone();
    for name in candidates {
        let mut toolset = base.clone();
        toolset.insert(name.clone());
        let eval = evaluate_accuracy(&toolset, examples, options, solver_config, solver, scorer)?;
        // Both evaluations share a denominator, so comparing counts decides
        // the sign of the delta exactly.
        let improves = eval.correct > baseline.correct;
        if improves {
            selected.insert(name.clone());
        }
        let delta = eval.accuracy - baseline.accuracy;
        results.insert(
            name.clone(),
            CandidateResult {
                eval,
                delta,
                selected: improves,
            },
        );
    }
    Ok(OptimizationReport {
        schema_version: SCHEMA_VERSION,
        base: base.clone(),
        baseline,
        evaluations: candidates.len() + 1,
        candidates: results,
        selected,
        ordering: candidates.to_vec(),
        trials: options.trials,
        validation_examples: examples.len(),
        seed: options.seed,
    })
}

impl OptimizationReport {
    /// Sorted-key JSON with a trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report is always serializable");
        let mut text = serde_json::to_string_pretty(&value).expect("value is always serializable");
        text.push('\n');
        text
    }

    /// Accuracy table with one row per evaluated toolset, then D*.
    pub fn render_table(&self) -> String {
        let base_label = format!(
            "base: {}",
            self.base.iter().cloned().collect::<Vec<_>>().join(", ")
        );
        let width = self
            .ordering
            .iter()
            .map(String::len)
            .chain([base_label.len(), 4])
            .max()
            .unwrap_or(4);
        let mut out = format!(
            "Toolset optimization over {} validation examples, {} trial(s){}\n\n",
            self.validation_examples,
            self.trials,
            self.seed.map(|s| format!(", seed {s}")).unwrap_or_default()
        );
        out.push_str(&format!(
            "{:<width$}  {:>8}  {:>8}  selected\n",
            "tool", "accuracy", "delta"
        ));
        out.push_str(&format!(
            "{:<width$}  {:>8.3}  {:>8}  yes\n",
            base_label, self.baseline.accuracy, "-"
        ));
        for name in &self.ordering {
            let c = &self.candidates[name];
            out.push_str(&format!(
                "{:<width$}  {:>8.3}  {:>+8.3}  {}\n",
                name,
                c.eval.accuracy,
                c.delta,
                if c.selected { "yes" } else { "no" }
            ));
        }
        out.push_str(&format!(
            "\nOptimized toolset: {}\n",
            self.selected.iter().cloned().collect::<Vec<_>>().join(", ")
        ));
        out
    }
}
