//! Runs every reference replay as a three-trial benchmark and prints
//! accuracy and tool-usage statistics.
//!
//! cargo run --example benchmark_stats

use std::path::Path;
use std::sync::Arc;

use anyhow::Result;
use toolcards::bench::{
    render_stats, run_benchmark, AgentSolver, BenchOptions, Example, ScoreMode, Scorer,
};
use toolcards::config::Config;

fn main() -> Result<()> {
    let replays = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/replays");
    let queries: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(replays.join("queries.json"))?)?;
    let scorer = Scorer::new(ScoreMode::Exact);

    for name in ["baseball", "agentic"] {
        let entry = &queries[name];
        let mut example = Example::new(
            name,
            entry["query"].as_str().unwrap_or_default(),
            entry["answer"].as_str().unwrap_or_default(),
        );
        example.image = entry["image"].as_str().map(|p| replays.join(p));

        let mut config = Config::load(Some(&replays.join(name).join("config.toml")))?;
        config.solve.cache_dir = Some(std::env::temp_dir().join(format!("toolcards-bench-{name}")));
        let registry = Arc::new(config.registry()?);
        let solve_config = config.solve_config(&registry)?;
        // One fresh engine per solve, so every trial replays from the top.
        let solver = AgentSolver::per_example(registry, move |_| {
            config
                .engine(None)
                .map_err(|e| toolcards::EngineError::Config(e.to_string()))
        })
        .with_tick_clock();
        let options = BenchOptions {
            trials: 3,
            jobs: 1,
            trajectory_dir: None,
        };
        let report = run_benchmark(&[example], &solve_config, &options, &solver, &scorer)?;
        println!("== {name}");
        println!(
            "accuracy {:.3} +/- {:.3} over {:?}",
            report.accuracy_mean, report.accuracy_std, report.trial_accuracies
        );
        print!("{}", render_stats(&report.stats));
    }
    Ok(())
}
