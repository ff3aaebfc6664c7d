//! Replays the Game of 24 solve: three calculator steps, the last one a
//! brute-force search written in the restricted dialect.
//!
//! cargo run --example game_of_24

use std::path::Path;

use anyhow::Result;
use toolcards::clock::TickClock;
use toolcards::config::Config;
use toolcards::controller::solve_with_clock;

const QUERY: &str = "Using the numbers [1, 1, 6, 9], create an expression that equals 24. You must use basic arithmetic operations (+, -, *, /) and parentheses.";

fn main() -> Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/replays/game24");
    let mut config = Config::load(Some(&dir.join("config.toml")))?;
    config.solve.cache_dir = Some(std::env::temp_dir().join("toolcards-game24"));
    let registry = config.registry()?;
    let solve_config = config.solve_config(&registry)?;
    let solution = solve_with_clock(
        QUERY,
        None,
        &solve_config,
        &registry,
        config.engine(None)?,
        &TickClock::default(),
    )?;

    for step in &solution.trajectory.steps {
        println!("Step {}: {}", step.index, step.action.sub_goal);
        if let Some(result) = step.execution.primary() {
            println!(
                "  printed: {}",
                result.payload["execution_result"].as_str().unwrap_or("")
            );
        }
    }
    let answer = solution
        .trajectory
        .final_answer
        .as_ref()
        .map(|a| a.direct_answer.as_str())
        .unwrap_or("");
    println!("\nAnswer: {answer}");
    Ok(())
}
