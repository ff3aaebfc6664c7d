//! Replays the baseball-counting solve from its scripted playbook and prints
//! the step listing and the final answer.
//!
//! cargo run --example replay_baseball

use std::path::Path;

use anyhow::Result;
use toolcards::clock::TickClock;
use toolcards::config::Config;
use toolcards::controller::solve_with_clock;
use toolcards::memory::render_listing;

fn main() -> Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/replays/baseball");
    let mut config = Config::load(Some(&dir.join("config.toml")))?;
    config.solve.cache_dir = Some(std::env::temp_dir().join("toolcards-replay-baseball"));
    let registry = config.registry()?;
    let solve_config = config.solve_config(&registry)?;
    let engine = config.engine(None)?;

    let image = dir.join("baseball.png");
    let solution = solve_with_clock(
        "How many baseballs are there?",
        Some(&image),
        &solve_config,
        &registry,
        engine,
        &TickClock::default(),
    )?;

    print!("{}", render_listing(&solution.trajectory));
    println!("\nTermination: {}", solution.termination.as_str());
    println!("Final answer:\n{}", solution.answer_text.trim());
    Ok(())
}
