//! Solves the agentic replay, saves its trajectory as canonical JSON, loads
//! it back and prints the listing and statistics.
//!
//! cargo run --example inspect_trajectory

use std::path::Path;

use anyhow::{ensure, Result};
use toolcards::bench::{render_stats, TrajectoryStats};
use toolcards::clock::TickClock;
use toolcards::config::Config;
use toolcards::controller::solve_with_clock;
use toolcards::memory::render_listing;
use toolcards::Trajectory;

fn main() -> Result<()> {
    let replays = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/replays");
    let queries: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(replays.join("queries.json"))?)?;
    let query = queries["agentic"]["query"].as_str().unwrap_or_default();

    let out = std::env::temp_dir().join("toolcards-inspect");
    let mut config = Config::load(Some(&replays.join("agentic/config.toml")))?;
    config.solve.cache_dir = Some(out.join("cache"));
    let registry = config.registry()?;
    let solve_config = config.solve_config(&registry)?;
    let solution = solve_with_clock(
        query,
        None,
        &solve_config,
        &registry,
        config.engine(None)?,
        &TickClock::default(),
    )?;

    let path = out.join("trajectory.json");
    solution.trajectory.save(&path)?;
    let loaded = Trajectory::load(&path)?;
    ensure!(
        loaded == solution.trajectory,
        "trajectory changed on the way through disk"
    );

    print!("{}", render_listing(&loaded));
    println!();
    print!(
        "{}",
        render_stats(&TrajectoryStats::from_trajectories([&loaded]))
    );
    println!("\nSaved to {}", path.display());
    Ok(())
}
