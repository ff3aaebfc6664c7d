//! Solves one query against a live model endpoint. Settings come from
//! `TOOLCARDS_CONFIG` or the `TOOLCARDS_*` environment variables; the API
//! key is read from the variable the config names.
//!
//! cargo run --example live_solve -- "What is the capital of Australia?"

use anyhow::Result;
use toolcards::config::Config;
use toolcards::memory::render_listing;
use toolcards::solve;

fn main() -> Result<()> {
    let query = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "What is 17 + 25?".to_string());
    let config = Config::load(None)?;
    let registry = config.registry()?;
    let solve_config = config.solve_config(&registry)?;
    let engine = config.engine(None)?;

    let solution = solve(&query, None, &solve_config, &registry, engine)?;
    print!("{}", render_listing(&solution.trajectory));
    println!("\nTermination: {}", solution.termination.as_str());
    println!("Cost: ${:.4}", solution.trajectory.totals.cost);
    println!("Final answer:\n{}", solution.answer_text.trim());
    Ok(())
}
