//! Planner/executor agent loop over a registry of standardized tool cards.
//!
//! A solve runs a query analyzer once, then iterates action prediction,
//! command generation and execution, and context verification until the
//! verifier stops the loop or a budget runs out. A solution summarizer
//! compiles the final answer from the recorded trajectory.
//!
//! ```text
//!   toolbox        ToolCard trait, ToolMetadata, ToolRegistry, manifest
//!   builtin_tools  generalist, captioner, calculator (restricted dialect),
//!                  patch zoomer, URL/Wikipedia/web/arXiv/PubMed search
//!   engine         Engine trait, scripted/echo/live engines, response parsing
//!   planner        query analyzer, action predictor, verifier, summarizer
//!   executor       command-script grammar and step execution
//!   memory         Trajectory, prompt rendering, canonical JSON persistence
//!   controller     the solve loop and direct (zero-shot / CoT) baselines
//!   optimizer      greedy task-specific toolset selection
//!   bench          datasets, splits, scoring, multi-trial reports, stats
//!   cli            the `toolcards` command-line front end
//! ```

pub mod bench;
pub mod builtin_tools;
pub mod cli;
pub mod clock;
pub mod config;
pub mod controller;
pub mod engine;
pub mod executor;
pub mod memory;
pub mod optimizer;
pub mod planner;
pub mod toolbox;

pub use controller::{solve, solve_direct, DirectMode, Solution, SolveConfig, SolveStats};
pub use engine::{Engine, EngineError, EngineRequest, EngineResponse};
pub use memory::{StepRecord, Termination, Trajectory};
pub use toolbox::{ToolCard, ToolContext, ToolMetadata, ToolRegistry, ToolResult};

/// Name of the base tool every default toolset contains.
pub const BASE_TOOL: &str = "Generalist_Solution_Generator_Tool";
