//! The `toolcards` command line: `solve`, `bench`, `optimize`, `inspect` and
//! `tools`.
//!
//! Exit codes: 0 on success, 1 when a solve or run fails, 2 for usage,
//! configuration and input errors. Every file a command writes goes under
//! its `--out` directory.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::bench::{
    load_dataset, render_stats, run_benchmark, split_val_test, BenchOptions, ScoreMode, Scorer,
    TrajectoryStats,
};
use crate::clock::{Clock, SystemClock, TickClock};
use crate::config::Config;
use crate::controller::{
    solve_direct_with_clock, solve_with_clock, DirectMode, SolveConfig, SolveError,
};
use crate::memory::{render_listing, Termination, Trajectory};
use crate::optimizer::{optimize_toolset, OptimizeOptions};
use crate::toolbox::ToolRegistry;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "toolcards",
    version,
    about = "Planner/executor agent over a registry of tool cards"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one query and write its trajectory.
    Solve(SolveArgs),
    /// Run a dataset for several trials and report accuracy and tool usage.
    Bench(BenchArgs),
    /// Select a task-specific toolset on a validation sample.
    Optimize(OptimizeArgs),
    /// Print a saved trajectory as a step listing or as statistics.
    Inspect(InspectArgs),
    /// List the registered tool cards.
    Tools(ToolsArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Config file (TOML or JSON); defaults to $TOOLCARDS_CONFIG.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolveMode {
    Agent,
    ZeroShot,
    ChainOfThought,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub query: String,
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
    /// Comma-separated tool names, replacing the configured toolset.
    #[arg(long, value_delimiter = ',')]
    pub enabled: Option<Vec<String>>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub max_time: Option<f64>,
    #[arg(long, value_enum, default_value = "agent")]
    pub mode: SolveMode,
    #[arg(long, default_value = "toolcards-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitPart {
    All,
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Line-delimited JSON examples.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "exact")]
    pub score: ScoreMode,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, default_value_t = crate::bench::DEFAULT_TRIALS)]
    pub trials: usize,
    /// Which part of the seeded split to run.
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitPart,
    #[arg(long, default_value_t = crate::bench::DEFAULT_VAL_N)]
    pub val_n: usize,
    #[arg(long, default_value_t = crate::bench::DEFAULT_TEST_N)]
    pub test_n: usize,
    #[arg(long, value_delimiter = ',')]
    pub enabled: Option<Vec<String>>,
    #[arg(long, default_value = "toolcards-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, default_value_t = crate::bench::DEFAULT_VAL_N)]
    pub val_n: usize,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, default_value = "toolcards-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InspectFormat {
    Text,
    Stats,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub trajectory: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    pub format: InspectFormat,
}

#[derive(Debug, Args)]
pub struct ToolsArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Print full metadata as JSON.
    #[arg(long)]
    pub json: bool,
}

/// A failed command: message plus exit code.
struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.to_string(),
    }
}

fn failure(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_FAILURE,
        message: message.to_string(),
    }
}

type CmdResult = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Optimize(a) => cmd_optimize(a, out),
        Command::Inspect(a) => cmd_inspect(a, out),
        Command::Tools(a) => cmd_tools(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| failure(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| failure(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes())
        .map_err(|e| failure(format!("writing output: {e}")))
}

/// Config, registry and solve settings, with `--out/cache` as the cache
/// directory unless one is configured.
fn setup(
    config: &ConfigArg,
    enabled: Option<Vec<String>>,
    out: &Path,
) -> Result<(Config, ToolRegistry, SolveConfig), Failure> {
    let mut config = Config::load(config.config.as_deref()).map_err(usage)?;
    if enabled.is_some() {
        config.tools.enabled = enabled;
    }
    if config.solve.cache_dir.is_none() {
        config.solve.cache_dir = Some(out.join("cache"));
    }
    let registry = config.registry().map_err(usage)?;
    let solve_config = config.solve_config(&registry).map_err(usage)?;
    Ok((config, registry, solve_config))
}

fn cmd_solve(args: SolveArgs, out: &mut dyn Write) -> CmdResult {
    let (config, registry, mut solve_config) = setup(&args.config, args.enabled, &args.out)?;
    if let Some(n) = args.max_steps {
        solve_config.max_steps = n;
    }
    if let Some(t) = args.max_time {
        solve_config.max_time = t;
    }
    solve_config.validate().map_err(usage)?;
    let engine = config.engine(None).map_err(usage)?;
    let clock: Box<dyn Clock> = if config.deterministic() {
        Box::new(TickClock::default())
    } else {
        Box::new(SystemClock::default())
    };
    let image = args.image.as_deref();
    let solution = match args.mode {
        SolveMode::Agent => match solve_with_clock(
            &args.query,
            image,
            &solve_config,
            &registry,
            engine,
            clock.as_ref(),
        ) {
            Ok(s) => s,
            Err(e @ SolveError::Infrastructure(_)) => return Err(failure(e)),
            Err(e) => return Err(usage(e)),
        },
        SolveMode::ZeroShot | SolveMode::ChainOfThought => {
            let mode = if args.mode == SolveMode::ZeroShot {
                DirectMode::ZeroShot
            } else {
                DirectMode::ChainOfThought
            };
            solve_direct_with_clock(&args.query, image, mode, engine, clock.as_ref())
        }
    };
    let path = args.out.join("trajectory.json");
    solution.trajectory.save(&path).map_err(failure)?;
    emit(
        out,
        &format!(
            "Termination: {} after {} step(s)\nTrajectory: {}\n\nFinal Answer:\n{}\n",
            solution.termination.as_str(),
            solution.stats.steps_used,
            path.display(),
            solution.answer_text.trim()
        ),
    )?;
    Ok(if solution.termination == Termination::EngineFailure {
        EXIT_FAILURE
    } else {
        EXIT_OK
    })
}

fn cmd_bench(args: BenchArgs, out: &mut dyn Write) -> CmdResult {
    let (config, registry, solve_config) = setup(&args.config, args.enabled, &args.out)?;
    let examples = load_dataset(&args.data.dataset).map_err(usage)?;
    let examples = match args.split {
        SplitPart::All => examples,
        part => {
            let split = split_val_test(&examples, args.val_n, args.test_n, args.data.seed)
                .map_err(usage)?;
            if part == SplitPart::Val {
                split.val
            } else {
                split.test
            }
        }
    };
    let registry = Arc::new(registry);
    let solver = config.solver(registry).map_err(usage)?;
    let scorer = scorer(&config, args.data.score)?;
    let options = BenchOptions {
        trials: args.trials,
        jobs: args.data.jobs,
        trajectory_dir: Some(args.out.join("trajectories")),
    };
    let report =
        run_benchmark(&examples, &solve_config, &options, &solver, &scorer).map_err(usage)?;
    write_file(&args.out.join("report.json"), &report.to_canonical_json())?;
    let text = report.render_text();
    write_file(&args.out.join("report.txt"), &text)?;
    emit(out, &text)?;
    Ok(EXIT_OK)
}

fn scorer(config: &Config, mode: ScoreMode) -> Result<Scorer, Failure> {
    let scorer = Scorer::new(mode);
    Ok(if mode == ScoreMode::Judge {
        scorer.with_judge(config.engine(None).map_err(usage)?)
    } else {
        scorer
    })
}

fn cmd_optimize(args: OptimizeArgs, out: &mut dyn Write) -> CmdResult {
    let (config, registry, solve_config) = setup(&args.config, None, &args.out)?;
    let examples = load_dataset(&args.data.dataset).map_err(usage)?;
    let split = split_val_test(&examples, args.val_n, 0, args.data.seed).map_err(usage)?;
    let registry = Arc::new(registry);
    let solver = config.solver(registry.clone()).map_err(usage)?;
    let scorer = scorer(&config, args.data.score)?;
    let options = OptimizeOptions {
        trials: args.trials,
        jobs: args.data.jobs,
        seed: Some(args.data.seed),
    };
    let base: BTreeSet<String> = solve_config.base_tools.clone();
    let report = optimize_toolset(
        &registry,
        &base,
        &split.val,
        &options,
        &solve_config,
        &solver,
        &scorer,
    )
    .map_err(usage)?;
    write_file(
        &args.out.join("optimization.json"),
        &report.to_canonical_json(),
    )?;
    let table = report.render_table();
    write_file(&args.out.join("optimization.txt"), &table)?;
    emit(out, &table)?;
    Ok(EXIT_OK)
}

fn cmd_inspect(args: InspectArgs, out: &mut dyn Write) -> CmdResult {
    let trajectory = Trajectory::load(&args.trajectory).map_err(usage)?;
    let text = match args.format {
        InspectFormat::Text => render_listing(&trajectory),
        InspectFormat::Stats => render_stats(&TrajectoryStats::from_trajectories([&trajectory])),
    };
    emit(out, &text)?;
    Ok(EXIT_OK)
}

/// First 12 hex characters of SHA-256 over a card's rendered metadata.
pub fn metadata_digest(rendered: &str) -> String {
    hex::encode(Sha256::digest(rendered.as_bytes()))[..12].to_string()
}

fn cmd_tools(args: ToolsArgs, out: &mut dyn Write) -> CmdResult {
    let config = Config::load(args.config.config.as_deref()).map_err(usage)?;
    let registry = config.registry().map_err(usage)?;
    let mut text = String::new();
    if args.json {
        let cards: Vec<_> = registry
            .names()
            .map(|name| {
                let meta = registry.get(name).expect("listed names are registered").metadata();
                json!({ "digest": metadata_digest(&meta.render()), "base": registry.base().contains(name), "metadata": meta })
            })
            .collect();
        text = serde_json::to_string_pretty(&cards).expect("metadata is serializable");
        text.push('\n');
    } else {
        let width = registry.names().map(str::len).max().unwrap_or(0);
        for name in registry.names() {
            let meta = registry
                .get(name)
                .expect("listed names are registered")
                .metadata();
            let base = if registry.base().contains(name) {
                " (base)"
            } else {
                ""
            };
            text.push_str(&format!(
                "{name:<width$}  {}{base}\n    {}\n",
                metadata_digest(&meta.render()),
                meta.tool_description
            ));
        }
    }
    emit(out, &text)?;
    Ok(EXIT_OK)
}
