//! Run configuration: a TOML or JSON file, `TOOLCARDS_*` environment
//! overrides, and builders for the registry, solve settings and engines.
//!
//! Precedence is environment over file over defaults. Command-line flags are
//! applied on top by the caller. Relative paths in a file are resolved
//! against the file's directory.
//!
//! ```toml
//! [solve]
//! max_steps = 10
//! max_time = 300
//!
//! [tools]
//! enabled = ["Generalist_Solution_Generator_Tool", "Python_Code_Generator_Tool"]
//! scripted = ["tools/object_detector.json"]
//! fixtures = "fixtures/net"
//!
//! [engine]
//! kind = "scripted"
//! playbook = "playbooks/baseball.json"
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::bench::{AgentSolver, Example};
use crate::builtin_tools::default_builder;
use crate::builtin_tools::net::{FixtureTransport, HttpTransport, RecordingTransport, Transport};
use crate::controller::SolveConfig;
use crate::engine::{
    EchoEngine, Engine, EngineError, LiveEngine, LiveEngineConfig, Playbook, Pricing,
    ScriptedEngine,
};
use crate::memory::DEFAULT_RESULT_LIMIT;
use crate::planner::PromptSet;
use crate::toolbox::{RegistryError, ScriptedTool, ToolRegistry};

/// Environment variable naming the config file when no path is given.
pub const CONFIG_ENV: &str = "TOOLCARDS_CONFIG";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("environment variable {name}: {message}")]
    Env { name: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub max_steps: usize,
    pub max_time: f64,
    pub cache_dir: Option<PathBuf>,
    pub result_limit: usize,
    /// Directory of `<component>.txt` prompt overrides.
    pub prompts_dir: Option<PathBuf>,
}

impl Default for SolveSection {
    fn default() -> Self {
        Self {
            max_steps: 10,
            max_time: 300.0,
            cache_dir: None,
            result_limit: DEFAULT_RESULT_LIMIT,
            prompts_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolsSection {
    /// Defaults to every registered tool.
    pub enabled: Option<Vec<String>>,
    /// Defaults to the generalist tool.
    pub base: Option<Vec<String>>,
    /// Scripted tool files (`{metadata, responses, delay_secs?}`) to register
    /// after the built-in cards.
    pub scripted: Vec<PathBuf>,
    /// Replay network tools from recorded fixtures under this directory.
    pub fixtures: Option<PathBuf>,
    /// With `fixtures`, call the network and record into that directory.
    pub record: bool,
    pub http_timeout: f64,
}

impl Default for ToolsSection {
    fn default() -> Self {
        Self {
            enabled: None,
            base: None,
            scripted: Vec::new(),
            fixtures: None,
            record: false,
            http_timeout: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    #[default]
    Live,
    Scripted,
    Echo,
}

impl std::str::FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(EngineKind::Live),
            "scripted" => Ok(EngineKind::Scripted),
            "echo" => Ok(EngineKind::Echo),
            other => Err(format!(
                "unknown engine kind `{other}` (expected live, scripted or echo)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub kind: EngineKind,
    pub model: String,
    pub base_url: String,
    pub api_key_env: String,
    pub pricing: Pricing,
    pub timeout: f64,
    /// A playbook file, or a directory of `<example_id>.json` playbooks.
    pub playbook: Option<PathBuf>,
    /// Strict playbooks must be consumed exactly in order.
    pub strict: bool,
}

impl Default for EngineSection {
    fn default() -> Self {
        let live = LiveEngineConfig::default();
        Self {
            kind: EngineKind::Live,
            model: live.model,
            base_url: live.base_url,
            api_key_env: live.api_key_env,
            pricing: live.pricing,
            timeout: live.timeout_secs,
            playbook: None,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub solve: SolveSection,
    pub tools: ToolsSection,
    pub engine: EngineSection,
}

fn read_file(path: &Path) -> Result<Config, ConfigError> {
    let file_err = |message: String| ConfigError::File {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut config: Config = if is_json {
        serde_json::from_str(&text).map_err(|e| file_err(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| file_err(e.to_string()))?
    };
    let dir = path.parent().unwrap_or(Path::new(""));
    config.rebase(dir);
    Ok(config)
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

impl Config {
    /// Reads the file at `path` (or at `$TOOLCARDS_CONFIG`), then applies
    /// environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::resolve(path, &|name| std::env::var(name).ok())
    }

    /// [`Config::load`] with an explicit environment lookup.
    pub fn resolve(
        path: Option<&Path>,
        env: &dyn Fn(&str) -> Option<String>,
    ) -> Result<Self, ConfigError> {
        let from_env = env(CONFIG_ENV).filter(|p| !p.is_empty()).map(PathBuf::from);
        let mut config = match path.map(Path::to_path_buf).or(from_env) {
            Some(path) => read_file(&path)?,
            None => Config::default(),
        };
        config.apply_env(env)?;
        config.check()?;
        Ok(config)
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        for p in [
            self.solve.cache_dir.as_mut(),
            self.solve.prompts_dir.as_mut(),
            self.tools.fixtures.as_mut(),
            self.engine.playbook.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        self.tools.scripted.iter_mut().for_each(fix);
    }

    /// Applies `TOOLCARDS_MAX_STEPS`, `TOOLCARDS_MAX_TIME`,
    /// `TOOLCARDS_CACHE_DIR`, `TOOLCARDS_ENABLED_TOOLS`,
    /// `TOOLCARDS_BASE_TOOLS` (comma-separated), `TOOLCARDS_FIXTURES`,
    /// `TOOLCARDS_ENGINE`, `TOOLCARDS_MODEL`, `TOOLCARDS_BASE_URL` and
    /// `TOOLCARDS_PLAYBOOK`.
    pub fn apply_env(&mut self, env: &dyn Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parsed<T: std::str::FromStr>(name: &str, raw: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            raw.trim().parse().map_err(|e: T::Err| ConfigError::Env {
                name: name.into(),
                message: e.to_string(),
            })
        }
        let get = |name: &str| env(name).filter(|v| !v.is_empty());
        if let Some(v) = get("TOOLCARDS_MAX_STEPS") {
            self.solve.max_steps = parsed("TOOLCARDS_MAX_STEPS", &v)?;
        }
        if let Some(v) = get("TOOLCARDS_MAX_TIME") {
            self.solve.max_time = parsed("TOOLCARDS_MAX_TIME", &v)?;
        }
        if let Some(v) = get("TOOLCARDS_CACHE_DIR") {
            self.solve.cache_dir = Some(v.into());
        }
        if let Some(v) = get("TOOLCARDS_ENABLED_TOOLS") {
            self.tools.enabled = Some(list(&v));
        }
        if let Some(v) = get("TOOLCARDS_BASE_TOOLS") {
            self.tools.base = Some(list(&v));
        }
        if let Some(v) = get("TOOLCARDS_FIXTURES") {
            self.tools.fixtures = Some(v.into());
        }
        if let Some(v) = get("TOOLCARDS_ENGINE") {
            self.engine.kind = parsed("TOOLCARDS_ENGINE", &v)?;
        }
        if let Some(v) = get("TOOLCARDS_MODEL") {
            self.engine.model = v;
        }
        if let Some(v) = get("TOOLCARDS_BASE_URL") {
            self.engine.base_url = v;
        }
        if let Some(v) = get("TOOLCARDS_PLAYBOOK") {
            self.engine.playbook = Some(v.into());
        }
        Ok(())
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.solve.max_steps == 0 {
            return Err(ConfigError::Invalid(
                "solve.max_steps must be at least 1".into(),
            ));
        }
        if self.solve.max_time.is_nan() || self.solve.max_time <= 0.0 {
            return Err(ConfigError::Invalid(
                "solve.max_time must be positive".into(),
            ));
        }
        if self.engine.kind == EngineKind::Scripted && self.engine.playbook.is_none() {
            return Err(ConfigError::Invalid(
                "engine.kind = \"scripted\" needs engine.playbook".into(),
            ));
        }
        if self.tools.record && self.tools.fixtures.is_none() {
            return Err(ConfigError::Invalid(
                "tools.record needs tools.fixtures".into(),
            ));
        }
        Ok(())
    }

    pub fn transport(&self) -> Result<Arc<dyn Transport>, ConfigError> {
        let http = || {
            HttpTransport::new(Duration::from_secs_f64(self.tools.http_timeout))
                .map_err(|e| ConfigError::Invalid(e.to_string()))
        };
        Ok(match (&self.tools.fixtures, self.tools.record) {
            (Some(root), false) => Arc::new(FixtureTransport::new(root)),
            (Some(root), true) => Arc::new(RecordingTransport::new(http()?, root)),
            (None, _) => Arc::new(http()?),
        })
    }

    /// Built-in cards followed by the configured scripted tools.
    pub fn registry(&self) -> Result<ToolRegistry, ConfigError> {
        let mut builder = default_builder(self.transport()?)?;
        for path in &self.tools.scripted {
            let tool = ScriptedTool::load(path).map_err(ConfigError::Invalid)?;
            builder = builder.register(Arc::new(tool))?;
        }
        if let Some(base) = &self.tools.base {
            builder = builder.base(base.iter().cloned());
        }
        Ok(builder.build()?)
    }

    pub fn solve_config(&self, registry: &ToolRegistry) -> Result<SolveConfig, ConfigError> {
        let enabled: BTreeSet<String> = match &self.tools.enabled {
            Some(names) => names.iter().cloned().collect(),
            None => registry.all_names(),
        };
        registry.check_known(&enabled)?;
        let prompts = match &self.solve.prompts_dir {
            Some(dir) => PromptSet::with_overrides(dir).map_err(|e| ConfigError::File {
                path: dir.clone(),
                message: e.to_string(),
            })?,
            None => PromptSet::builtin(),
        };
        let defaults = SolveConfig::default();
        let config = SolveConfig {
            max_steps: self.solve.max_steps,
            max_time: self.solve.max_time,
            enabled_tools: enabled,
            base_tools: registry.base().clone(),
            cache_dir: self.solve.cache_dir.clone().unwrap_or(defaults.cache_dir),
            result_limit: self.solve.result_limit,
            prompts,
        };
        config
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(config)
    }

    fn live_config(&self) -> LiveEngineConfig {
        LiveEngineConfig {
            model: self.engine.model.clone(),
            base_url: self.engine.base_url.clone(),
            api_key_env: self.engine.api_key_env.clone(),
            pricing: self.engine.pricing,
            timeout_secs: self.engine.timeout,
        }
    }

    /// The scripted playbook for one example: `<dir>/<example_id>.json` when
    /// the configured playbook is a directory, else the file itself.
    pub fn playbook_path(&self, example_id: Option<&str>) -> Result<PathBuf, ConfigError> {
        let path = self
            .engine
            .playbook
            .clone()
            .ok_or_else(|| ConfigError::Invalid("no playbook configured".into()))?;
        if !path.is_dir() {
            return Ok(path);
        }
        let id = example_id.ok_or_else(|| {
            ConfigError::Invalid(format!(
                "playbook {} is a directory; a single solve needs a playbook file",
                path.display()
            ))
        })?;
        Ok(path.join(format!("{id}.json")))
    }

    /// An engine for a single solve.
    pub fn engine(&self, example_id: Option<&str>) -> Result<Arc<dyn Engine>, ConfigError> {
        Ok(match self.engine.kind {
            EngineKind::Live => Arc::new(LiveEngine::from_config(&self.live_config())?),
            EngineKind::Echo => Arc::new(EchoEngine),
            EngineKind::Scripted => {
                let playbook =
                    Playbook::load(&self.playbook_path(example_id)?, self.engine.strict)?;
                Arc::new(ScriptedEngine::new(playbook))
            }
        })
    }

    /// Whether solves should run on a deterministic clock.
    pub fn deterministic(&self) -> bool {
        self.engine.kind != EngineKind::Live
    }

    /// A solver for datasets: one shared live engine, or a fresh scripted
    /// engine per example on a deterministic clock.
    pub fn solver(&self, registry: Arc<ToolRegistry>) -> Result<AgentSolver, ConfigError> {
        match self.engine.kind {
            EngineKind::Live | EngineKind::Echo => {
                let engine = self.engine(None)?;
                let solver = AgentSolver::shared(registry, engine);
                Ok(if self.deterministic() {
                    solver.with_tick_clock()
                } else {
                    solver
                })
            }
            EngineKind::Scripted => {
                let config = self.clone();
                Ok(
                    AgentSolver::per_example(registry, move |example: &Example| {
                        config
                            .engine(Some(&example.example_id))
                            .map_err(|e| match e {
                                ConfigError::Engine(e) => e,
                                other => EngineError::Config(other.to_string()),
                            })
                    })
                    .with_tick_clock(),
                )
            }
        }
    }
}
