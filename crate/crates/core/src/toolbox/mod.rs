//! The tool-card contract and the registry consulted by planner and executor.

mod scripted;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::engine::{Engine, EngineError};
use crate::executor::parse_script;

pub use scripted::ScriptedTool;

/// Keyword arguments of one `tool.execute(...)` call, in call order.
pub type ToolArgs = IndexMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoCommand {
    pub command: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolMetadata {
    pub tool_name: String,
    pub tool_description: String,
    #[serde(deserialize_with = "unique_keys")]
    pub input_types: IndexMap<String, String>,
    pub output_type: String,
    #[serde(default)]
    pub demo_commands: Vec<DemoCommand>,
    #[serde(default)]
    pub user_metadata: IndexMap<String, String>,
    #[serde(default)]
    pub requires_engine: bool,
    #[serde(default)]
    pub requires_network: bool,
}

fn unique_keys<'de, D: Deserializer<'de>>(d: D) -> Result<IndexMap<String, String>, D::Error> {
    struct UniqueVisitor;
    impl<'de> Visitor<'de> for UniqueVisitor {
        type Value = IndexMap<String, String>;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a map of parameter names to type descriptions")
        }
        fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
            let mut out = IndexMap::new();
            while let Some((k, v)) = access.next_entry::<String, String>()? {
                if out.contains_key(&k) {
                    return Err(serde::de::Error::custom(format!(
                        "duplicate input type `{k}`"
                    )));
                }
                out.insert(k, v);
            }
            Ok(out)
        }
    }
    d.deserialize_map(UniqueVisitor)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl ToolMetadata {
    pub fn validate(&self) -> Result<(), String> {
        if self.tool_name.trim().is_empty() {
            return Err("tool_name is empty".into());
        }
        if let Some(key) = self.input_types.keys().find(|k| !is_identifier(k)) {
            return Err(format!("input type key `{key}` is not a valid identifier"));
        }
        for (i, demo) in self.demo_commands.iter().enumerate() {
            parse_script(&demo.command)
                .map_err(|e| format!("demo command {} does not parse: {e}", i + 1))?;
        }
        Ok(())
    }

    /// Text block listing every field, used in prompts.
    pub fn render(&self) -> String {
        let mut out = format!(
            "Tool: {}\nDescription: {}\nInput types:\n",
            self.tool_name, self.tool_description
        );
        if self.input_types.is_empty() {
            out.push_str("  (none)\n");
        }
        for (name, ty) in &self.input_types {
            out.push_str(&format!("  - {name}: {ty}\n"));
        }
        out.push_str(&format!(
            "Output type: {}\nDemo commands:\n",
            self.output_type
        ));
        for demo in &self.demo_commands {
            out.push_str(&format!(
                "  - command: {}\n    description: {}\n",
                demo.command, demo.description
            ));
        }
        if !self.user_metadata.is_empty() {
            out.push_str("User metadata:\n");
            for (key, value) in &self.user_metadata {
                out.push_str(&format!("  - {key}: {value}\n"));
            }
        }
        out.push_str(&format!(
            "Requires engine: {}\nRequires network: {}\n",
            self.requires_engine, self.requires_network
        ));
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: String, reason: String },
    #[error("missing required argument `{0}`")]
    MissingArgument(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("engine error: {0}")]
    Engine(#[from] EngineError),
    #[error("network error: {0}")]
    Network(String),
    #[error("HTTP status {code}: {message}")]
    HttpStatus { code: u16, message: String },
    #[error("missing credentials: {0}")]
    MissingCredentials(String),
    #[error("invalid size {0}; valid sizes are 25, 50, 100 and 200")]
    InvalidSize(i64),
    #[error("image error: {0}")]
    Image(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// What a card returns on success. Artifact paths are absolute; the
/// executor rewrites them relative to the query directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolOutput {
    pub payload: Value,
    pub artifacts: Vec<PathBuf>,
}

impl ToolOutput {
    pub fn new(payload: Value) -> Self {
        Self {
            payload,
            artifacts: Vec::new(),
        }
    }
}

/// Per-call environment handed to a card.
#[derive(Clone)]
pub struct ToolContext {
    pub engine: Arc<dyn Engine>,
    /// Step directory where the call may write artifacts.
    pub work_dir: PathBuf,
    /// Per-query directory that artifact paths are reported relative to.
    pub root_dir: PathBuf,
    /// Extra directories searched when resolving relative input paths.
    pub input_dirs: Vec<PathBuf>,
}

impl ToolContext {
    pub fn new(engine: Arc<dyn Engine>, work_dir: impl Into<PathBuf>) -> Self {
        let work_dir = work_dir.into();
        Self {
            engine,
            root_dir: work_dir.clone(),
            work_dir,
            input_dirs: Vec::new(),
        }
    }

    /// Resolves a file path named in a command: as given, then against each
    /// input directory, then against the query directory. Unresolvable paths
    /// are returned unchanged so the tool can report them.
    pub fn resolve_input(&self, raw: &str) -> PathBuf {
        let given = Path::new(raw);
        if given.exists() {
            return given.to_path_buf();
        }
        if given.is_relative() {
            for dir in self
                .input_dirs
                .iter()
                .chain([&self.root_dir, &self.work_dir])
            {
                let candidate = dir.join(given);
                if candidate.exists() {
                    return candidate;
                }
            }
            if let Some(name) = given.file_name() {
                for dir in &self.input_dirs {
                    let candidate = dir.join(name);
                    if candidate.exists() {
                        return candidate;
                    }
                }
            }
        }
        given.to_path_buf()
    }
}

pub trait ToolCard: Send + Sync {
    fn metadata(&self) -> &ToolMetadata;

    fn execute(&self, args: &ToolArgs, ctx: &ToolContext) -> Result<ToolOutput, ToolError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub status: ToolStatus,
    pub payload: Value,
    pub error_message: Option<String>,
    pub artifacts: Vec<PathBuf>,
    pub duration: f64,
}

impl ToolResult {
    pub fn ok(payload: Value, artifacts: Vec<PathBuf>, duration: f64) -> Self {
        Self {
            status: ToolStatus::Ok,
            payload,
            error_message: None,
            artifacts,
            duration,
        }
    }

    pub fn error(message: impl Into<String>, duration: f64) -> Self {
        let mut message = message.into();
        if message.is_empty() {
            message = "unknown error".into();
        }
        Self {
            status: ToolStatus::Error,
            payload: Value::Null,
            error_message: Some(message),
            artifacts: Vec::new(),
            duration,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ToolStatus::Ok
    }

    /// The text shown to the planner: the payload for successes, the error
    /// message otherwise.
    pub fn display_text(&self) -> String {
        match (&self.status, &self.payload) {
            (ToolStatus::Error, _) => {
                format!("Error: {}", self.error_message.as_deref().unwrap_or(""))
            }
            (ToolStatus::Ok, Value::String(s)) => s.clone(),
            (ToolStatus::Ok, other) => other.to_string(),
        }
    }
}

/// Checks argument names against the card's declared inputs.
pub fn validate_args(metadata: &ToolMetadata, args: &ToolArgs) -> Result<ToolArgs, ToolError> {
    match args.keys().find(|k| !metadata.input_types.contains_key(*k)) {
        Some(unknown) => Err(ToolError::UnknownParameter(unknown.clone())),
        None => Ok(args.clone()),
    }
}

/// Optional string argument.
pub fn str_arg<'a>(args: &'a ToolArgs, name: &str) -> Result<Option<&'a str>, ToolError> {
    match args.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(ToolError::InvalidArgument {
            name: name.into(),
            reason: format!("expected a string, got {other}"),
        }),
    }
}

/// Required, non-empty string argument.
pub fn required_str<'a>(args: &'a ToolArgs, name: &str) -> Result<&'a str, ToolError> {
    match str_arg(args, name)? {
        Some(s) if !s.trim().is_empty() => Ok(s),
        Some(_) => Err(ToolError::InvalidArgument {
            name: name.into(),
            reason: "must not be empty".into(),
        }),
        None => Err(ToolError::MissingArgument(name.into())),
    }
}

/// Optional integer argument.
pub fn int_arg(args: &ToolArgs, name: &str) -> Result<Option<i64>, ToolError> {
    match args.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_i64()
            .map(Some)
            .ok_or_else(|| ToolError::InvalidArgument {
                name: name.into(),
                reason: format!("expected an integer, got {v}"),
            }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("tool `{0}` is already registered")]
    DuplicateToolName(String),
    #[error("invalid metadata for `{name}`: {reason}")]
    InvalidMetadata { name: String, reason: String },
    #[error("unknown tool `{0}`")]
    UnknownToolName(String),
}

/// Immutable set of registered cards plus the base toolset.
#[derive(Clone)]
pub struct ToolRegistry {
    cards: IndexMap<String, Arc<dyn ToolCard>>,
    base: BTreeSet<String>,
}

impl fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToolRegistry")
            .field("cards", &self.cards.keys().collect::<Vec<_>>())
            .field("base", &self.base)
            .finish()
    }
}

impl ToolRegistry {
    pub fn builder() -> ToolRegistryBuilder {
        ToolRegistryBuilder::default()
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    /// Tool names in registration order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.cards.keys().map(String::as_str)
    }

    pub fn base(&self) -> &BTreeSet<String> {
        &self.base
    }

    pub fn contains(&self, name: &str) -> bool {
        self.cards.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Arc<dyn ToolCard>, RegistryError> {
        self.cards
            .get(name)
            .ok_or_else(|| RegistryError::UnknownToolName(name.to_string()))
    }

    pub fn all_names(&self) -> BTreeSet<String> {
        self.cards.keys().cloned().collect()
    }

    /// Fails on the first name that is not registered.
    pub fn check_known<'a>(
        &self,
        names: impl IntoIterator<Item = &'a String>,
    ) -> Result<(), RegistryError> {
        match names.into_iter().find(|n| !self.contains(n)) {
            Some(unknown) => Err(RegistryError::UnknownToolName(unknown.clone())),
            None => Ok(()),
        }
    }

    /// The enabled names in registration order.
    pub fn ordered(&self, enabled: &BTreeSet<String>) -> Result<Vec<String>, RegistryError> {
        self.check_known(enabled)?;
        Ok(self
            .cards
            .keys()
            .filter(|name| enabled.contains(*name))
            .cloned()
            .collect())
    }

    /// Deterministic metadata listing for the enabled tools, in registration
    /// order. Empty for an empty set.
    pub fn metadata_digest(&self, enabled: &BTreeSet<String>) -> Result<String, RegistryError> {
        let blocks: Vec<String> = self
            .ordered(enabled)?
            .iter()
            .map(|name| self.cards[name].metadata().render())
            .collect();
        Ok(blocks.join("\n"))
    }
}

#[derive(Default)]
pub struct ToolRegistryBuilder {
    cards: IndexMap<String, Arc<dyn ToolCard>>,
    base: Option<BTreeSet<String>>,
}

impl ToolRegistryBuilder {
    pub fn register(mut self, card: Arc<dyn ToolCard>) -> Result<Self, RegistryError> {
        let meta = card.metadata();
        meta.validate()
            .map_err(|reason| RegistryError::InvalidMetadata {
                name: meta.tool_name.clone(),
                reason,
            })?;
        if self.cards.contains_key(&meta.tool_name) {
            return Err(RegistryError::DuplicateToolName(meta.tool_name.clone()));
        }
        self.cards.insert(meta.tool_name.clone(), card);
        Ok(self)
    }

    /// Overrides the base set, which otherwise defaults to the generalist
    /// tool when it is registered.
    pub fn base<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.base = Some(names.into_iter().map(Into::into).collect());
        self
    }

    pub fn build(self) -> Result<ToolRegistry, RegistryError> {
        let base = match self.base {
            Some(base) => base,
            None => self
                .cards
                .keys()
                .filter(|n| n.as_str() == crate::BASE_TOOL)
                .cloned()
                .collect(),
        };
        if let Some(unknown) = base.iter().find(|n| !self.cards.contains_key(*n)) {
            return Err(RegistryError::UnknownToolName(unknown.clone()));
        }
        Ok(ToolRegistry {
            cards: self.cards,
            base,
        })
    }
}

/// On-disk toolbox manifest: `{"enabled": [...], "base": [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolboxManifest {
    pub enabled: Vec<String>,
    #[serde(default)]
    pub base: Vec<String>,
}

impl ToolboxManifest {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("reading manifest {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("parsing manifest {}: {e}", path.display()))
    }

    /// Checks every name against the registry.
    pub fn resolve(
        &self,
        registry: &ToolRegistry,
    ) -> Result<(BTreeSet<String>, BTreeSet<String>), RegistryError> {
        registry.check_known(&self.enabled)?;
        registry.check_known(&self.base)?;
        Ok((
            self.enabled.iter().cloned().collect(),
            self.base.iter().cloned().collect(),
        ))
    }
}
