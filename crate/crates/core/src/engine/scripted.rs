use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Engine, EngineError, EngineRequest, EngineResponse};

/// One scripted response, matched by caller tag and an optional substring of
/// the user text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaybookEntry {
    pub tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    pub response: String,
}

impl PlaybookEntry {
    pub fn new(tag: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            contains: None,
            response: response.into(),
        }
    }

    pub fn containing(mut self, needle: impl Into<String>) -> Self {
        self.contains = Some(needle.into());
        self
    }

    fn matches(&self, request: &EngineRequest) -> bool {
        self.tag == request.tag
            && self
                .contains
                .as_deref()
                .is_none_or(|needle| request.user_text.contains(needle))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Playbook {
    pub entries: Vec<PlaybookEntry>,
    /// Strict playbooks are consumed strictly in order and every request must
    /// match the next entry.
    pub strict: bool,
}

impl Playbook {
    pub fn strict(entries: Vec<PlaybookEntry>) -> Self {
        Self {
            entries,
            strict: true,
        }
    }

    pub fn lenient(entries: Vec<PlaybookEntry>) -> Self {
        Self {
            entries,
            strict: false,
        }
    }

    /// Loads the on-disk format: a JSON list of `{tag, contains?, response}`.
    pub fn load(path: &Path, strict: bool) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            EngineError::Config(format!("reading playbook {}: {e}", path.display()))
        })?;
        let entries: Vec<PlaybookEntry> = serde_json::from_str(&text).map_err(|e| {
            EngineError::Config(format!("parsing playbook {}: {e}", path.display()))
        })?;
        Ok(Self { entries, strict })
    }
}

#[derive(Debug, Default)]
struct PlaybookState {
    consumed: Vec<bool>,
    cursor: usize,
    log: Vec<EngineRequest>,
}

/// Deterministic offline engine that answers from a [`Playbook`].
///
/// Lenient mode consumes the first unconsumed matching entry; once every
/// matching entry has been consumed, the last one consumed for that request
/// shape is replayed. This lets a single `context_verifier` entry answer an
/// unbounded loop.
#[derive(Debug)]
pub struct ScriptedEngine {
    playbook: Playbook,
    state: Mutex<PlaybookState>,
}

impl ScriptedEngine {
    pub fn new(playbook: Playbook) -> Self {
        let state = PlaybookState {
            consumed: vec![false; playbook.entries.len()],
            ..Default::default()
        };
        Self {
            playbook,
            state: Mutex::new(state),
        }
    }

    /// Every request seen so far, in arrival order.
    pub fn requests(&self) -> Vec<EngineRequest> {
        self.state.lock().expect("playbook lock").log.clone()
    }

    pub fn remaining(&self) -> usize {
        let state = self.state.lock().expect("playbook lock");
        state.consumed.iter().filter(|c| !**c).count()
    }

    fn select(
        &self,
        state: &mut PlaybookState,
        request: &EngineRequest,
    ) -> Result<usize, EngineError> {
        let entries = &self.playbook.entries;
        if self.playbook.strict {
            let index = state.cursor;
            let entry = entries
                .get(index)
                .ok_or_else(|| EngineError::PlaybookExhausted {
                    tag: request.tag.clone(),
                })?;
            if !entry.matches(request) {
                return Err(EngineError::PlaybookMismatch {
                    index,
                    expected: entry.tag.clone(),
                    got: request.tag.clone(),
                });
            }
            state.cursor += 1;
            return Ok(index);
        }
        if let Some(index) =
            (0..entries.len()).find(|&i| !state.consumed[i] && entries[i].matches(request))
        {
            return Ok(index);
        }
        (0..entries.len())
            .rev()
            .find(|&i| state.consumed[i] && entries[i].matches(request))
            .ok_or_else(|| EngineError::PlaybookExhausted {
                tag: request.tag.clone(),
            })
    }
}

impl Engine for ScriptedEngine {
    fn complete(&self, request: &EngineRequest) -> Result<EngineResponse, EngineError> {
        request.validate()?;
        let mut state = self.state.lock().expect("playbook lock");
        state.log.push(request.clone());
        let index = self.select(&mut state, request)?;
        state.consumed[index] = true;
        Ok(EngineResponse::free(
            self.playbook.entries[index].response.clone(),
            0.0,
        ))
    }

    fn model_name(&self) -> &str {
        "scripted"
    }
}
