//! Tool cards shipped with the crate.
//!
//! | card | needs |
//! |------|-------|
//! | [`GeneralistTool`] | engine |
//! | [`ImageCaptionerTool`] | engine, image |
//! | [`CalculatorTool`] | engine (writes the program), [`calc`] (runs it) |
//! | [`PatchZoomerTool`] | engine, image |
//! | [`UrlTextExtractorTool`], [`WikipediaSearchTool`] | network |
//! | [`WebSearchTool`] | network, `GOOGLE_API_KEY` and `GOOGLE_CX` |
//! | [`ArxivSearchTool`], [`PubmedSearchTool`] | network |
//!
//! Network cards go through a [`net::Transport`], so a
//! [`net::FixtureTransport`] makes them fully offline.

pub mod calc;
mod calculator;
mod generalist;
pub mod net;
mod papers;
mod patch_zoom;
mod web;

use std::sync::Arc;

use serde::Serialize;
use serde_json::Value;

use crate::toolbox::{DemoCommand, RegistryError, ToolMetadata, ToolRegistry, ToolRegistryBuilder};

pub use calculator::CalculatorTool;
pub use generalist::{GeneralistTool, ImageCaptionerTool};
pub use papers::{ArxivSearchTool, PubmedSearchTool};
pub use patch_zoom::{crop_regions, PatchZoomerTool, Region};
pub use web::{UrlTextExtractorTool, WebSearchTool, WikipediaSearchTool};

/// One search result. `extra` carries source-specific fields such as
/// authors or keywords.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub title: String,
    pub url: String,
    pub snippet_or_abstract: String,
    pub extra: indexmap::IndexMap<String, String>,
}

impl SearchHit {
    /// JSON object using the given key names for the text and link fields.
    pub(crate) fn to_json(&self, text_key: &str, url_key: &str) -> Value {
        let mut map = serde_json::Map::new();
        map.insert("title".into(), Value::String(self.title.clone()));
        for (k, v) in &self.extra {
            map.insert(k.clone(), Value::String(v.clone()));
        }
        map.insert(
            text_key.into(),
            Value::String(self.snippet_or_abstract.clone()),
        );
        map.insert(url_key.into(), Value::String(self.url.clone()));
        Value::Object(map)
    }
}

pub(crate) struct MetaSpec<'a> {
    pub name: &'a str,
    pub description: &'a str,
    pub inputs: &'a [(&'a str, &'a str)],
    pub output: &'a str,
    pub demos: &'a [(&'a str, &'a str)],
    pub user: &'a [(&'a str, &'a str)],
    pub engine: bool,
    pub network: bool,
}

impl MetaSpec<'_> {
    pub(crate) fn build(&self) -> ToolMetadata {
        let own = |pairs: &[(&str, &str)]| {
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect()
        };
        ToolMetadata {
            tool_name: self.name.into(),
            tool_description: self.description.into(),
            input_types: own(self.inputs),
            output_type: self.output.into(),
            demo_commands: self
                .demos
                .iter()
                .map(|(c, d)| DemoCommand {
                    command: c.to_string(),
                    description: d.to_string(),
                })
                .collect(),
            user_metadata: own(self.user),
            requires_engine: self.engine,
            requires_network: self.network,
        }
    }
}

/// Every offline-capable card plus the network cards over `transport`.
pub fn default_registry(transport: Arc<dyn net::Transport>) -> Result<ToolRegistry, RegistryError> {
    default_builder(transport)?.build()
}

/// The built-in cards, registered in their canonical order, ready for more.
pub fn default_builder(
    transport: Arc<dyn net::Transport>,
) -> Result<ToolRegistryBuilder, RegistryError> {
    ToolRegistry::builder()
        .register(Arc::new(GeneralistTool::new()))?
        .register(Arc::new(ImageCaptionerTool::new()))?
        .register(Arc::new(CalculatorTool::new()))?
        .register(Arc::new(PatchZoomerTool::new()))?
        .register(Arc::new(UrlTextExtractorTool::new(transport.clone())))?
        .register(Arc::new(WikipediaSearchTool::new(transport.clone())))?
        .register(Arc::new(WebSearchTool::from_env(transport.clone())))?
        .register(Arc::new(ArxivSearchTool::new(transport.clone())))?
        .register(Arc::new(PubmedSearchTool::new(transport)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_shipped_card_has_valid_metadata() {
        let registry = default_registry(Arc::new(net::FixtureTransport::new("unused"))).unwrap();
        assert_eq!(registry.len(), 9);
        for name in registry.names() {
            let meta = registry.get(name).unwrap().metadata();
            meta.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!meta.demo_commands.is_empty(), "{name}");
        }
        assert!(registry.base().contains(crate::BASE_TOOL));
    }
}
