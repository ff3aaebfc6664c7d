use std::sync::Arc;

use scraper::{Html, Node};
use serde_json::{json, Value};
use url::Url;

use super::net::{check_status, parse_url, Transport};
use super::{MetaSpec, SearchHit};
use crate::toolbox::{
    int_arg, required_str, ToolArgs, ToolCard, ToolContext, ToolError, ToolMetadata, ToolOutput,
};

const SKIPPED_ELEMENTS: &[&str] = &["script", "style", "noscript", "template"];

/// Visible text of an HTML document: one line per text run, internal
/// whitespace collapsed, empty runs dropped.
pub fn visible_text(html: &str) -> String {
    let doc = Html::parse_document(html);
    let mut lines = Vec::new();
    for node in doc.tree.root().descendants() {
        let Node::Text(text) = node.value() else {
            continue;
        };
        let hidden = node.ancestors().any(|a| match a.value() {
            Node::Element(e) => SKIPPED_ELEMENTS.contains(&e.name()),
            _ => false,
        });
        if hidden {
            continue;
        }
        let line = text.split_whitespace().collect::<Vec<_>>().join(" ");
        if !line.is_empty() {
            lines.push(line);
        }
    }
    lines.join("\n")
}

pub struct UrlTextExtractorTool {
    metadata: ToolMetadata,
    transport: Arc<dyn Transport>,
}

impl UrlTextExtractorTool {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        let metadata = MetaSpec {
            name: "URL_Text_Extractor_Tool",
            description: "A tool that extracts all text from a given URL.",
            inputs: &[("url", "str - The URL from which to extract text.")],
            output: "dict - A dictionary containing the extracted text and any error messages.",
            demos: &[
                ("execution = tool.execute(url=\"https://example.com\")", "Extract all text from the example.com website."),
                ("execution = tool.execute(url=\"https://en.wikipedia.org/wiki/Python_(programming_language)\")", "Extract all text from the Wikipedia page about Python programming language."),
            ],
            user: &[],
            engine: false,
            network: true,
        }
        .build();
        Self {
            metadata,
            transport,
        }
    }
}

impl ToolCard for UrlTextExtractorTool {
    fn metadata(&self) -> &ToolMetadata {
        &self.metadata
    }

    fn execute(&self, args: &ToolArgs, _ctx: &ToolContext) -> Result<ToolOutput, ToolError> {
        let raw = required_str(args, "url")?;
        let url = parse_url(raw)?;
        let body = check_status(self.transport.get(&self.metadata.tool_name, raw, &url)?)?;
        Ok(ToolOutput::new(
            json!({ "url": raw, "extracted_text": visible_text(&body) }),
        ))
    }
}

pub const WIKI_API: &str = "https://en.wikipedia.org/w/api.php";
pub const NO_RESULTS: &str = "No results found for the given query.";

pub struct WikipediaSearchTool {
    metadata: ToolMetadata,
    transport: Arc<dyn Transport>,
    limit: usize,
}

impl WikipediaSearchTool {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        let metadata = MetaSpec {
            name: "Wikipedia_Knowledge_Searcher_Tool",
            description: "A tool that searches Wikipedia and returns web text based on a given query.",
            inputs: &[("query", "str - The search query for Wikipedia.")],
            output: "dict - A dictionary containing the search results, extracted text, and any error messages.",
            demos: &[
                ("execution = tool.execute(query=\"Python programming language\")", "Search Wikipedia for information about Python programming language."),
                ("execution = tool.execute(query=\"Artificial Intelligence\")", "Search Wikipedia for information about Artificial Intelligence"),
                ("execution = tool.execute(query=\"Theory of Relativity\")", "Search Wikipedia for the full article about the Theory of Relativity."),
            ],
            user: &[],
            engine: false,
            network: true,
        }
        .build();
        Self {
            metadata,
            transport,
            limit: 10,
        }
    }

    fn api_json(&self, query: &str, params: &[(&str, &str)]) -> Result<Value, ToolError> {
        let url = Url::parse_with_params(WIKI_API, params).expect("static base URL");
        let body = check_status(self.transport.get(&self.metadata.tool_name, query, &url)?)?;
        serde_json::from_str(&body)
            .map_err(|e| ToolError::Network(format!("unexpected Wikipedia response: {e}")))
    }
}

impl ToolCard for WikipediaSearchTool {
    fn metadata(&self) -> &ToolMetadata {
        &self.metadata
    }

    fn execute(&self, args: &ToolArgs, _ctx: &ToolContext) -> Result<ToolOutput, ToolError> {
        let query = required_str(args, "query")?;
        let limit = self.limit.to_string();
        let search = self.api_json(
            query,
            &[
                ("action", "query"),
                ("list", "search"),
                ("srsearch", query),
                ("srlimit", &limit),
                ("format", "json"),
            ],
        )?;
        let titles: Vec<&str> = search["query"]["search"]
            .as_array()
            .map(|hits| hits.iter().filter_map(|h| h["title"].as_str()).collect())
            .unwrap_or_default();
        let Some(top) = titles.first() else {
            return Ok(ToolOutput::new(json!({ "output": NO_RESULTS })));
        };
        let pages = self.api_json(
            query,
            &[
                ("action", "query"),
                ("prop", "extracts"),
                ("explaintext", "1"),
                ("redirects", "1"),
                ("titles", top),
                ("format", "json"),
            ],
        )?;
        let extract = pages["query"]["pages"]
            .as_object()
            .and_then(|p| p.values().find_map(|page| page["extract"].as_str()))
            .unwrap_or("")
            .trim();
        let mut output = format!("Search results for '{query}':\n");
        for (i, title) in titles.iter().enumerate() {
            output.push_str(&format!("{}. {title}\n", i + 1));
        }
        output.push_str(&format!("\nExtracted text:\n{extract}"));
        Ok(ToolOutput::new(json!({ "output": output })))
    }
}

pub const GOOGLE_API: &str = "https://www.googleapis.com/customsearch/v1";

pub struct WebSearchTool {
    metadata: ToolMetadata,
    transport: Arc<dyn Transport>,
    credentials: Option<(String, String)>,
}

impl WebSearchTool {
    /// `credentials` is `(api_key, engine_id)`.
    pub fn new(transport: Arc<dyn Transport>, credentials: Option<(String, String)>) -> Self {
        let metadata = MetaSpec {
            name: "Google_Search_Tool",
            description: "A tool that performs Google searches based on a given text query.",
            inputs: &[
                ("query", "str - The search query to be used for the Google search."),
                ("num_results", "int - The number of search results to return (default: 10)."),
            ],
            output: "list - A list of dictionaries containing search result information.",
            demos: &[
                ("execution = tool.execute(query=\"Python programming\")", "Perform a Google search for 'Python programming' and return the default number of results."),
                ("execution = tool.execute(query=\"Machine learning tutorials\", num_results=5)", "Perform a Google search for 'Machine learning tutorials' and return 5 results."),
            ],
            user: &[],
            engine: false,
            network: true,
        }
        .build();
        Self {
            metadata,
            transport,
            credentials,
        }
    }

    /// Reads `GOOGLE_API_KEY` and `GOOGLE_CX`.
    pub fn from_env(transport: Arc<dyn Transport>) -> Self {
        let credentials = match (std::env::var("GOOGLE_API_KEY"), std::env::var("GOOGLE_CX")) {
            (Ok(key), Ok(cx)) if !key.is_empty() && !cx.is_empty() => Some((key, cx)),
            _ => None,
        };
        Self::new(transport, credentials)
    }

    pub fn search(&self, query: &str, num_results: usize) -> Result<Vec<SearchHit>, ToolError> {
        let replay = ("replay".to_string(), "replay".to_string());
        let (key, cx) = match &self.credentials {
            Some(c) => c,
            None if self.transport.replays() => &replay,
            None => {
                return Err(ToolError::MissingCredentials(
                    "set GOOGLE_API_KEY and GOOGLE_CX".into(),
                ))
            }
        };
        let num = num_results.min(10).to_string();
        let url = Url::parse_with_params(
            GOOGLE_API,
            [("q", query), ("key", key), ("cx", cx), ("num", &num)],
        )
        .expect("static base URL");
        let body = check_status(self.transport.get(&self.metadata.tool_name, query, &url)?)?;
        let value: Value = serde_json::from_str(&body)
            .map_err(|e| ToolError::Network(format!("unexpected search response: {e}")))?;
        let hits = value["items"]
            .as_array()
            .map(|items| {
                items
                    .iter()
                    .filter_map(|item| {
                        Some(SearchHit {
                            title: item["title"].as_str()?.to_string(),
                            url: item["link"].as_str()?.to_string(),
                            snippet_or_abstract: item["snippet"].as_str().unwrap_or("").to_string(),
                            extra: Default::default(),
                        })
                    })
                    .take(num_results)
                    .collect()
            })
            .unwrap_or_default();
        Ok(hits)
    }
}

impl ToolCard for WebSearchTool {
    fn metadata(&self) -> &ToolMetadata {
        &self.metadata
    }

    fn execute(&self, args: &ToolArgs, _ctx: &ToolContext) -> Result<ToolOutput, ToolError> {
        let query = required_str(args, "query")?;
        let num = int_arg(args, "num_results")?.unwrap_or(10);
        if num < 1 {
            return Err(ToolError::InvalidArgument {
                name: "num_results".into(),
                reason: "must be at least 1".into(),
            });
        }
        let hits = self.search(query, num as usize)?;
        Ok(ToolOutput::new(Value::Array(
            hits.iter().map(|h| h.to_json("snippet", "url")).collect(),
        )))
    }
}
